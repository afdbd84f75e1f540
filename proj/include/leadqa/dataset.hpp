#pragma once

#include "leadqa/intervals.hpp"
#include "leadqa/metrics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace leadqa {

/// One multiple-choice question over a video, with optional ground-truth
/// evidence spans for grounded evaluation.
struct QuestionRecord {
    std::string video_id;
    std::string question_id;
    std::string question;
    std::vector<std::string> options;
    int answer_index = 0;
    question_type type = question_type::Des;
    std::vector<TimeInterval> gt_spans; // empty means unannotated
    double duration_s = 0.0;

    bool annotated() const { return !gt_spans.empty(); }
};

struct IngestResult {
    std::vector<QuestionRecord> records;
    std::vector<std::string> warnings; // e.g. span-clamping notices
};

/// Reads and validates a JSON-Lines dataset. Throws parse_error with the line
/// number on malformed JSON and schema_error with a field path on invalid
/// records (duplicate question_id, bad answer_index, non-positive duration,
/// empty options). Ground-truth spans are clamped into [0, duration_s]; every
/// clamp is reported as a warning rather than an error.
IngestResult ingest_dataset(const std::filesystem::path& path);

/// Validates one already-parsed record (same rules as ingest_dataset, minus
/// duplicate detection). `context` prefixes error messages.
void validate_record(QuestionRecord& record, const std::string& context,
                     std::vector<std::string>& warnings);

} // namespace leadqa
