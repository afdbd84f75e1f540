#include "leadqa/dataset.hpp"

#include "leadqa/errors.hpp"
#include "leadqa/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace leadqa {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& context, const std::string& field,
                              const std::string& msg) {
    throw schema_error(context + ": field '" + field + "': " + msg);
}

const json& require_field(const json& j, const char* name, const std::string& context) {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) schema_fail(context, name, "missing");
    return *it;
}

std::string get_string(const json& j, const char* name, const std::string& context) {
    const json& v = require_field(j, name, context);
    if (!v.is_string()) schema_fail(context, name, "expected a string");
    std::string s = v.get<std::string>();
    if (s.empty()) schema_fail(context, name, "must be non-empty");
    return s;
}

double get_number(const json& v, const char* name, const std::string& context) {
    if (!v.is_number()) schema_fail(context, name, "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) schema_fail(context, name, "must be finite");
    return d;
}

QuestionRecord record_from_json(const json& j, const std::string& context) {
    if (!j.is_object()) {
        throw schema_error(context + ": expected a JSON object");
    }
    QuestionRecord r;
    r.video_id = get_string(j, "video_id", context);
    r.question_id = get_string(j, "question_id", context);
    r.question = get_string(j, "question", context);

    const json& opts = require_field(j, "options", context);
    if (!opts.is_array() || opts.empty()) {
        schema_fail(context, "options", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < opts.size(); ++i) {
        const std::string field = "options[" + std::to_string(i) + "]";
        if (!opts[i].is_string() || opts[i].get<std::string>().empty()) {
            schema_fail(context, field, "expected a non-empty string");
        }
        r.options.push_back(opts[i].get<std::string>());
    }

    const json& ans = require_field(j, "answer_index", context);
    if (!ans.is_number_integer()) schema_fail(context, "answer_index", "expected an integer");
    r.answer_index = ans.get<int>();

    try {
        r.type = question_type_from_string(get_string(j, "question_type", context));
    } catch (const schema_error& e) {
        schema_fail(context, "question_type", e.what());
    }
    r.duration_s = get_number(require_field(j, "duration_s", context), "duration_s", context);

    if (auto it = j.find("gt_spans"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) schema_fail(context, "gt_spans", "expected an array of [start, end]");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string field = "gt_spans[" + std::to_string(i) + "]";
            const json& span = (*it)[i];
            if (!span.is_array() || span.size() != 2) {
                schema_fail(context, field, "expected a [start, end] pair");
            }
            r.gt_spans.push_back({get_number(span[0], field.c_str(), context),
                                  get_number(span[1], field.c_str(), context)});
        }
    }
    return r;
}

} // namespace

void validate_record(QuestionRecord& record, const std::string& context,
                     std::vector<std::string>& warnings) {
    if (record.options.empty()) schema_fail(context, "options", "must be non-empty");
    if (record.answer_index < 0 ||
        record.answer_index >= static_cast<int>(record.options.size())) {
        schema_fail(context, "answer_index",
                    "value " + std::to_string(record.answer_index) + " outside [0, " +
                        std::to_string(record.options.size()) + ")");
    }
    if (!(record.duration_s > 0.0)) {
        schema_fail(context, "duration_s", "must be positive");
    }
    for (std::size_t i = 0; i < record.gt_spans.size(); ++i) {
        TimeInterval& span = record.gt_spans[i];
        const TimeInterval original = span;
        span.t_start = std::clamp(span.t_start, 0.0, record.duration_s);
        span.t_end = std::clamp(span.t_end, 0.0, record.duration_s);
        if (!span.valid()) {
            schema_fail(context, "gt_spans[" + std::to_string(i) + "]",
                        "start exceeds end after clamping");
        }
        if (span.t_start != original.t_start || span.t_end != original.t_end) {
            warnings.push_back(context + ": gt_spans[" + std::to_string(i) + "] [" +
                               std::to_string(original.t_start) + ", " +
                               std::to_string(original.t_end) + "] clamped to [" +
                               std::to_string(span.t_start) + ", " +
                               std::to_string(span.t_end) + "]");
        }
    }
}

IngestResult ingest_dataset(const std::filesystem::path& path) {
    IngestResult out;
    std::unordered_set<std::string> seen_ids;
    for_each_line(path, [&](std::size_t lineno, const std::string& line) {
        const std::string context = path.filename().string() + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw parse_error(context + ": " + e.what());
        }
        QuestionRecord r = record_from_json(j, context);
        if (!seen_ids.insert(r.question_id).second) {
            throw schema_error(context + ": duplicate question_id '" + r.question_id + "'");
        }
        validate_record(r, context, out.warnings);
        out.records.push_back(std::move(r));
    });
    return out;
}

} // namespace leadqa
