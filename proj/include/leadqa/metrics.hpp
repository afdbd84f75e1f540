#pragma once

#include "leadqa/intervals.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace leadqa {

/// Question categories used for the per-type accuracy breakdown.
enum class question_type { Tem, Cau, Des, CW, CH };

std::string to_string(question_type t);
question_type question_type_from_string(const std::string& s); // throws schema_error

/// Per-question scoring outcome. Grounding fields (iop/iou) are 0 when no
/// interval was predicted; `annotated()` distinguishes questions that carry
/// ground-truth spans from those that only contribute to answer accuracy.
struct QuestionResult {
    std::string question_id;
    question_type type = question_type::Cau;
    int predicted_answer = 0;
    bool correct = false;
    std::optional<TimeInterval> pred_interval;
    std::vector<TimeInterval> gt_spans;
    double iop = 0.0;
    double iou = 0.0;

    bool annotated() const { return !gt_spans.empty(); }
};

/// Corpus-level evaluation summary.
///
/// Denominators: acc_qa and acc_gqa divide by ALL questions (required for
/// acc_gqa <= acc_qa to hold on partially annotated corpora); the grounding
/// means and threshold rates divide by the annotated count only, and are 0
/// when nothing is annotated.
struct EvalReport {
    double acc_qa = 0.0;
    double acc_gqa = 0.0;
    double miop = 0.0;
    double miou = 0.0;
    std::map<double, double> iop_at; // thresholds 0.3, 0.5
    std::map<double, double> iou_at;
    std::map<question_type, double> per_type;
    int n_questions = 0;
    int n_annotated = 0;
};

/// Score one question: iop/iou are the max over ground-truth spans; absent or
/// zero-length predictions score 0 by convention. The caller fills in
/// question_id/type on the returned value.
QuestionResult score_question(const std::optional<TimeInterval>& pred_interval,
                              const std::vector<TimeInterval>& gt_spans,
                              int predicted_answer, int gt_answer);

/// Aggregate per-question results into an EvalReport. Throws
/// empty_input_error on an empty list.
EvalReport aggregate(const std::vector<QuestionResult>& results);

/// Per-question rows as CSV with a stable column order:
/// question_id,type,correct,iop,iou. Numbers use shortest round-trip
/// formatting so reruns are byte-identical.
std::string results_to_csv(const std::vector<QuestionResult>& results);

} // namespace leadqa
