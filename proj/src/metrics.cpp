#include "leadqa/metrics.hpp"

#include "leadqa/errors.hpp"

#include <array>
#include <charconv>
#include <cstddef>

namespace leadqa {

namespace {

constexpr std::array<std::pair<question_type, const char*>, 5> kTypeNames = {{
    {question_type::Tem, "Tem"},
    {question_type::Cau, "Cau"},
    {question_type::Des, "Des"},
    {question_type::CW, "CW"},
    {question_type::CH, "CH"},
}};

// Shortest round-trip decimal for a double, for reproducible CSV bytes.
std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

std::string to_string(question_type t) {
    for (const auto& [val, name] : kTypeNames) {
        if (val == t) return name;
    }
    return "Cau";
}

question_type question_type_from_string(const std::string& s) {
    for (const auto& [val, name] : kTypeNames) {
        if (s == name) return val;
    }
    throw schema_error("unknown question type: '" + s + "'");
}

QuestionResult score_question(const std::optional<TimeInterval>& pred_interval,
                              const std::vector<TimeInterval>& gt_spans,
                              int predicted_answer, int gt_answer) {
    QuestionResult r;
    r.predicted_answer = predicted_answer;
    r.correct = predicted_answer == gt_answer;
    r.pred_interval = pred_interval;
    r.gt_spans = gt_spans;
    if (!pred_interval.has_value() || pred_interval->length() <= 0.0) {
        return r; // iop = iou = 0 by convention
    }
    for (const TimeInterval& span : gt_spans) {
        double ov = overlap(*pred_interval, span);
        double un = pred_interval->length() + span.length() - ov;
        if (un > 0.0) r.iou = std::max(r.iou, ov / un);
        r.iop = std::max(r.iop, ov / pred_interval->length());
    }
    return r;
}

EvalReport aggregate(const std::vector<QuestionResult>& results) {
    if (results.empty()) {
        throw empty_input_error("aggregate: no question results");
    }
    EvalReport rep;
    rep.n_questions = static_cast<int>(results.size());

    int n_correct = 0;
    int n_grounded_correct = 0;
    int n_annotated = 0;
    double sum_iop = 0.0;
    double sum_iou = 0.0;
    const std::array<double, 2> thresholds = {0.3, 0.5};
    std::map<double, int> iop_counts;
    std::map<double, int> iou_counts;
    std::map<question_type, std::pair<int, int>> per_type; // correct, total

    for (const QuestionResult& r : results) {
        n_correct += r.correct ? 1 : 0;
        auto& [type_correct, type_total] = per_type[r.type];
        type_correct += r.correct ? 1 : 0;
        type_total += 1;
        if (!r.annotated()) continue;
        n_annotated += 1;
        sum_iop += r.iop;
        sum_iou += r.iou;
        if (r.correct && r.iop >= 0.5) n_grounded_correct += 1;
        for (double th : thresholds) {
            if (r.iop >= th) iop_counts[th] += 1;
            if (r.iou >= th) iou_counts[th] += 1;
        }
    }

    const double n_all = static_cast<double>(rep.n_questions);
    rep.acc_qa = static_cast<double>(n_correct) / n_all;
    rep.acc_gqa = static_cast<double>(n_grounded_correct) / n_all;
    rep.n_annotated = n_annotated;
    if (n_annotated > 0) {
        const double n_ann = static_cast<double>(n_annotated);
        rep.miop = sum_iop / n_ann;
        rep.miou = sum_iou / n_ann;
        for (double th : thresholds) {
            rep.iop_at[th] = static_cast<double>(iop_counts[th]) / n_ann;
            rep.iou_at[th] = static_cast<double>(iou_counts[th]) / n_ann;
        }
    } else {
        for (double th : thresholds) {
            rep.iop_at[th] = 0.0;
            rep.iou_at[th] = 0.0;
        }
    }
    for (const auto& [type, counts] : per_type) {
        rep.per_type[type] =
            static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return rep;
}

std::string results_to_csv(const std::vector<QuestionResult>& results) {
    std::string out = "question_id,type,correct,iop,iou\n";
    for (const QuestionResult& r : results) {
        out += r.question_id;
        out += ',';
        out += to_string(r.type);
        out += ',';
        out += r.correct ? '1' : '0';
        out += ',';
        out += format_double(r.iop);
        out += ',';
        out += format_double(r.iou);
        out += '\n';
    }
    return out;
}

} // namespace leadqa
