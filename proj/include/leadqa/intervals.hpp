#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace leadqa {

/// Closed time segment [t_start, t_end] in seconds. Zero-length intervals are
/// allowed; ratio operations (iou/iop) reject the degenerate cases where the
/// ratio would be 0/0.
struct TimeInterval {
    double t_start = 0.0;
    double t_end = 0.0;

    double length() const { return t_end - t_start; }
    bool valid() const;
    bool contains(const TimeInterval& other) const {
        return t_start <= other.t_start && other.t_end <= t_end;
    }
    friend bool operator==(const TimeInterval& a, const TimeInterval& b) = default;
};

/// A scored candidate interval for one question option. `rank` is the
/// position in its source top-K list.
struct GroundedProposal {
    TimeInterval interval;
    double score = 0.0;       // in [0,1]
    int option_index = 0;
    int rank = 0;
};

struct FusionConfig {
    double tau_intra = 0.3;
    double tau_inter = 0.3;   // defaults to tau_intra's value when configured together
    int top_k = 5;
    double nms_threshold = 0.7;
};

/// Overlap length in seconds: max(0, min(a.e, b.e) - max(a.s, b.s)).
double overlap(const TimeInterval& a, const TimeInterval& b);

/// Intersection over union. Throws degenerate_input_error when the union has
/// zero length (two identical zero-length intervals).
double iou(const TimeInterval& a, const TimeInterval& b);

/// Intersection over prediction length; 1 exactly when pred is contained in
/// gt. Throws degenerate_input_error when pred has zero length.
double iop(const TimeInterval& pred, const TimeInterval& gt);

/// Merge rule: if iou(a,b) >= tau the pair collapses to its hull
/// [min(s), max(e)], otherwise both inputs pass through unchanged.
std::variant<TimeInterval, std::pair<TimeInterval, TimeInterval>>
merge_pair(const TimeInterval& a, const TimeInterval& b, double tau);

/// Deterministic fixpoint of the merge rule over a set of intervals.
///
/// Canonical order: intervals are kept sorted by (t_start, t_end); each pass
/// scans ordered pairs lexicographically and merges the first pair whose IoU
/// reaches tau (identical zero-length duplicates collapse unconditionally),
/// then restarts. At the fixpoint every remaining pair has IoU < tau. Output
/// is sorted by t_start.
std::vector<TimeInterval> fuse_intervals(const std::vector<TimeInterval>& items, double tau);

/// Greedy non-maximum suppression: repeatedly keep the highest-score proposal
/// and drop the remaining ones whose IoU with it reaches `threshold`. Score
/// ties break by earlier t_start, then shorter length. Output is sorted by
/// descending score under the same tie order.
std::vector<GroundedProposal> nms(const std::vector<GroundedProposal>& proposals,
                                  double threshold);

/// A fused interval with its diagnostics: the max constituent proposal score
/// and the set of options that contributed.
struct FusedInterval {
    TimeInterval interval;
    double score = 0.0;
    std::vector<int> options;
};

/// Two-stage fusion for one question: per-option fusion with tau_intra, then
/// all surviving segments pooled and fused with tau_inter. Returns the fused
/// intervals sorted by t_start.
std::vector<TimeInterval> fuse_question(const std::vector<std::vector<GroundedProposal>>& per_option,
                                        const FusionConfig& cfg);

/// Same as fuse_question but keeps the internal score (max over merged
/// constituents) and option provenance per fused interval.
std::vector<FusedInterval> fuse_question_scored(const std::vector<std::vector<GroundedProposal>>& per_option,
                                                const FusionConfig& cfg);

} // namespace leadqa
