#include "leadqa/intervals.hpp"

#include "leadqa/errors.hpp"

#include <algorithm>
#include <cmath>

namespace leadqa {

bool TimeInterval::valid() const {
    return std::isfinite(t_start) && std::isfinite(t_end) && t_start <= t_end;
}

double overlap(const TimeInterval& a, const TimeInterval& b) {
    return std::max(0.0, std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start));
}

double iou(const TimeInterval& a, const TimeInterval& b) {
    const double inter = overlap(a, b);
    const double uni = a.length() + b.length() - inter;
    if (uni <= 0.0) {
        throw degenerate_input_error("iou: union has zero length");
    }
    return inter / uni;
}

double iop(const TimeInterval& pred, const TimeInterval& gt) {
    if (pred.length() <= 0.0) {
        throw degenerate_input_error("iop: prediction has zero length");
    }
    return overlap(pred, gt) / pred.length();
}

namespace {

TimeInterval hull(const TimeInterval& a, const TimeInterval& b) {
    return {std::min(a.t_start, b.t_start), std::max(a.t_end, b.t_end)};
}

// Total merge predicate used inside fusion and NMS: identical zero-length
// intervals (undefined IoU) count as fully overlapping.
bool merges_at(const TimeInterval& a, const TimeInterval& b, double tau) {
    const double inter = overlap(a, b);
    const double uni = a.length() + b.length() - inter;
    if (uni <= 0.0) {
        return true;
    }
    return inter / uni >= tau;
}

bool start_end_less(const TimeInterval& a, const TimeInterval& b) {
    if (a.t_start != b.t_start) {
        return a.t_start < b.t_start;
    }
    return a.t_end < b.t_end;
}

} // namespace

std::variant<TimeInterval, std::pair<TimeInterval, TimeInterval>>
merge_pair(const TimeInterval& a, const TimeInterval& b, double tau) {
    if (iou(a, b) >= tau) {
        return hull(a, b);
    }
    return std::make_pair(a, b);
}

std::vector<TimeInterval> fuse_intervals(const std::vector<TimeInterval>& items, double tau) {
    std::vector<TimeInterval> out = items;
    std::sort(out.begin(), out.end(), start_end_less);
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i + 1 < out.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < out.size() && !merged; ++j) {
                if (merges_at(out[i], out[j], tau)) {
                    TimeInterval h = hull(out[i], out[j]);
                    out.erase(out.begin() + static_cast<std::ptrdiff_t>(j));
                    out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
                    out.insert(std::upper_bound(out.begin(), out.end(), h, start_end_less), h);
                    merged = true;
                }
            }
        }
    }
    return out;
}

namespace {

// Score-descending NMS order; ties by earlier start, then shorter length.
bool nms_order(const GroundedProposal& a, const GroundedProposal& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    if (a.interval.t_start != b.interval.t_start) {
        return a.interval.t_start < b.interval.t_start;
    }
    return a.interval.length() < b.interval.length();
}

} // namespace

std::vector<GroundedProposal> nms(const std::vector<GroundedProposal>& proposals,
                                  double threshold) {
    std::vector<GroundedProposal> pending = proposals;
    std::stable_sort(pending.begin(), pending.end(), nms_order);
    std::vector<GroundedProposal> kept;
    std::vector<bool> suppressed(pending.size(), false);
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (suppressed[i]) {
            continue;
        }
        kept.push_back(pending[i]);
        for (std::size_t j = i + 1; j < pending.size(); ++j) {
            if (!suppressed[j] && merges_at(pending[i].interval, pending[j].interval, threshold)) {
                suppressed[j] = true;
            }
        }
    }
    return kept;
}

namespace {

bool fused_order(const FusedInterval& a, const FusedInterval& b) {
    return start_end_less(a.interval, b.interval);
}

// Same canonical fixpoint as fuse_intervals, but merging metadata along the
// lineage: score = max of constituents, options = union.
std::vector<FusedInterval> fuse_with_metadata(std::vector<FusedInterval> items, double tau) {
    std::stable_sort(items.begin(), items.end(), fused_order);
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i + 1 < items.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < items.size() && !merged; ++j) {
                if (merges_at(items[i].interval, items[j].interval, tau)) {
                    FusedInterval h;
                    h.interval = hull(items[i].interval, items[j].interval);
                    h.score = std::max(items[i].score, items[j].score);
                    h.options = items[i].options;
                    h.options.insert(h.options.end(), items[j].options.begin(),
                                     items[j].options.end());
                    std::sort(h.options.begin(), h.options.end());
                    h.options.erase(std::unique(h.options.begin(), h.options.end()),
                                    h.options.end());
                    items.erase(items.begin() + static_cast<std::ptrdiff_t>(j));
                    items.erase(items.begin() + static_cast<std::ptrdiff_t>(i));
                    items.insert(std::upper_bound(items.begin(), items.end(), h, fused_order),
                                 std::move(h));
                    merged = true;
                }
            }
        }
    }
    return items;
}

} // namespace

std::vector<FusedInterval> fuse_question_scored(const std::vector<std::vector<GroundedProposal>>& per_option,
                                                const FusionConfig& cfg) {
    // Stage 1: per-option fusion, carrying scores and provenance along.
    std::vector<FusedInterval> pool;
    for (const auto& option_list : per_option) {
        std::vector<FusedInterval> items;
        items.reserve(option_list.size());
        for (const auto& p : option_list) {
            items.push_back({p.interval, p.score, {p.option_index}});
        }
        for (auto& fi : fuse_with_metadata(std::move(items), cfg.tau_intra)) {
            pool.push_back(std::move(fi));
        }
    }
    // Stage 2: pool everything and fuse across options.
    return fuse_with_metadata(std::move(pool), cfg.tau_inter);
}

std::vector<TimeInterval> fuse_question(const std::vector<std::vector<GroundedProposal>>& per_option,
                                        const FusionConfig& cfg) {
    std::vector<TimeInterval> out;
    for (const auto& fi : fuse_question_scored(per_option, cfg)) {
        out.push_back(fi.interval);
    }
    return out;
}

} // namespace leadqa
