#pragma once

#include "leadqa/intervals.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace leadqa {

/// Per-clip model outputs consumed by the losses (and produced by the
/// grounding model's prediction heads).
struct ClipPrediction {
    double foreground = 0.0;   // f̃ in [0,1]
    double offset_start = 0.0; // d̃ˢ ≤ 0, seconds relative to the clip center
    double offset_end = 0.0;   // d̃ᵉ ≥ 0
    double saliency = 0.0;     // s̃ in [0,1]
};

/// Per-clip supervision. Offsets are only meaningful when
/// foreground_label = 1; target_interval = [center + dˢ, center + dᵉ].
struct ClipTarget {
    int foreground_label = 0; // {0,1}
    double offset_start = 0.0;
    double offset_end = 0.0;
    TimeInterval target_interval;
};

struct LossWeights {
    double lambda_f = 1.0;
    double lambda_l1 = 1.0;
    double lambda_iou = 1.0;
    double lambda_inter = 1.0;
    double lambda_intra = 1.0;
    double smooth_l1_beta = 1.0;
    double contrastive_temperature = 0.07;
};

/// Binary cross-entropy on the foreground probability. The prediction is
/// clamped to [1e-7, 1-1e-7] before logs so saturated inputs stay finite.
/// Returns (loss, d loss / d f_pred).
std::pair<double, double> loss_foreground(double f_pred, int f_label, double lambda_f);

/// Huber-style smooth L1 on x = pred - target: 0.5 x^2 / beta for |x| < beta,
/// |x| - beta/2 otherwise. Returns (loss, d loss / d pred). Kink at |x| = beta.
std::pair<double, double> smooth_l1(double pred, double target, double beta);

/// 1-D interval overlap loss, value = 1 - IoU (IoU clamped at 0, so the loss
/// is exactly 1 for disjoint intervals and stays in [0,1]).
///
/// The reported subgradient is the derivative of the signed-gap extension
/// 1 - I_s/U_s with I_s = min(e,gᵉ) - max(s,gˢ) left unclamped and
/// U_s = len(pred) + len(target) - I_s. It coincides with the true gradient
/// whenever the intervals overlap; when they are disjoint it still pulls the
/// gap-facing endpoint toward the target (and lengthens the prediction from
/// the far side). Kinks: touching intervals (I_s = 0) and endpoint ties.
/// Returns (loss, {d/ds, d/de}).
std::pair<double, std::pair<double, double>> loss_iou_1d(const TimeInterval& pred,
                                                         const TimeInterval& target);

struct BoundaryResult {
    double loss = 0.0;
    double d_offset_start = 0.0;
    double d_offset_end = 0.0;
};

/// Indicator-gated boundary loss: 0 for background clips, otherwise
/// lambda_l1 * (smooth_l1 on both offsets) + lambda_iou * loss_iou_1d on the
/// intervals derived via b = clip_center + offsets. Gradients are w.r.t. the
/// predicted offsets (d b / d offset = 1, so the chain is direct).
BoundaryResult loss_boundary(const ClipPrediction& pred, const ClipTarget& target,
                             double clip_center, const LossWeights& w);

struct SaliencyResult {
    double loss = 0.0;
    std::vector<double> d_scores; // same length as sal_scores
    std::vector<double> d_cross;  // same length as cross_video_scores
};

/// Temperature-scaled contrastive saliency loss, sum-over-positives form:
///   term(P, A) = -log( sum_{p in P} e^{s_p/T} / sum_{a in A} e^{s_a/T} )
/// intra: P = foreground clips, A = all clips of this video;
/// inter: P = the same positives, A = P plus the cross-video distractor
/// scores. Total = lambda_intra * intra + lambda_inter * inter; an empty
/// distractor list drops the inter term. The sum form makes the loss
/// strictly decreasing in every positive score whenever any negative exists.
/// Throws no_positive_error when pos_mask has no positive.
SaliencyResult loss_saliency(const std::vector<double>& sal_scores,
                             const std::vector<bool>& pos_mask,
                             const std::vector<double>& cross_video_scores,
                             const LossWeights& w);

/// Mean over clips of the three per-clip loss components:
/// (1/N) * sum_i (lf[i] + lb[i] + ls[i]).
double loss_total(const std::vector<double>& lf, const std::vector<double>& lb,
                  const std::vector<double>& ls);

/// Central-difference gradient check. `fn` maps a point to (value, analytic
/// gradient); returns max_i |fd_i - an_i| / max(1, |an_i|). The caller picks
/// points away from the documented kinks.
double finite_diff_check(
    const std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>& fn,
    const std::vector<double>& point, double epsilon);

} // namespace leadqa
