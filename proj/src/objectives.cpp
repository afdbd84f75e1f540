#include "leadqa/objectives.hpp"

#include "leadqa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace leadqa {

namespace {

constexpr double kProbEps = 1e-7;

// Stable log-sum-exp over scores/T for an index subset selected by `take`.
// Returns log(sum e^{s/T}) and leaves the per-element softmax weights in
// `weights` (zero where not taken).
template <typename Pred>
double log_sum_exp(const std::vector<double>& scores, double temperature, Pred take,
                   std::vector<double>* weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (take(i)) m = std::max(m, scores[i] / temperature);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (take(i)) z += std::exp(scores[i] / temperature - m);
    }
    if (weights) {
        weights->assign(scores.size(), 0.0);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (take(i)) (*weights)[i] = std::exp(scores[i] / temperature - m) / z;
        }
    }
    return m + std::log(z);
}

} // namespace

std::pair<double, double> loss_foreground(double f_pred, int f_label, double lambda_f) {
    double f = std::clamp(f_pred, kProbEps, 1.0 - kProbEps);
    double label = f_label != 0 ? 1.0 : 0.0;
    double loss = -lambda_f * (label * std::log(f) + (1.0 - label) * std::log(1.0 - f));
    double grad = -lambda_f * (label / f - (1.0 - label) / (1.0 - f));
    return {loss, grad};
}

std::pair<double, double> smooth_l1(double pred, double target, double beta) {
    double x = pred - target;
    if (std::abs(x) < beta) {
        return {0.5 * x * x / beta, x / beta};
    }
    return {std::abs(x) - 0.5 * beta, x > 0 ? 1.0 : -1.0};
}

std::pair<double, std::pair<double, double>> loss_iou_1d(const TimeInterval& pred,
                                                         const TimeInterval& target) {
    if (pred.length() <= 0.0 || target.length() <= 0.0) {
        throw degenerate_input_error("loss_iou_1d: zero-length interval");
    }
    const double s = pred.t_start, e = pred.t_end;
    const double gs = target.t_start, ge = target.t_end;

    // Signed intersection: negative when disjoint (minus the gap length).
    const double i_signed = std::min(e, ge) - std::max(s, gs);
    const double u_signed = pred.length() + target.length() - i_signed;

    const double loss = 1.0 - std::max(0.0, i_signed) /
                                  (pred.length() + target.length() - std::max(0.0, i_signed));

    // d/ds, d/de of 1 - I_s/U_s via the quotient rule.
    const double di_ds = s > gs ? -1.0 : 0.0;
    const double di_de = e < ge ? 1.0 : 0.0;
    const double du_ds = -1.0 - di_ds;
    const double du_de = 1.0 - di_de;
    const double d_ds = -(di_ds * u_signed - i_signed * du_ds) / (u_signed * u_signed);
    const double d_de = -(di_de * u_signed - i_signed * du_de) / (u_signed * u_signed);
    return {loss, {d_ds, d_de}};
}

BoundaryResult loss_boundary(const ClipPrediction& pred, const ClipTarget& target,
                             double clip_center, const LossWeights& w) {
    BoundaryResult out;
    if (target.foreground_label == 0) {
        return out; // indicator gate: background clips contribute nothing
    }
    auto [l1s, g1s] = smooth_l1(pred.offset_start, target.offset_start, w.smooth_l1_beta);
    auto [l1e, g1e] = smooth_l1(pred.offset_end, target.offset_end, w.smooth_l1_beta);

    TimeInterval b_pred{clip_center + pred.offset_start, clip_center + pred.offset_end};
    TimeInterval b_gt{clip_center + target.offset_start, clip_center + target.offset_end};
    auto [liou, giou] = loss_iou_1d(b_pred, b_gt);

    out.loss = w.lambda_l1 * (l1s + l1e) + w.lambda_iou * liou;
    out.d_offset_start = w.lambda_l1 * g1s + w.lambda_iou * giou.first;
    out.d_offset_end = w.lambda_l1 * g1e + w.lambda_iou * giou.second;
    return out;
}

SaliencyResult loss_saliency(const std::vector<double>& sal_scores,
                             const std::vector<bool>& pos_mask,
                             const std::vector<double>& cross_video_scores,
                             const LossWeights& w) {
    if (pos_mask.size() != sal_scores.size()) {
        throw dimension_error("loss_saliency: pos_mask size " + std::to_string(pos_mask.size()) +
                              " != scores size " + std::to_string(sal_scores.size()));
    }
    bool any_pos = std::find(pos_mask.begin(), pos_mask.end(), true) != pos_mask.end();
    if (!any_pos) {
        throw no_positive_error("loss_saliency: no positive clip in pos_mask");
    }
    const double T = w.contrastive_temperature;
    SaliencyResult out;
    out.d_scores.assign(sal_scores.size(), 0.0);
    out.d_cross.assign(cross_video_scores.size(), 0.0);

    // ---- intra: positives vs all clips of this video ----
    std::vector<double> soft_all, soft_pos;
    double lse_all = log_sum_exp(sal_scores, T, [](std::size_t) { return true; }, &soft_all);
    double lse_pos =
        log_sum_exp(sal_scores, T, [&](std::size_t i) { return bool(pos_mask[i]); }, &soft_pos);
    double intra = lse_all - lse_pos; // = -log(sum_pos / sum_all)
    for (std::size_t i = 0; i < sal_scores.size(); ++i) {
        out.d_scores[i] += w.lambda_intra * ((soft_all[i] - soft_pos[i]) / T);
    }

    // ---- inter: the same positives vs positives + cross-video distractors ----
    double inter = 0.0;
    if (!cross_video_scores.empty()) {
        std::vector<double> joint;
        std::vector<std::size_t> joint_src; // index into sal_scores, or npos for cross
        constexpr std::size_t npos = static_cast<std::size_t>(-1);
        for (std::size_t i = 0; i < sal_scores.size(); ++i) {
            if (pos_mask[i]) {
                joint.push_back(sal_scores[i]);
                joint_src.push_back(i);
            }
        }
        std::size_t n_pos = joint.size();
        for (double c : cross_video_scores) {
            joint.push_back(c);
            joint_src.push_back(npos);
        }
        std::vector<double> soft_joint, soft_jpos;
        double lse_jall = log_sum_exp(joint, T, [](std::size_t) { return true; }, &soft_joint);
        double lse_jpos =
            log_sum_exp(joint, T, [&](std::size_t i) { return i < n_pos; }, &soft_jpos);
        inter = lse_jall - lse_jpos;
        for (std::size_t j = 0; j < joint.size(); ++j) {
            double g = w.lambda_inter * ((soft_joint[j] - soft_jpos[j]) / T);
            if (joint_src[j] == npos) {
                out.d_cross[j - n_pos] += g;
            } else {
                out.d_scores[joint_src[j]] += g;
            }
        }
    }

    out.loss = w.lambda_intra * intra + w.lambda_inter * inter;
    return out;
}

double loss_total(const std::vector<double>& lf, const std::vector<double>& lb,
                  const std::vector<double>& ls) {
    if (lf.empty()) {
        throw empty_input_error("loss_total: no clips");
    }
    if (lb.size() != lf.size() || ls.size() != lf.size()) {
        throw dimension_error("loss_total: component lists must have equal length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < lf.size(); ++i) {
        sum += lf[i] + lb[i] + ls[i];
    }
    return sum / static_cast<double>(lf.size());
}

double finite_diff_check(
    const std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>& fn,
    const std::vector<double>& point, double epsilon) {
    auto [value, analytic] = fn(point);
    (void)value;
    double worst = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        std::vector<double> hi = point, lo = point;
        hi[i] += epsilon;
        lo[i] -= epsilon;
        double fd = (fn(hi).first - fn(lo).first) / (2.0 * epsilon);
        double rel = std::abs(fd - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace leadqa
