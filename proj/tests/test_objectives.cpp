#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "leadqa/errors.hpp"
#include "leadqa/objectives.hpp"
#include "leadqa/rng.hpp"

#include <cmath>
#include <random>
#include <vector>

using leadqa::ClipPrediction;
using leadqa::ClipTarget;
using leadqa::LossWeights;
using leadqa::TimeInterval;

namespace {

TimeInterval iv(double s, double e) { return TimeInterval{s, e}; }

// Adapters exposing each loss as point -> (value, gradient) for the checker.
std::pair<double, std::vector<double>> fg_fn(const std::vector<double>& p, int label,
                                             double lambda) {
    auto [l, g] = leadqa::loss_foreground(p[0], label, lambda);
    return {l, {g}};
}

std::pair<double, std::vector<double>> sl1_fn(const std::vector<double>& p, double target,
                                              double beta) {
    auto [l, g] = leadqa::smooth_l1(p[0], target, beta);
    return {l, {g}};
}

std::pair<double, std::vector<double>> iou_fn(const std::vector<double>& p,
                                              const TimeInterval& target) {
    auto [l, g] = leadqa::loss_iou_1d(iv(p[0], p[1]), target);
    return {l, {g.first, g.second}};
}

} // namespace

TEST_CASE("foreground BCE closed forms") {
    auto [l_perfect, g_perfect] = leadqa::loss_foreground(1.0 - 1e-9, 1, 1.0);
    CHECK(l_perfect == doctest::Approx(0.0).epsilon(1e-6));
    (void)g_perfect;

    auto [l_half1, g_half1] = leadqa::loss_foreground(0.5, 1, 1.0);
    CHECK(l_half1 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(g_half1 == doctest::Approx(-2.0).epsilon(1e-12));

    auto [l_half0, g_half0] = leadqa::loss_foreground(0.5, 0, 1.0);
    CHECK(l_half0 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(g_half0 == doctest::Approx(2.0).epsilon(1e-12));

    // clamping keeps saturated predictions finite
    auto [l_sat, g_sat] = leadqa::loss_foreground(0.0, 1, 1.0);
    CHECK(std::isfinite(l_sat));
    CHECK(std::isfinite(g_sat));
    CHECK(l_sat > 0.0);
}

TEST_CASE("foreground BCE scales exactly with lambda") {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 100; ++i) {
        double f = leadqa::uniform(gen, 0.05, 0.95);
        int label = static_cast<int>(gen() % 2);
        double c = leadqa::uniform(gen, 0.1, 5.0);
        auto [l1, g1] = leadqa::loss_foreground(f, label, 1.0);
        auto [lc, gc] = leadqa::loss_foreground(f, label, c);
        CHECK(lc == c * l1);
        CHECK(gc == c * g1);
    }
}

TEST_CASE("smooth L1 closed forms") {
    auto [l0, g0] = leadqa::smooth_l1(3.0, 3.0, 1.0);
    CHECK(l0 == 0.0);
    CHECK(g0 == 0.0);

    auto [lq, gq] = leadqa::smooth_l1(0.5, 0.0, 1.0);
    CHECK(lq == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(gq == doctest::Approx(0.5).epsilon(1e-12));

    auto [ll, gl] = leadqa::smooth_l1(2.0, 0.0, 1.0);
    CHECK(ll == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(gl == doctest::Approx(1.0).epsilon(1e-12));

    // negative branch mirrors
    auto [ln, gn] = leadqa::smooth_l1(-2.0, 0.0, 1.0);
    CHECK(ln == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(gn == doctest::Approx(-1.0).epsilon(1e-12));

    // value is continuous across the kink |x| = beta
    auto just_in = leadqa::smooth_l1(0.999999, 0.0, 1.0).first;
    auto just_out = leadqa::smooth_l1(1.000001, 0.0, 1.0).first;
    CHECK(just_in == doctest::Approx(just_out).epsilon(1e-5));
}

TEST_CASE("1-D IoU loss closed forms") {
    auto [l_same, g_same] = leadqa::loss_iou_1d(iv(5, 15), iv(5, 15));
    CHECK(l_same == doctest::Approx(0.0).epsilon(1e-12));
    (void)g_same;

    auto [l, g] = leadqa::loss_iou_1d(iv(0, 10), iv(5, 15));
    CHECK(l == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(g.first == doctest::Approx(-1.0 / 45.0).epsilon(1e-12));
    CHECK(g.second == doctest::Approx(-1.0 / 15.0).epsilon(1e-12));

    // disjoint, prediction left of target: loss saturates at 1 and the
    // gap-facing endpoint (t_end) is pulled toward the target
    auto [l_dis, g_dis] = leadqa::loss_iou_1d(iv(0, 1), iv(2, 3));
    CHECK(l_dis == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g_dis.second == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(g_dis.second < 0.0);
    CHECK(g_dis.first == doctest::Approx(1.0 / 9.0).epsilon(1e-12));

    // mirrored: prediction right of target pulls t_start down
    auto [l_mir, g_mir] = leadqa::loss_iou_1d(iv(4, 5), iv(2, 3));
    CHECK(l_mir == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g_mir.first > 0.0);

    CHECK_THROWS_AS((void)leadqa::loss_iou_1d(iv(3, 3), iv(0, 1)),
                    leadqa::degenerate_input_error);
    CHECK_THROWS_AS((void)leadqa::loss_iou_1d(iv(0, 1), iv(3, 3)),
                    leadqa::degenerate_input_error);
}

TEST_CASE("boundary loss gate and fixture") {
    LossWeights w;
    ClipPrediction pred;
    pred.offset_start = -1.5;
    pred.offset_end = 2.5;

    ClipTarget background;
    background.foreground_label = 0;
    auto gated = leadqa::loss_boundary(pred, background, 5.0, w);
    CHECK(gated.loss == 0.0);
    CHECK(gated.d_offset_start == 0.0);
    CHECK(gated.d_offset_end == 0.0);

    // exact offsets: both terms vanish
    ClipTarget exact;
    exact.foreground_label = 1;
    exact.offset_start = -1.5;
    exact.offset_end = 2.5;
    auto zero = leadqa::loss_boundary(pred, exact, 5.0, w);
    CHECK(zero.loss == doctest::Approx(0.0).epsilon(1e-12));

    // offsets off by (+0.5, -0.5) against target (-2, +3) at center 5:
    // smooth-L1 0.125 + 0.125, IoU([3.5,7.5],[3,8]) = 4/5 -> 0.2; total 0.45
    ClipTarget target;
    target.foreground_label = 1;
    target.offset_start = -2.0;
    target.offset_end = 3.0;
    target.target_interval = iv(3, 8);
    auto fix = leadqa::loss_boundary(pred, target, 5.0, w);
    CHECK(fix.loss == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(fix.d_offset_start == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(fix.d_offset_end == doctest::Approx(-0.7).epsilon(1e-12));
}

TEST_CASE("saliency loss closed forms") {
    LossWeights w;
    w.contrastive_temperature = 1.0;

    // all-equal scores, 1 positive among M=4 in-video candidates, plus 3
    // equal cross-video distractors -> ln 4 both terms
    std::vector<double> scores = {0.3, 0.3, 0.3, 0.3};
    std::vector<bool> mask = {true, false, false, false};
    std::vector<double> cross = {0.3, 0.3, 0.3};
    auto r = leadqa::loss_saliency(scores, mask, cross, w);
    CHECK(r.loss == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));

    // frozen fixture: intra over (0.9, 0.1, 0.1), positive first, T=1
    std::vector<double> fix_scores = {0.9, 0.1, 0.1};
    std::vector<bool> fix_mask = {true, false, false};
    LossWeights intra_only = w;
    intra_only.lambda_inter = 0.0;
    auto fix = leadqa::loss_saliency(fix_scores, fix_mask, {}, intra_only);
    CHECK(fix.loss == doctest::Approx(0.64114728302636177).epsilon(1e-12));
    CHECK(fix.d_scores[0] == doctest::Approx(-0.47331218271113361).epsilon(1e-12));
    CHECK(fix.d_scores[1] == doctest::Approx(0.23665609135556681).epsilon(1e-12));
    CHECK(fix.d_scores[2] == doctest::Approx(0.23665609135556681).epsilon(1e-12));

    // the same numbers arise as an inter term: one positive 0.9 against
    // cross-video distractors (0.1, 0.1)
    LossWeights inter_only = w;
    inter_only.lambda_intra = 0.0;
    auto fix_inter = leadqa::loss_saliency({0.9}, {true}, {0.1, 0.1}, inter_only);
    CHECK(fix_inter.loss == doctest::Approx(0.64114728302636177).epsilon(1e-12));
    CHECK(fix_inter.d_scores[0] == doctest::Approx(-0.47331218271113361).epsilon(1e-12));
    CHECK(fix_inter.d_cross[0] == doctest::Approx(0.23665609135556681).epsilon(1e-12));

    // saturation: a dominant positive drives the loss toward 0
    auto sat = leadqa::loss_saliency({10.3, 0.3, 0.3}, {true, false, false}, {0.3}, w);
    CHECK(sat.loss < 1e-3);

    // empty distractor list drops the inter term entirely
    auto no_cross = leadqa::loss_saliency(fix_scores, fix_mask, {}, w);
    CHECK(no_cross.loss == doctest::Approx(fix.loss).epsilon(1e-12));
    CHECK(no_cross.d_cross.empty());
}

TEST_CASE("saliency loss error paths") {
    LossWeights w;
    CHECK_THROWS_AS((void)leadqa::loss_saliency({0.1, 0.2}, {false, false}, {}, w),
                    leadqa::no_positive_error);
    CHECK_THROWS_AS((void)leadqa::loss_saliency({0.1, 0.2}, {true}, {}, w),
                    leadqa::dimension_error);
}

TEST_CASE("saliency loss decreases strictly as a positive score rises") {
    LossWeights w; // default temperature 0.07
    std::vector<bool> mask = {true, true, false, false};
    std::vector<double> cross = {0.4, 0.2};
    double prev = std::numeric_limits<double>::infinity();
    for (double bump = 0.0; bump <= 0.5; bump += 0.05) {
        std::vector<double> scores = {0.5 + bump, 0.3, 0.45, 0.1};
        auto r = leadqa::loss_saliency(scores, mask, cross, w);
        CHECK(r.loss < prev);
        prev = r.loss;
        // analytic gradient agrees: negative on the rising positive
        CHECK(r.d_scores[0] < 0.0);
    }
}

TEST_CASE("total loss is the clip mean and validates inputs") {
    CHECK(leadqa::loss_total({0, 0}, {0, 0}, {0, 0}) == 0.0);
    CHECK(leadqa::loss_total({0.2}, {0.3}, {0.1}) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(leadqa::loss_total({0.2, 0.4}, {0.3, 0.1}, {0.1, 0.5}) ==
          doctest::Approx((0.6 + 1.0) / 2.0).epsilon(1e-12));
    // permutation invariance
    CHECK(leadqa::loss_total({0.4, 0.2}, {0.1, 0.3}, {0.5, 0.1}) ==
          doctest::Approx(leadqa::loss_total({0.2, 0.4}, {0.3, 0.1}, {0.1, 0.5}))
              .epsilon(1e-12));
    CHECK_THROWS_AS((void)leadqa::loss_total({}, {}, {}), leadqa::empty_input_error);
    CHECK_THROWS_AS((void)leadqa::loss_total({1.0}, {1.0, 2.0}, {1.0}),
                    leadqa::dimension_error);
}

TEST_CASE("finite differences confirm the documented gradients") {
    using leadqa::finite_diff_check;

    CHECK(finite_diff_check([](const std::vector<double>& p) { return fg_fn(p, 1, 1.0); },
                            {0.5}, 1e-6) < 1e-6);
    CHECK(finite_diff_check(
              [](const std::vector<double>& p) { return sl1_fn(p, 0.0, 1.0); }, {0.5},
              1e-6) < 1e-6);
    CHECK(finite_diff_check(
              [](const std::vector<double>& p) { return iou_fn(p, iv(5, 15)); }, {0.0, 10.0},
              1e-6) < 1e-5);
}

TEST_CASE("gradients match finite differences at random non-kink points") {
    std::mt19937_64 gen(777);
    LossWeights w;

    for (int trial = 0; trial < 100; ++trial) {
        // foreground: stay inside (0,1) away from the clamp
        double f = leadqa::uniform(gen, 0.05, 0.95);
        int label = static_cast<int>(gen() % 2);
        double lf = leadqa::uniform(gen, 0.2, 3.0);
        CHECK(leadqa::finite_diff_check(
                  [&](const std::vector<double>& p) { return fg_fn(p, label, lf); }, {f},
                  1e-6) < 1e-5);

        // smooth L1: keep |x| away from beta
        double beta = leadqa::uniform(gen, 0.5, 2.0);
        double x = leadqa::uniform(gen, -3.0, 3.0);
        if (std::abs(std::abs(x) - beta) < 1e-2 || std::abs(x) < 1e-3) continue;
        CHECK(leadqa::finite_diff_check(
                  [&](const std::vector<double>& p) { return sl1_fn(p, 0.0, beta); }, {x},
                  1e-6) < 1e-5);

        // IoU: overlapping intervals with endpoint margins
        double gs = leadqa::uniform(gen, 0.0, 10.0);
        double ge = gs + leadqa::uniform(gen, 2.0, 8.0);
        double s = gs + leadqa::uniform(gen, -1.5, 1.5);
        double e = ge + leadqa::uniform(gen, -1.5, 1.5);
        if (e - s < 0.5 || std::min(e, ge) - std::max(s, gs) < 0.1) continue;
        if (std::abs(s - gs) < 1e-2 || std::abs(e - ge) < 1e-2) continue;
        CHECK(leadqa::finite_diff_check(
                  [&](const std::vector<double>& p) { return iou_fn(p, iv(gs, ge)); }, {s, e},
                  1e-6) < 1e-5);

        // boundary: offsets with both intervals containing the center
        ClipTarget target;
        target.foreground_label = 1;
        target.offset_start = leadqa::uniform(gen, -3.0, -0.5);
        target.offset_end = leadqa::uniform(gen, 0.5, 3.0);
        double ps = leadqa::uniform(gen, -3.0, -0.5);
        double pe = leadqa::uniform(gen, 0.5, 3.0);
        if (std::abs(ps - target.offset_start) < 1e-2 ||
            std::abs(pe - target.offset_end) < 1e-2)
            continue;
        if (std::abs(std::abs(ps - target.offset_start) - w.smooth_l1_beta) < 1e-2 ||
            std::abs(std::abs(pe - target.offset_end) - w.smooth_l1_beta) < 1e-2)
            continue;
        auto boundary_fn = [&](const std::vector<double>& p) {
            ClipPrediction cp;
            cp.offset_start = p[0];
            cp.offset_end = p[1];
            auto r = leadqa::loss_boundary(cp, target, 7.0, w);
            return std::pair<double, std::vector<double>>{
                r.loss, {r.d_offset_start, r.d_offset_end}};
        };
        CHECK(leadqa::finite_diff_check(boundary_fn, {ps, pe}, 1e-6) < 1e-5);

        // saliency: smooth everywhere; random masks and distractors
        int n = 3 + static_cast<int>(gen() % 4);
        int n_cross = static_cast<int>(gen() % 3);
        std::vector<bool> mask;
        bool any = false;
        for (int i = 0; i < n; ++i) {
            bool pos = (gen() % 3) == 0;
            any = any || pos;
            mask.push_back(pos);
        }
        if (!any) mask[0] = true;
        auto sal_fn = [&](const std::vector<double>& p) {
            std::vector<double> scores(p.begin(), p.begin() + n);
            std::vector<double> cross(p.begin() + n, p.end());
            auto r = leadqa::loss_saliency(scores, mask, cross, w);
            std::vector<double> grad = r.d_scores;
            grad.insert(grad.end(), r.d_cross.begin(), r.d_cross.end());
            return std::pair<double, std::vector<double>>{r.loss, grad};
        };
        std::vector<double> point;
        for (int i = 0; i < n + n_cross; ++i) point.push_back(leadqa::uniform01(gen));
        CHECK(leadqa::finite_diff_check(sal_fn, point, 1e-6) < 1e-5);
    }
}

TEST_CASE("lambda scaling is exact for boundary and saliency") {
    std::mt19937_64 gen(31);
    for (int i = 0; i < 50; ++i) {
        double c = leadqa::uniform(gen, 0.25, 4.0);

        ClipTarget target;
        target.foreground_label = 1;
        target.offset_start = -2.0;
        target.offset_end = 3.0;
        ClipPrediction pred;
        pred.offset_start = leadqa::uniform(gen, -3.0, -0.5);
        pred.offset_end = leadqa::uniform(gen, 0.5, 3.0);

        LossWeights base;
        LossWeights l1_scaled = base;
        l1_scaled.lambda_l1 = c;
        l1_scaled.lambda_iou = 0.0;
        LossWeights l1_unit = base;
        l1_unit.lambda_iou = 0.0;
        auto a = leadqa::loss_boundary(pred, target, 5.0, l1_scaled);
        auto b = leadqa::loss_boundary(pred, target, 5.0, l1_unit);
        CHECK(a.loss == c * b.loss);
        CHECK(a.d_offset_start == c * b.d_offset_start);

        LossWeights sal_scaled = base;
        sal_scaled.lambda_intra = c;
        sal_scaled.lambda_inter = 0.0;
        LossWeights sal_unit = base;
        sal_unit.lambda_inter = 0.0;
        std::vector<double> scores = {leadqa::uniform01(gen), leadqa::uniform01(gen),
                                      leadqa::uniform01(gen)};
        auto sa = leadqa::loss_saliency(scores, {true, false, false}, {}, sal_scaled);
        auto sb = leadqa::loss_saliency(scores, {true, false, false}, {}, sal_unit);
        CHECK(sa.loss == c * sb.loss);
        CHECK(sa.d_scores[1] == c * sb.d_scores[1]);
    }
}
