#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "leadqa/errors.hpp"
#include "leadqa/rng.hpp"
#include "leadqa/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using leadqa::TimeInterval;

namespace {

TimeInterval iv(double s, double e) { return TimeInterval{s, e}; }

void check_sorted_in_bounds(const std::vector<double>& ts, double duration) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(ts[i] >= 0.0);
        CHECK(ts[i] <= duration);
        if (i > 0) CHECK(ts[i] > ts[i - 1]);
    }
}

} // namespace

TEST_CASE("uniform sampling hits bin midpoints") {
    auto four = leadqa::sample_uniform(16.0, 4);
    REQUIRE(four.size() == 4);
    CHECK(four[0] == doctest::Approx(2.0));
    CHECK(four[1] == doctest::Approx(6.0));
    CHECK(four[2] == doctest::Approx(10.0));
    CHECK(four[3] == doctest::Approx(14.0));

    auto one = leadqa::sample_uniform(10.0, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(5.0));

    CHECK_THROWS_AS((void)leadqa::sample_uniform(10.0, 0), leadqa::error);
    CHECK_THROWS_AS((void)leadqa::sample_uniform(0.0, 4), leadqa::invalid_duration_error);
    CHECK_THROWS_AS((void)leadqa::sample_uniform(-3.0, 4), leadqa::invalid_duration_error);
}

TEST_CASE("random sampling is deterministic and frozen") {
    auto a = leadqa::sample_random(10.0, 3, 42);
    auto b = leadqa::sample_random(10.0, 3, 42);
    CHECK(a == b);

    // golden triple generated once by the reference generator
    REQUIRE(a.size() == 3);
    CHECK(a[0] == doctest::Approx(6.3903139385469743).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(7.5214520074802662).epsilon(1e-15));
    CHECK(a[2] == doctest::Approx(7.5515553295453897).epsilon(1e-15));

    auto c = leadqa::sample_random(10.0, 3, 43);
    CHECK(a != c);
}

TEST_CASE("random sampling stays sorted and bounded over many trials") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 1000; ++trial) {
        double duration = 1.0 + 59.0 * leadqa::uniform01(gen);
        int k = 1 + static_cast<int>(gen() % 16);
        auto ts = leadqa::sample_random(duration, k, gen());
        REQUIRE(ts.size() == static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < ts.size(); ++i) {
            CHECK(ts[i] >= 0.0);
            CHECK(ts[i] <= duration);
            if (i > 0) CHECK(ts[i] >= ts[i - 1]);
        }
    }
}

TEST_CASE("focused sampling splits frames by interval length") {
    // equal lengths: 2 + 2, midpoints of two bins each
    auto ts = leadqa::sample_focused({iv(0, 4), iv(8, 12)}, 4, 20.0);
    REQUIRE(ts.size() == 4);
    CHECK(ts[0] == doctest::Approx(1.0));
    CHECK(ts[1] == doctest::Approx(3.0));
    CHECK(ts[2] == doctest::Approx(9.0));
    CHECK(ts[3] == doctest::Approx(11.0));

    // empty fused list falls back to uniform over the video
    auto fallback = leadqa::sample_focused({}, 2, 10.0);
    REQUIRE(fallback.size() == 2);
    CHECK(fallback[0] == doctest::Approx(2.5));
    CHECK(fallback[1] == doctest::Approx(7.5));

    // single interval, single frame: its midpoint
    auto single = leadqa::sample_focused({iv(3, 5)}, 1, 10.0);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == doctest::Approx(4.0));
}

TEST_CASE("focused sampling guarantees every interval a frame when k covers them") {
    // long first interval would swallow everything under pure proportion
    auto ts = leadqa::sample_focused({iv(0, 18), iv(19, 20)}, 3, 20.0);
    REQUIRE(ts.size() == 3);
    bool in_second = false;
    for (double t : ts) {
        if (t >= 19.0 && t <= 20.0) in_second = true;
    }
    CHECK(in_second);

    // k below the interval count: proportional only, total conserved
    auto few = leadqa::sample_focused({iv(0, 1), iv(2, 3), iv(4, 15)}, 2, 20.0);
    CHECK(few.size() == 2);
}

TEST_CASE("focused sampling emits frames inside the fused union") {
    std::mt19937_64 gen(808);
    for (int trial = 0; trial < 400; ++trial) {
        double duration = 30.0;
        int n = 1 + static_cast<int>(gen() % 4);
        std::vector<TimeInterval> fused;
        double cursor = 0.0;
        for (int i = 0; i < n; ++i) {
            double lo = cursor + leadqa::uniform(gen, 0.2, 2.0);
            double hi = lo + leadqa::uniform(gen, 0.5, 4.0);
            if (hi >= duration) break;
            fused.push_back(iv(lo, hi));
            cursor = hi;
        }
        if (fused.empty()) continue;
        int k = static_cast<int>(fused.size()) + static_cast<int>(gen() % 8);
        auto ts = leadqa::sample_focused(fused, k, duration);
        check_sorted_in_bounds(ts, duration);
        for (double t : ts) {
            bool inside = false;
            for (const auto& f : fused) {
                if (t >= f.t_start - 1e-9 && t <= f.t_end + 1e-9) inside = true;
            }
            CHECK(inside);
        }
        // every interval received at least one frame (k >= count)
        for (const auto& f : fused) {
            bool hit = false;
            for (double t : ts) {
                if (t >= f.t_start - 1e-9 && t <= f.t_end + 1e-9) hit = true;
            }
            CHECK(hit);
        }
    }
}

TEST_CASE("focused sampling copes with degenerate interval lists") {
    // zero-length intervals: even split, dedup leaves the two distinct points
    auto points = leadqa::sample_focused({iv(3, 3), iv(7, 7)}, 4, 10.0);
    REQUIRE(points.size() == 2);
    CHECK(points[0] == doctest::Approx(3.0));
    CHECK(points[1] == doctest::Approx(7.0));

    // overlapping intervals may produce coincident midpoints; output must
    // still be strictly increasing
    auto nested = leadqa::sample_focused({iv(0, 8), iv(2, 6)}, 6, 10.0);
    check_sorted_in_bounds(nested, 10.0);
}

TEST_CASE("hybrid sampling merges focused and uniform halves") {
    // 2 focused midpoints in [0,4] + 2 uniform midpoints over 16
    auto ts = leadqa::sample_hybrid({iv(0, 4)}, 4, 16.0);
    REQUIRE(ts.size() == 4);
    CHECK(ts[0] == doctest::Approx(1.0));
    CHECK(ts[1] == doctest::Approx(3.0));
    CHECK(ts[2] == doctest::Approx(4.0));
    CHECK(ts[3] == doctest::Approx(12.0));

    // fused covering the whole video: union of the two midpoint sets
    auto whole = leadqa::sample_hybrid({iv(0, 12)}, 4, 12.0);
    auto focused = leadqa::sample_focused({iv(0, 12)}, 2, 12.0);
    auto uniform = leadqa::sample_uniform(12.0, 2);
    std::vector<double> expect = focused;
    expect.insert(expect.end(), uniform.begin(), uniform.end());
    std::sort(expect.begin(), expect.end());
    expect.erase(std::unique(expect.begin(), expect.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-6; }),
                 expect.end());
    REQUIRE(whole.size() == expect.size());
    for (std::size_t i = 0; i < whole.size(); ++i)
        CHECK(whole[i] == doctest::Approx(expect[i]));

    CHECK_THROWS_AS((void)leadqa::sample_hybrid({iv(0, 4)}, 1, 16.0), leadqa::error);
}

TEST_CASE("hybrid sampling deduplicates coincident frames") {
    // focused midpoint of [4,6] is 5; uniform midpoint of k=1 over 10 is 5
    auto ts = leadqa::sample_hybrid({iv(4, 6)}, 2, 10.0);
    REQUIRE(ts.size() == 1);
    CHECK(ts[0] == doctest::Approx(5.0));
}

TEST_CASE("strategy dispatch and naming round-trip") {
    using leadqa::sampling_strategy;
    for (auto s : {sampling_strategy::uniform, sampling_strategy::random,
                   sampling_strategy::focused, sampling_strategy::hybrid}) {
        CHECK(leadqa::sampling_strategy_from_string(leadqa::to_string(s)) == s);
    }
    CHECK_THROWS_AS((void)leadqa::sampling_strategy_from_string("spiral"),
                    leadqa::schema_error);

    leadqa::SamplingPlan plan;
    plan.strategy = sampling_strategy::focused;
    plan.k_frames = 4;
    auto via_plan = leadqa::sample(plan, {iv(0, 4), iv(8, 12)}, 20.0);
    auto direct = leadqa::sample_focused({iv(0, 4), iv(8, 12)}, 4, 20.0);
    CHECK(via_plan == direct);
}

TEST_CASE("frame index export rounds against fps") {
    auto idx = leadqa::to_frame_indices({2.0, 6.0, 10.0, 14.0}, 3.0);
    REQUIRE(idx.size() == 4);
    CHECK(idx[0] == 6);
    CHECK(idx[1] == 18);
    CHECK(idx[2] == 30);
    CHECK(idx[3] == 42);
    // rounding, not truncation
    CHECK(leadqa::to_frame_indices({1.49, 1.51}, 1.0) == std::vector<long>{1, 2});
    CHECK_THROWS_AS((void)leadqa::to_frame_indices({1.0}, 0.0),
                    leadqa::invalid_duration_error);
}
