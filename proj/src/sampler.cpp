#include "leadqa/sampler.hpp"

#include "leadqa/errors.hpp"
#include "leadqa/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace leadqa {

namespace {

constexpr double kDedupEps = 1e-6;

void check_args(double duration_s, int k) {
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
        throw invalid_duration_error("sampler: duration must be positive, got " +
                                     std::to_string(duration_s));
    }
    if (k < 1) {
        throw empty_input_error("sampler: k must be >= 1, got " + std::to_string(k));
    }
}

std::vector<double> bin_midpoints(double lo, double hi, int k) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        out.push_back(lo + (i + 0.5) * (hi - lo) / k);
    }
    return out;
}

void sort_dedup(std::vector<double>& ts) {
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double a, double b) { return std::abs(a - b) < kDedupEps; }),
             ts.end());
}

// Largest-remainder apportionment of k by weight, with a >=1 floor for every
// interval while k covers the interval count. Ties on remainder go to the
// lower index so the result is deterministic.
std::vector<int> allocate(const std::vector<double>& weights, int k) {
    const std::size_t n = weights.size();
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> quota(n);
    for (std::size_t i = 0; i < n; ++i) {
        quota[i] = total > 0.0 ? k * weights[i] / total : static_cast<double>(k) / n;
    }
    std::vector<int> alloc(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        alloc[i] = static_cast<int>(std::floor(quota[i]));
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t idx = 0; assigned < k; idx = (idx + 1) % n) {
        alloc[order[idx]] += 1;
        assigned += 1;
    }
    // floor rule: when k can cover every interval, nothing stays at zero
    if (k >= static_cast<int>(n)) {
        for (std::size_t i = 0; i < n; ++i) {
            while (alloc[i] == 0) {
                auto richest = std::max_element(alloc.begin(), alloc.end());
                *richest -= 1;
                alloc[i] += 1;
            }
        }
    }
    return alloc;
}

} // namespace

std::string to_string(sampling_strategy s) {
    switch (s) {
        case sampling_strategy::uniform: return "uniform";
        case sampling_strategy::random: return "random";
        case sampling_strategy::focused: return "focused";
        case sampling_strategy::hybrid: return "hybrid";
    }
    return "uniform";
}

sampling_strategy sampling_strategy_from_string(const std::string& s) {
    if (s == "uniform") return sampling_strategy::uniform;
    if (s == "random") return sampling_strategy::random;
    if (s == "focused") return sampling_strategy::focused;
    if (s == "hybrid") return sampling_strategy::hybrid;
    throw schema_error("unknown sampling strategy: '" + s + "'");
}

std::vector<double> sample_uniform(double duration_s, int k) {
    check_args(duration_s, k);
    return bin_midpoints(0.0, duration_s, k);
}

std::vector<double> sample_random(double duration_s, int k, std::uint64_t seed) {
    check_args(duration_s, k);
    std::mt19937_64 gen(seed);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        out.push_back(uniform(gen, 0.0, duration_s));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> sample_focused(const std::vector<TimeInterval>& fused, int k,
                                   double duration_s) {
    check_args(duration_s, k);
    if (fused.empty()) {
        return sample_uniform(duration_s, k);
    }
    std::vector<double> weights;
    weights.reserve(fused.size());
    for (const auto& f : fused) {
        weights.push_back(std::max(0.0, f.length()));
    }
    std::vector<int> alloc = allocate(weights, k);
    std::vector<double> out;
    for (std::size_t i = 0; i < fused.size(); ++i) {
        if (alloc[i] == 0) continue;
        auto mids = bin_midpoints(fused[i].t_start, fused[i].t_end, alloc[i]);
        out.insert(out.end(), mids.begin(), mids.end());
    }
    sort_dedup(out);
    return out;
}

std::vector<double> sample_hybrid(const std::vector<TimeInterval>& fused, int k,
                                  double duration_s) {
    check_args(duration_s, k);
    if (k < 2) {
        throw empty_input_error("sample_hybrid: k must be >= 2, got " + std::to_string(k));
    }
    std::vector<double> out = sample_focused(fused, (k + 1) / 2, duration_s);
    std::vector<double> uni = sample_uniform(duration_s, k / 2);
    out.insert(out.end(), uni.begin(), uni.end());
    sort_dedup(out);
    return out;
}

std::vector<double> sample(const SamplingPlan& plan, const std::vector<TimeInterval>& fused,
                           double duration_s) {
    switch (plan.strategy) {
        case sampling_strategy::uniform: return sample_uniform(duration_s, plan.k_frames);
        case sampling_strategy::random:
            return sample_random(duration_s, plan.k_frames, plan.seed);
        case sampling_strategy::focused:
            return sample_focused(fused, plan.k_frames, duration_s);
        case sampling_strategy::hybrid: return sample_hybrid(fused, plan.k_frames, duration_s);
    }
    throw empty_input_error("sample: unknown strategy");
}

std::vector<long> to_frame_indices(const std::vector<double>& timestamps, double fps) {
    if (!(fps > 0.0) || !std::isfinite(fps)) {
        throw invalid_duration_error("to_frame_indices: fps must be positive");
    }
    std::vector<long> out;
    out.reserve(timestamps.size());
    for (double t : timestamps) {
        out.push_back(std::lround(t * fps));
    }
    return out;
}

} // namespace leadqa
