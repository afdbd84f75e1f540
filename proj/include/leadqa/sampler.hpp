#pragma once

#include "leadqa/intervals.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace leadqa {

enum class sampling_strategy { uniform, random, focused, hybrid };

std::string to_string(sampling_strategy s);
sampling_strategy sampling_strategy_from_string(const std::string& s); // throws schema_error

/// How to pick keyframes for one question.
struct SamplingPlan {
    sampling_strategy strategy = sampling_strategy::uniform;
    int k_frames = 8;
    std::uint64_t seed = 0; // consumed by the random strategy only
};

/// Midpoints of k equal-width bins over [0, duration]: (i + 0.5) * duration / k.
std::vector<double> sample_uniform(double duration_s, int k);

/// k seeded uniform draws over [0, duration], sorted ascending. Determinism
/// matters more than distribution niceties here; draws come from the
/// project-wide bit-derived uniform (see rng.hpp), never from
/// std::uniform_real_distribution.
std::vector<double> sample_random(double duration_s, int k, std::uint64_t seed);

/// Distribute k frames across the fused intervals proportionally to interval
/// length (largest-remainder rounding; every interval gets at least one frame
/// when k >= interval count, topping up from the largest allocation), then
/// place bin midpoints inside each interval. Output is sorted and
/// deduplicated within 1e-6 s. An empty interval list falls back to
/// sample_uniform over the whole video.
std::vector<double> sample_focused(const std::vector<TimeInterval>& fused, int k,
                                   double duration_s);

/// ceil(k/2) focused frames + floor(k/2) uniform frames, merged, deduplicated
/// within 1e-6 s, sorted. Requires k >= 2.
std::vector<double> sample_hybrid(const std::vector<TimeInterval>& fused, int k,
                                  double duration_s);

/// Dispatch on plan.strategy.
std::vector<double> sample(const SamplingPlan& plan, const std::vector<TimeInterval>& fused,
                           double duration_s);

/// Export conversion: frame index = round(t * fps).
std::vector<long> to_frame_indices(const std::vector<double>& timestamps, double fps);

} // namespace leadqa
