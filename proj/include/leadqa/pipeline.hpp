#pragma once

#include "leadqa/dataset.hpp"
#include "leadqa/grounder.hpp"
#include "leadqa/intervals.hpp"
#include "leadqa/metrics.hpp"
#include "leadqa/objectives.hpp"
#include "leadqa/rewriter.hpp"
#include "leadqa/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace leadqa {

/// Reported in every stage manifest so artifact provenance survives upgrades.
extern const char* const kToolVersion;

/// Offline grounding substitute used by --stub runs.
///   spans:     one proposal per annotated span (plus optional jitter).
///   decompose: three nested proposals per span (a head piece, a tail piece
///              and the full span) so fusion quality depends on how many
///              proposals are kept and how aggressively they are merged.
enum class stub_proposal_mode { spans, decompose };

std::string to_string(stub_proposal_mode m);
stub_proposal_mode stub_proposal_mode_from_string(const std::string& s); // throws schema_error

/// One run configuration, loaded from a single JSON file. Input paths
/// (dataset/features/weights) resolve relative to the config file's
/// directory; output paths (stage_dir/cache_dir) resolve relative to the
/// working directory so checked-in configs never write next to themselves.
struct PipelineConfig {
    std::filesystem::path dataset_path;
    std::filesystem::path features_path; // required only for model grounding
    std::filesystem::path weights_path;  // required only for model grounding
    std::filesystem::path stage_dir = "out";
    std::filesystem::path cache_dir; // empty -> stage_dir / "cache"

    FusionConfig fusion;
    SamplingPlan sampling;
    double fps = 4.0;
    int parallelism = 4;

    bool stub = false; // offline rewriter + grounder + answerer
    stub_proposal_mode stub_mode = stub_proposal_mode::spans;
    double stub_noise = 0.0;
    std::uint64_t stub_seed = 0;

    std::string answer_command; // empty -> built-in deterministic answerer

    std::filesystem::path cache_directory() const;
};

/// Parses and resolves a config file. Throws missing_upstream_error when the
/// file is absent, parse_error on bad JSON, schema_error on bad fields
/// (unknown keys are rejected to catch typos).
PipelineConfig load_config(const std::filesystem::path& config_path);

/// SHA-256 over the canonicalized effective configuration (after flag
/// overrides); stamped into manifests so artifacts from different
/// configurations never read as interchangeable.
std::string config_hash(const PipelineConfig& cfg);

/// Per-option proposal list as stored in proposals.jsonl (rank order).
struct OptionProposals {
    std::string question_id;
    int option_index = 0;
    std::vector<GroundedProposal> proposals;
};

/// Per-question fused intervals as stored in fused.jsonl.
struct QuestionFusion {
    std::string question_id;
    std::vector<FusedInterval> intervals;
};

/// Per-question keyframe selection as stored in frames.jsonl.
struct QuestionFrames {
    std::string question_id;
    std::vector<double> times;
    std::vector<long> frame_indices;
};

// Stage artifact readers. Each throws missing_upstream_error (naming both the
// missing file and the producing subcommand) when the artifact is absent, and
// schema_error / parse_error on malformed content.
std::vector<RewrittenQuery> read_rewrites(const std::filesystem::path& stage_dir);
std::vector<OptionProposals> read_proposals(const std::filesystem::path& stage_dir);
std::vector<QuestionFusion> read_fused(const std::filesystem::path& stage_dir);
std::vector<QuestionFrames> read_frames(const std::filesystem::path& stage_dir);

/// Stage runners. Each validates its upstream artifacts, writes its outputs
/// plus a `<stage>.manifest.json` (schema version, tool version, config hash,
/// input digests) under cfg.stage_dir, and is idempotent: rerunning with
/// unchanged inputs reproduces byte-identical artifacts.
void run_rewrite_stage(const PipelineConfig& cfg);
void run_ground_stage(const PipelineConfig& cfg);
void run_fuse_stage(const PipelineConfig& cfg);
void run_sample_stage(const PipelineConfig& cfg);
EvalReport run_evaluate_stage(const PipelineConfig& cfg);

/// All five stages in order; returns the final report.
EvalReport run_pipeline(const PipelineConfig& cfg);

struct SweepResult {
    std::string metric;
    std::vector<int> top_k_values;
    std::vector<double> tau_values;
    std::vector<std::vector<double>> cells; // rows follow top_k_values, cols tau_values
    long grounder_invocations = 0;          // copied from the ground manifest
};

/// Re-scores the already-grounded proposals for every (top_k, tau)
/// combination without touching the grounder: per cell, proposals are
/// truncated to the cell's top_k, fused at the cell's tau, answered, and
/// reduced to the named metric (acc_qa, acc_gqa, miop, miou, iop@T, iou@T).
/// Writes sweep.json + manifest under cfg.stage_dir.
SweepResult run_sweep(const PipelineConfig& cfg, const std::vector<int>& top_k_values,
                      const std::vector<double>& tau_values, const std::string& metric);

/// Deterministic grounding stub. In spans mode it emits one proposal per
/// annotated span, each endpoint jittered by a seeded uniform draw from
/// [-noise, +noise] and clamped into [0, duration]; the proposal for the
/// correct option scores 0.9, wrong options score 0.5 - 0.02 * option, and
/// later spans lose a 0.01 tiebreak. decompose mode replaces each span with
/// its head piece, tail piece and full extent (see stub_proposal_mode).
/// Unannotated questions yield a single whole-video proposal.
std::vector<GroundedProposal> stub_ground_option(const QuestionRecord& record, int option_index,
                                                 stub_proposal_mode mode, double noise,
                                                 std::uint64_t seed);

/// Built-in answerer: picks the option whose proposals overlap the fused
/// intervals most, weighting each proposal's overlapped seconds by its
/// grounding score. Ties break toward the lowest index; with no overlap at
/// all it returns 0.
int stub_answer(const std::vector<std::vector<GroundedProposal>>& per_option,
                const std::vector<FusedInterval>& fused);

/// Runs an external answering command (via /bin/sh -c): the request JSON
/// {question, options, timestamps, descriptions} is piped to stdin, the
/// response must be {"answer_index": i} on stdout. Throws transport_error on
/// spawn failure, nonzero exit, malformed output or out-of-range index.
int external_answer(const std::string& command, const QuestionRecord& record,
                    const std::vector<double>& frame_times,
                    const std::vector<std::string>& descriptions);

struct GradcheckRow {
    std::string loss;
    double max_rel_err = 0.0;
};

/// Central-difference audit of every analytic loss gradient at `trials`
/// seeded kink-free points per loss. Rows report the worst relative error.
std::vector<GradcheckRow> run_gradcheck(std::uint64_t seed = 2026, int trials = 100);

/// Writes the bundled deterministic demo inputs (synthetic corpora, feature
/// tables, demo weights, run configs) under `dir`. Regeneration is
/// byte-identical, so the checked-in copies are reviewable.
void write_fixtures(const std::filesystem::path& dir);

} // namespace leadqa
