// leadqa — command-line front end for the grounded video-QA toolkit.
//
// Subcommands are thin wrappers over the library; all real logic lives in
// src/. Every failure path maps to a stable process exit code so shell
// pipelines can branch on failure class (see include/leadqa/errors.hpp).

#include <CLI11.hpp>

#include "leadqa/dataset.hpp"
#include "leadqa/errors.hpp"
#include "leadqa/metrics.hpp"
#include "leadqa/pipeline.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace {

/// Flags shared by every stage subcommand. Flag values override the config
/// file; the config file is the single source of everything else.
struct StageArgs {
    std::string config_path;
    std::string stage_dir;
    bool stub = false;
    std::optional<int> top_k;
    std::optional<double> tau;
    std::optional<int> frames;
    std::optional<double> fps;
    std::optional<std::uint64_t> seed;
};

void add_stage_flags(CLI::App* cmd, StageArgs& args) {
    cmd->add_option("--config", args.config_path, "Run configuration (JSON)")->required();
    cmd->add_option("--stage-dir", args.stage_dir, "Override the artifact directory");
    cmd->add_flag("--stub", args.stub, "Force the offline stub providers");
    cmd->add_option("--top-k", args.top_k, "Override fusion top_k");
    cmd->add_option("--tau", args.tau, "Override both fusion thresholds");
    cmd->add_option("--frames", args.frames, "Override the keyframe count");
    cmd->add_option("--fps", args.fps, "Override the frame-index export rate");
    cmd->add_option("--seed", args.seed, "Override the stub and sampling seeds");
}

leadqa::PipelineConfig effective_config(const StageArgs& args) {
    leadqa::PipelineConfig cfg = leadqa::load_config(args.config_path);
    if (!args.stage_dir.empty()) cfg.stage_dir = args.stage_dir;
    if (args.stub) cfg.stub = true;
    if (args.top_k) {
        if (*args.top_k < 1) throw leadqa::schema_error("--top-k must be >= 1");
        cfg.fusion.top_k = *args.top_k;
    }
    if (args.tau) {
        cfg.fusion.tau_intra = *args.tau;
        cfg.fusion.tau_inter = *args.tau;
    }
    if (args.frames) {
        if (*args.frames < 1) throw leadqa::schema_error("--frames must be >= 1");
        cfg.sampling.k_frames = *args.frames;
    }
    if (args.fps) {
        if (*args.fps <= 0.0) throw leadqa::schema_error("--fps must be > 0");
        cfg.fps = *args.fps;
    }
    if (args.seed) {
        cfg.stub_seed = *args.seed;
        cfg.sampling.seed = *args.seed;
    }
    return cfg;
}

void print_report(const leadqa::EvalReport& report) {
    std::printf("questions        %d (annotated %d)\n", report.n_questions, report.n_annotated);
    std::printf("acc_qa           %.4f\n", report.acc_qa);
    std::printf("acc_gqa          %.4f\n", report.acc_gqa);
    std::printf("mIoP             %.4f\n", report.miop);
    std::printf("mIoU             %.4f\n", report.miou);
    for (const auto& [threshold, rate] : report.iop_at) {
        std::printf("IoP@%.1f          %.4f\n", threshold, rate);
    }
    for (const auto& [threshold, rate] : report.iou_at) {
        std::printf("IoU@%.1f          %.4f\n", threshold, rate);
    }
    for (const auto& [type, acc] : report.per_type) {
        std::printf("acc_qa[%s]%*s %.4f\n", leadqa::to_string(type).c_str(),
                    static_cast<int>(8 - leadqa::to_string(type).size()), "", acc);
    }
}

int run(int argc, char** argv) {
    CLI::App app{"leadqa — grounded video question answering toolkit"};
    app.require_subcommand(1);

    // ingest-validate
    auto* ingest_cmd = app.add_subcommand("ingest-validate", "Parse and validate a dataset");
    std::string ingest_dataset_path;
    ingest_cmd->add_option("--dataset", ingest_dataset_path, "Dataset (JSON-Lines)")->required();
    ingest_cmd->callback([&] {
        const leadqa::IngestResult result = leadqa::ingest_dataset(ingest_dataset_path);
        for (const std::string& warning : result.warnings) {
            std::fprintf(stderr, "warning: %s\n", warning.c_str());
        }
        std::printf("%zu records ok, %zu warnings\n", result.records.size(),
                    result.warnings.size());
    });

    // Stage subcommands.
    StageArgs rewrite_args, ground_args, fuse_args, sample_args, evaluate_args, pipeline_args;
    auto* rewrite_cmd =
        app.add_subcommand("rewrite", "Turn each (question, option) into a declarative description");
    add_stage_flags(rewrite_cmd, rewrite_args);
    rewrite_cmd->callback([&] { leadqa::run_rewrite_stage(effective_config(rewrite_args)); });

    auto* ground_cmd = app.add_subcommand("ground", "Produce scored intervals per option");
    add_stage_flags(ground_cmd, ground_args);
    ground_cmd->callback([&] { leadqa::run_ground_stage(effective_config(ground_args)); });

    auto* fuse_cmd = app.add_subcommand("fuse", "Merge per-option intervals per question");
    add_stage_flags(fuse_cmd, fuse_args);
    fuse_cmd->callback([&] { leadqa::run_fuse_stage(effective_config(fuse_args)); });

    auto* sample_cmd = app.add_subcommand("sample", "Select keyframes inside the fused intervals");
    add_stage_flags(sample_cmd, sample_args);
    sample_cmd->callback([&] { leadqa::run_sample_stage(effective_config(sample_args)); });

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score answers and grounding quality");
    add_stage_flags(evaluate_cmd, evaluate_args);
    evaluate_cmd->callback(
        [&] { print_report(leadqa::run_evaluate_stage(effective_config(evaluate_args))); });

    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run all stages in order");
    add_stage_flags(pipeline_cmd, pipeline_args);
    pipeline_cmd->callback(
        [&] { print_report(leadqa::run_pipeline(effective_config(pipeline_args))); });

    // sweep
    StageArgs sweep_args;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Grid over fusion top_k and tau without re-grounding");
    add_stage_flags(sweep_cmd, sweep_args);
    std::vector<int> sweep_top_k = {1, 3, 5};
    std::vector<double> sweep_tau = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::string sweep_metric = "iou@0.5";
    sweep_cmd->add_option("--top-k-values", sweep_top_k, "Fusion top_k grid");
    sweep_cmd->add_option("--tau-values", sweep_tau, "Fusion threshold grid");
    sweep_cmd->add_option("--metric", sweep_metric,
                          "Cell metric (acc_qa, acc_gqa, miop, miou, iop@T, iou@T)");
    sweep_cmd->callback([&] {
        const leadqa::SweepResult result = leadqa::run_sweep(
            effective_config(sweep_args), sweep_top_k, sweep_tau, sweep_metric);
        std::printf("%s over top_k x tau (grounder invocations: %ld)\n", result.metric.c_str(),
                    result.grounder_invocations);
        std::printf("%8s", "");
        for (double tau : result.tau_values) std::printf("  tau=%-5.2f", tau);
        std::printf("\n");
        for (std::size_t r = 0; r < result.cells.size(); ++r) {
            std::printf("top_k=%-2d", result.top_k_values[r]);
            for (double cell : result.cells[r]) std::printf("  %9.4f", cell);
            std::printf("\n");
        }
    });

    // gradcheck
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "Audit analytic loss gradients against finite differences");
    std::uint64_t gradcheck_seed = 2026;
    int gradcheck_trials = 100;
    double gradcheck_tolerance = 1e-5;
    gradcheck_cmd->add_option("--seed", gradcheck_seed, "Point-generation seed");
    gradcheck_cmd->add_option("--trials", gradcheck_trials, "Points per loss");
    gradcheck_cmd->add_option("--tolerance", gradcheck_tolerance, "Max relative error allowed");
    gradcheck_cmd->callback([&] {
        bool ok = true;
        for (const leadqa::GradcheckRow& row : leadqa::run_gradcheck(gradcheck_seed,
                                                                     gradcheck_trials)) {
            const bool pass = row.max_rel_err < gradcheck_tolerance;
            ok = ok && pass;
            std::printf("%-16s max rel err %.3e  %s\n", row.loss.c_str(), row.max_rel_err,
                        pass ? "ok" : "FAIL");
        }
        if (!ok) {
            throw leadqa::error(leadqa::exit_code::gradcheck_failed,
                                "gradient check exceeded tolerance");
        }
    });

    // make-fixtures
    auto* fixtures_cmd =
        app.add_subcommand("make-fixtures", "Regenerate the bundled deterministic demo inputs");
    std::string fixtures_dir;
    fixtures_cmd->add_option("--dir", fixtures_dir, "Output directory")->required();
    fixtures_cmd->callback([&] {
        leadqa::write_fixtures(fixtures_dir);
        std::printf("fixtures written to %s\n", fixtures_dir.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const leadqa::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return static_cast<int>(leadqa::exit_code::internal);
    }
}
