#include "leadqa/pipeline.hpp"

#include "leadqa/errors.hpp"
#include "leadqa/io.hpp"
#include "leadqa/rng.hpp"

#include <nlohmann/json.hpp>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <utility>

namespace leadqa {

using json = nlohmann::json;

const char* const kToolVersion = "0.1.0";

std::string to_string(stub_proposal_mode m) {
    switch (m) {
    case stub_proposal_mode::spans: return "spans";
    case stub_proposal_mode::decompose: return "decompose";
    }
    throw error(exit_code::internal, "unhandled stub_proposal_mode");
}

stub_proposal_mode stub_proposal_mode_from_string(const std::string& s) {
    if (s == "spans") return stub_proposal_mode::spans;
    if (s == "decompose") return stub_proposal_mode::decompose;
    throw schema_error("unknown stub mode: '" + s + "' (expected 'spans' or 'decompose')");
}

namespace {

[[noreturn]] void config_fail(const std::string& field, const std::string& msg) {
    throw schema_error("config: field '" + field + "': " + msg);
}

double get_config_number(const json& j, const std::string& field) {
    if (!j.is_number()) config_fail(field, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) config_fail(field, "must be finite");
    return v;
}

int get_config_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) config_fail(field, "expected an integer");
    return j.get<int>();
}

std::string get_config_string(const json& j, const std::string& field) {
    if (!j.is_string()) config_fail(field, "expected a string");
    return j.get<std::string>();
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& scope) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            config_fail(scope.empty() ? key : scope + "." + key, "unknown key");
        }
    }
}

std::filesystem::path resolve_input(const std::filesystem::path& base,
                                    const std::filesystem::path& p) {
    return p.is_absolute() ? p : base / p;
}

std::string path_string(const std::filesystem::path& p) {
    return p.lexically_normal().generic_string();
}

// ---------------------------------------------------------------------------
// Stage artifact plumbing

std::filesystem::path stage_path(const PipelineConfig& cfg, const std::string& name) {
    return cfg.stage_dir / name;
}

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw missing_upstream_error(path_string(path) + " is missing; run `leadqa " + producer +
                                     "` first");
    }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::string out;
    for (const json& line : lines) out += line.dump() + "\n";
    atomic_write_file(path, out);
}

json parse_artifact_line(const std::filesystem::path& path, std::size_t lineno,
                         const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw parse_error(path.filename().generic_string() + ":" + std::to_string(lineno) + ": " +
                          e.what());
    }
}

[[noreturn]] void artifact_fail(const std::filesystem::path& path, std::size_t lineno,
                                const std::string& msg) {
    throw schema_error(path.filename().generic_string() + ":" + std::to_string(lineno) + ": " + msg);
}

double artifact_number(const json& j, const std::filesystem::path& path, std::size_t lineno,
                       const char* field) {
    if (!j.contains(field) || !j.at(field).is_number()) {
        artifact_fail(path, lineno, std::string("field '") + field + "': expected a number");
    }
    return j.at(field).get<double>();
}

std::string artifact_string(const json& j, const std::filesystem::path& path, std::size_t lineno,
                            const char* field) {
    if (!j.contains(field) || !j.at(field).is_string()) {
        artifact_fail(path, lineno, std::string("field '") + field + "': expected a string");
    }
    return j.at(field).get<std::string>();
}

/// Stage manifest: provenance of one stage run. Deliberately timestamp-free
/// so reruns with unchanged inputs are byte-identical.
void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                    const std::vector<std::filesystem::path>& outputs, json extra = json::object()) {
    json m = std::move(extra);
    m["schema_version"] = 1;
    m["stage"] = stage;
    m["tool_version"] = kToolVersion;
    m["config_hash"] = config_hash(cfg);
    json in = json::object();
    for (const auto& [label, path] : inputs) {
        in[label] = {{"path", path_string(path)}, {"sha256", sha256_file_hex(path)}};
    }
    m["inputs"] = std::move(in);
    json out = json::object();
    for (const auto& path : outputs) {
        out[path.filename().generic_string()] = {{"sha256", sha256_file_hex(path)}};
    }
    m["outputs"] = std::move(out);
    atomic_write_file(stage_path(cfg, stage + ".manifest.json"), m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Parallel map over independent tasks with stable output order.

template <typename Task, typename Fn>
void parallel_for(const std::vector<Task>& tasks, int parallelism, const Fn& fn) {
    if (parallelism < 1) throw degenerate_input_error("parallelism must be >= 1");
    const std::size_t n = tasks.size();
    const int threads = static_cast<int>(std::min<std::size_t>(parallelism, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, tasks[i]);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i, tasks[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Feature table (model grounding inputs)

struct FeatureTable {
    std::map<std::string, ClipSequence> clips;    // by video_id
    std::map<std::string, QueryTokens> queries;   // by "<question_id>#<option>"
};

Eigen::MatrixXf parse_feature_matrix(const json& rows, const std::filesystem::path& path,
                                     std::size_t lineno, const char* field) {
    if (!rows.is_array() || rows.empty()) {
        artifact_fail(path, lineno, std::string("field '") + field + "': expected a non-empty array");
    }
    const std::size_t n_cols = rows[0].is_array() ? rows[0].size() : 0;
    if (n_cols == 0) artifact_fail(path, lineno, std::string("field '") + field + "': empty row");
    Eigen::MatrixXf m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != n_cols) {
            artifact_fail(path, lineno,
                          std::string("field '") + field + "': ragged row " + std::to_string(r));
        }
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (!rows[r][c].is_number()) {
                artifact_fail(path, lineno, std::string("field '") + field + "': non-numeric entry");
            }
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<float>();
        }
    }
    return m;
}

FeatureTable read_features(const std::filesystem::path& path) {
    require_artifact(path, "(provide the features file referenced by the config)");
    FeatureTable table;
    for_each_line(path, [&](std::size_t lineno, const std::string& line) {
        json j = parse_artifact_line(path, lineno, line);
        if (!j.is_object()) artifact_fail(path, lineno, "expected a JSON object");
        const std::string kind = artifact_string(j, path, lineno, "kind");
        if (kind == "clips") {
            ClipSequence seq;
            seq.video_id = artifact_string(j, path, lineno, "video_id");
            seq.clip_duration_s = artifact_number(j, path, lineno, "clip_duration_s");
            if (!j.contains("timestamps") || !j.at("timestamps").is_array()) {
                artifact_fail(path, lineno, "field 'timestamps': expected an array");
            }
            for (const auto& t : j.at("timestamps")) {
                if (!t.is_number()) artifact_fail(path, lineno, "field 'timestamps': non-numeric");
                seq.timestamps.push_back(t.get<double>());
            }
            seq.features = parse_feature_matrix(j.at("features"), path, lineno, "features");
            validate_clip_sequence(seq);
            const std::string video_id = seq.video_id;
            if (!table.clips.emplace(video_id, std::move(seq)).second) {
                artifact_fail(path, lineno, "duplicate clips entry for video '" + video_id + "'");
            }
        } else if (kind == "query") {
            QueryTokens q;
            q.query_id = artifact_string(j, path, lineno, "query_id");
            q.tokens = parse_feature_matrix(j.at("tokens"), path, lineno, "tokens");
            const std::string query_id = q.query_id;
            if (!table.queries.emplace(query_id, std::move(q)).second) {
                artifact_fail(path, lineno, "duplicate query entry '" + query_id + "'");
            }
        } else {
            artifact_fail(path, lineno, "field 'kind': expected 'clips' or 'query'");
        }
    });
    return table;
}

// ---------------------------------------------------------------------------
// Evaluation core shared by the evaluate stage and the sweep

std::vector<GroundedProposal> top_k_by_rank(std::vector<GroundedProposal> proposals, int top_k) {
    std::sort(proposals.begin(), proposals.end(),
              [](const GroundedProposal& a, const GroundedProposal& b) { return a.rank < b.rank; });
    if (top_k >= 0 && proposals.size() > static_cast<std::size_t>(top_k)) {
        proposals.resize(static_cast<std::size_t>(top_k));
    }
    return proposals;
}

std::optional<TimeInterval> pick_prediction(const std::vector<FusedInterval>& fused) {
    const FusedInterval* best = nullptr;
    for (const FusedInterval& f : fused) {
        if (!best || f.score > best->score ||
            (f.score == best->score &&
             (f.interval.t_start < best->interval.t_start ||
              (f.interval.t_start == best->interval.t_start &&
               f.interval.length() < best->interval.length())))) {
            best = &f;
        }
    }
    if (!best) return std::nullopt;
    return best->interval;
}

/// Groups raw proposal rows by question into option-indexed lists, validating
/// coverage against the dataset.
std::map<std::string, std::vector<std::vector<GroundedProposal>>> group_proposals(
    const std::vector<QuestionRecord>& records, const std::vector<OptionProposals>& rows) {
    std::map<std::string, std::vector<std::vector<GroundedProposal>>> grouped;
    std::map<std::string, std::size_t> option_counts;
    for (const QuestionRecord& r : records) {
        grouped.emplace(r.question_id, std::vector<std::vector<GroundedProposal>>(r.options.size()));
        option_counts.emplace(r.question_id, r.options.size());
    }
    for (const OptionProposals& row : rows) {
        auto it = grouped.find(row.question_id);
        if (it == grouped.end()) {
            throw schema_error("proposals.jsonl: unknown question '" + row.question_id + "'");
        }
        if (row.option_index < 0 ||
            static_cast<std::size_t>(row.option_index) >= option_counts.at(row.question_id)) {
            throw schema_error("proposals.jsonl: question '" + row.question_id +
                               "': option_index " + std::to_string(row.option_index) +
                               " out of range");
        }
        it->second[static_cast<std::size_t>(row.option_index)] = row.proposals;
    }
    return grouped;
}

using AnswerFn = std::function<int(const QuestionRecord&,
                                   const std::vector<std::vector<GroundedProposal>>&,
                                   const std::vector<FusedInterval>&)>;

/// Scores one corpus at a given (top_k, fusion) setting. `fused_override`
/// supplies stage-artifact fusion results when present; otherwise fusion is
/// recomputed from the truncated proposals (the two agree because artifact
/// numbers round-trip exactly).
std::vector<QuestionResult> score_corpus(
    const std::vector<QuestionRecord>& records,
    const std::map<std::string, std::vector<std::vector<GroundedProposal>>>& grouped,
    const FusionConfig& fusion, const AnswerFn& answer,
    const std::map<std::string, std::vector<FusedInterval>>* fused_override = nullptr) {
    std::vector<QuestionResult> results;
    results.reserve(records.size());
    for (const QuestionRecord& record : records) {
        std::vector<std::vector<GroundedProposal>> per_option = grouped.at(record.question_id);
        for (auto& option : per_option) option = top_k_by_rank(std::move(option), fusion.top_k);
        std::vector<FusedInterval> fused;
        if (fused_override) {
            auto it = fused_override->find(record.question_id);
            if (it == fused_override->end()) {
                throw schema_error("fused.jsonl: no entry for question '" + record.question_id + "'");
            }
            fused = it->second;
        } else {
            fused = fuse_question_scored(per_option, fusion);
        }
        const int predicted = answer(record, per_option, fused);
        QuestionResult result = score_question(pick_prediction(fused), record.gt_spans, predicted,
                                               record.answer_index);
        result.question_id = record.question_id;
        result.type = record.type;
        results.push_back(std::move(result));
    }
    return results;
}

std::string threshold_label(double threshold) {
    std::ostringstream out;
    out << threshold;
    return out.str();
}

json report_to_json(const EvalReport& report) {
    json j;
    j["schema_version"] = 1;
    j["n_questions"] = report.n_questions;
    j["n_annotated"] = report.n_annotated;
    j["acc_qa"] = report.acc_qa;
    j["acc_gqa"] = report.acc_gqa;
    j["miop"] = report.miop;
    j["miou"] = report.miou;
    json iop_at = json::object();
    for (const auto& [threshold, rate] : report.iop_at) iop_at[threshold_label(threshold)] = rate;
    j["iop_at"] = std::move(iop_at);
    json iou_at = json::object();
    for (const auto& [threshold, rate] : report.iou_at) iou_at[threshold_label(threshold)] = rate;
    j["iou_at"] = std::move(iou_at);
    json per_type = json::object();
    for (const auto& [type, acc] : report.per_type) per_type[to_string(type)] = acc;
    j["per_type"] = std::move(per_type);
    return j;
}

/// Best achievable grounding if a perfect selector picked from the fused
/// intervals: per annotated question the max iop/iou over every fused
/// interval, averaged over annotated questions (with hit rates at the same
/// thresholds as the main report).
json oracle_best_json(const std::vector<QuestionRecord>& records,
                      const std::map<std::string, std::vector<FusedInterval>>& fused_by_question) {
    const std::vector<double> thresholds = {0.3, 0.5};
    double sum_iop = 0.0, sum_iou = 0.0;
    std::map<double, int> iop_hits, iou_hits;
    int annotated = 0;
    for (const QuestionRecord& record : records) {
        if (!record.annotated()) continue;
        ++annotated;
        double best_iop = 0.0, best_iou = 0.0;
        auto it = fused_by_question.find(record.question_id);
        if (it != fused_by_question.end()) {
            for (const FusedInterval& f : it->second) {
                for (const TimeInterval& gt : record.gt_spans) {
                    if (f.interval.length() > 0.0) best_iop = std::max(best_iop, iop(f.interval, gt));
                    if (f.interval.length() > 0.0 || gt.length() > 0.0) {
                        best_iou = std::max(best_iou, iou(f.interval, gt));
                    }
                }
            }
        }
        sum_iop += best_iop;
        sum_iou += best_iou;
        for (double t : thresholds) {
            if (best_iop >= t) ++iop_hits[t];
            if (best_iou >= t) ++iou_hits[t];
        }
    }
    json j;
    j["miop"] = annotated ? sum_iop / annotated : 0.0;
    j["miou"] = annotated ? sum_iou / annotated : 0.0;
    json iop_at = json::object(), iou_at = json::object();
    for (double t : thresholds) {
        iop_at[threshold_label(t)] = annotated ? static_cast<double>(iop_hits[t]) / annotated : 0.0;
        iou_at[threshold_label(t)] = annotated ? static_cast<double>(iou_hits[t]) / annotated : 0.0;
    }
    j["iop_at"] = std::move(iop_at);
    j["iou_at"] = std::move(iou_at);
    return j;
}

double metric_from_report(const EvalReport& report, const std::string& metric) {
    if (metric == "acc_qa") return report.acc_qa;
    if (metric == "acc_gqa") return report.acc_gqa;
    if (metric == "miop") return report.miop;
    if (metric == "miou") return report.miou;
    const auto lookup = [&](const std::map<double, double>& table,
                            const std::string& name) -> double {
        const std::string suffix = metric.substr(name.size() + 1);
        for (const auto& [threshold, rate] : table) {
            if (threshold_label(threshold) == suffix) return rate;
        }
        throw schema_error("unknown metric threshold in '" + metric + "'");
    };
    if (metric.rfind("iop@", 0) == 0) return lookup(report.iop_at, "iop");
    if (metric.rfind("iou@", 0) == 0) return lookup(report.iou_at, "iou");
    throw schema_error("unknown metric '" + metric +
                       "' (expected acc_qa, acc_gqa, miop, miou, iop@T or iou@T)");
}

AnswerFn make_answer_fn(const PipelineConfig& cfg,
                        const std::map<std::string, std::vector<std::string>>* descriptions,
                        const std::map<std::string, std::vector<double>>* frame_times) {
    if (cfg.answer_command.empty()) {
        return [](const QuestionRecord&, const std::vector<std::vector<GroundedProposal>>& options,
                  const std::vector<FusedInterval>& fused) {
            return stub_answer(options, fused);
        };
    }
    std::string command = cfg.answer_command;
    return [command, descriptions, frame_times](
               const QuestionRecord& record, const std::vector<std::vector<GroundedProposal>>&,
               const std::vector<FusedInterval>&) {
        std::vector<std::string> descs;
        if (descriptions) {
            auto it = descriptions->find(record.question_id);
            if (it != descriptions->end()) descs = it->second;
        }
        std::vector<double> times;
        if (frame_times) {
            auto it = frame_times->find(record.question_id);
            if (it != frame_times->end()) times = it->second;
        }
        return external_answer(command, record, times, descs);
    };
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

std::filesystem::path PipelineConfig::cache_directory() const {
    return cache_dir.empty() ? stage_dir / "cache" : cache_dir;
}

PipelineConfig load_config(const std::filesystem::path& config_path) {
    const std::string text = read_file(config_path); // missing_upstream_error if absent
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(path_string(config_path) + ": " + e.what());
    }
    if (!j.is_object()) throw schema_error("config: expected a JSON object");
    reject_unknown_keys(j,
                        {"dataset", "features", "weights", "stage_dir", "cache_dir", "fusion",
                         "sampling", "fps", "parallelism", "stub", "stub_mode", "stub_noise",
                         "stub_seed", "answer_command"},
                        "");

    const std::filesystem::path base = config_path.parent_path();
    PipelineConfig cfg;
    if (!j.contains("dataset")) config_fail("dataset", "required");
    cfg.dataset_path = resolve_input(base, get_config_string(j.at("dataset"), "dataset"));
    if (j.contains("features")) {
        cfg.features_path = resolve_input(base, get_config_string(j.at("features"), "features"));
    }
    if (j.contains("weights")) {
        cfg.weights_path = resolve_input(base, get_config_string(j.at("weights"), "weights"));
    }
    if (j.contains("stage_dir")) cfg.stage_dir = get_config_string(j.at("stage_dir"), "stage_dir");
    if (j.contains("cache_dir")) cfg.cache_dir = get_config_string(j.at("cache_dir"), "cache_dir");

    if (j.contains("fusion")) {
        const json& f = j.at("fusion");
        if (!f.is_object()) config_fail("fusion", "expected an object");
        reject_unknown_keys(f, {"tau_intra", "tau_inter", "top_k", "nms_threshold"}, "fusion");
        if (f.contains("tau_intra")) {
            cfg.fusion.tau_intra = get_config_number(f.at("tau_intra"), "fusion.tau_intra");
        }
        if (f.contains("tau_inter")) {
            cfg.fusion.tau_inter = get_config_number(f.at("tau_inter"), "fusion.tau_inter");
        }
        if (f.contains("top_k")) {
            cfg.fusion.top_k = get_config_int(f.at("top_k"), "fusion.top_k");
            if (cfg.fusion.top_k < 1) config_fail("fusion.top_k", "must be >= 1");
        }
        if (f.contains("nms_threshold")) {
            cfg.fusion.nms_threshold =
                get_config_number(f.at("nms_threshold"), "fusion.nms_threshold");
        }
    }
    if (j.contains("sampling")) {
        const json& s = j.at("sampling");
        if (!s.is_object()) config_fail("sampling", "expected an object");
        reject_unknown_keys(s, {"strategy", "k_frames", "seed"}, "sampling");
        if (s.contains("strategy")) {
            cfg.sampling.strategy =
                sampling_strategy_from_string(get_config_string(s.at("strategy"), "sampling.strategy"));
        }
        if (s.contains("k_frames")) {
            cfg.sampling.k_frames = get_config_int(s.at("k_frames"), "sampling.k_frames");
            if (cfg.sampling.k_frames < 1) config_fail("sampling.k_frames", "must be >= 1");
        }
        if (s.contains("seed")) {
            if (!s.at("seed").is_number_integer()) config_fail("sampling.seed", "expected an integer");
            cfg.sampling.seed = s.at("seed").get<std::uint64_t>();
        }
    }
    if (j.contains("fps")) {
        cfg.fps = get_config_number(j.at("fps"), "fps");
        if (cfg.fps <= 0.0) config_fail("fps", "must be > 0");
    }
    if (j.contains("parallelism")) {
        cfg.parallelism = get_config_int(j.at("parallelism"), "parallelism");
        if (cfg.parallelism < 1) config_fail("parallelism", "must be >= 1");
    }
    if (j.contains("stub")) {
        if (!j.at("stub").is_boolean()) config_fail("stub", "expected a boolean");
        cfg.stub = j.at("stub").get<bool>();
    }
    if (j.contains("stub_mode")) {
        cfg.stub_mode =
            stub_proposal_mode_from_string(get_config_string(j.at("stub_mode"), "stub_mode"));
    }
    if (j.contains("stub_noise")) {
        cfg.stub_noise = get_config_number(j.at("stub_noise"), "stub_noise");
        if (cfg.stub_noise < 0.0) config_fail("stub_noise", "must be >= 0");
    }
    if (j.contains("stub_seed")) {
        if (!j.at("stub_seed").is_number_integer()) config_fail("stub_seed", "expected an integer");
        cfg.stub_seed = j.at("stub_seed").get<std::uint64_t>();
    }
    if (j.contains("answer_command")) {
        cfg.answer_command = get_config_string(j.at("answer_command"), "answer_command");
    }
    return cfg;
}

std::string config_hash(const PipelineConfig& cfg) {
    json j;
    j["dataset"] = path_string(cfg.dataset_path);
    j["features"] = path_string(cfg.features_path);
    j["weights"] = path_string(cfg.weights_path);
    j["stage_dir"] = path_string(cfg.stage_dir);
    j["cache_dir"] = path_string(cfg.cache_directory());
    j["fusion"] = {{"tau_intra", cfg.fusion.tau_intra},
                   {"tau_inter", cfg.fusion.tau_inter},
                   {"top_k", cfg.fusion.top_k},
                   {"nms_threshold", cfg.fusion.nms_threshold}};
    j["sampling"] = {{"strategy", to_string(cfg.sampling.strategy)},
                     {"k_frames", cfg.sampling.k_frames},
                     {"seed", cfg.sampling.seed}};
    j["fps"] = cfg.fps;
    j["parallelism"] = cfg.parallelism;
    j["stub"] = cfg.stub;
    j["stub_mode"] = to_string(cfg.stub_mode);
    j["stub_noise"] = cfg.stub_noise;
    j["stub_seed"] = cfg.stub_seed;
    j["answer_command"] = cfg.answer_command;
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Artifact readers

std::vector<RewrittenQuery> read_rewrites(const std::filesystem::path& stage_dir) {
    const std::filesystem::path path = stage_dir / "rewrites.jsonl";
    require_artifact(path, "rewrite");
    std::vector<RewrittenQuery> out;
    for_each_line(path, [&](std::size_t lineno, const std::string& line) {
        json j = parse_artifact_line(path, lineno, line);
        RewrittenQuery r;
        r.question_id = artifact_string(j, path, lineno, "question_id");
        r.option_index = static_cast<int>(artifact_number(j, path, lineno, "option_index"));
        r.description = artifact_string(j, path, lineno, "description");
        const std::string source = artifact_string(j, path, lineno, "source");
        if (source == "llm") {
            r.source = RewrittenQuery::provenance::llm;
        } else if (source == "cache") {
            r.source = RewrittenQuery::provenance::cache;
        } else if (source == "stub") {
            r.source = RewrittenQuery::provenance::stub;
        } else {
            artifact_fail(path, lineno, "field 'source': unknown provenance '" + source + "'");
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<OptionProposals> read_proposals(const std::filesystem::path& stage_dir) {
    const std::filesystem::path path = stage_dir / "proposals.jsonl";
    require_artifact(path, "ground");
    std::vector<OptionProposals> out;
    for_each_line(path, [&](std::size_t lineno, const std::string& line) {
        json j = parse_artifact_line(path, lineno, line);
        OptionProposals row;
        row.question_id = artifact_string(j, path, lineno, "question_id");
        row.option_index = static_cast<int>(artifact_number(j, path, lineno, "option_index"));
        if (!j.contains("proposals") || !j.at("proposals").is_array()) {
            artifact_fail(path, lineno, "field 'proposals': expected an array");
        }
        for (const json& p : j.at("proposals")) {
            GroundedProposal gp;
            gp.interval.t_start = artifact_number(p, path, lineno, "t_start");
            gp.interval.t_end = artifact_number(p, path, lineno, "t_end");
            gp.score = artifact_number(p, path, lineno, "score");
            gp.rank = static_cast<int>(artifact_number(p, path, lineno, "rank"));
            gp.option_index = row.option_index;
            row.proposals.push_back(gp);
        }
        out.push_back(std::move(row));
    });
    return out;
}

std::vector<QuestionFusion> read_fused(const std::filesystem::path& stage_dir) {
    const std::filesystem::path path = stage_dir / "fused.jsonl";
    require_artifact(path, "fuse");
    std::vector<QuestionFusion> out;
    for_each_line(path, [&](std::size_t lineno, const std::string& line) {
        json j = parse_artifact_line(path, lineno, line);
        QuestionFusion row;
        row.question_id = artifact_string(j, path, lineno, "question_id");
        if (!j.contains("intervals") || !j.at("intervals").is_array()) {
            artifact_fail(path, lineno, "field 'intervals': expected an array");
        }
        for (const json& f : j.at("intervals")) {
            FusedInterval fi;
            fi.interval.t_start = artifact_number(f, path, lineno, "t_start");
            fi.interval.t_end = artifact_number(f, path, lineno, "t_end");
            fi.score = artifact_number(f, path, lineno, "score");
            if (!f.contains("options") || !f.at("options").is_array()) {
                artifact_fail(path, lineno, "field 'options': expected an array");
            }
            for (const json& o : f.at("options")) {
                if (!o.is_number_integer()) artifact_fail(path, lineno, "field 'options': non-integer");
                fi.options.push_back(o.get<int>());
            }
            row.intervals.push_back(std::move(fi));
        }
        out.push_back(std::move(row));
    });
    return out;
}

std::vector<QuestionFrames> read_frames(const std::filesystem::path& stage_dir) {
    const std::filesystem::path path = stage_dir / "frames.jsonl";
    require_artifact(path, "sample");
    std::vector<QuestionFrames> out;
    for_each_line(path, [&](std::size_t lineno, const std::string& line) {
        json j = parse_artifact_line(path, lineno, line);
        QuestionFrames row;
        row.question_id = artifact_string(j, path, lineno, "question_id");
        if (!j.contains("times") || !j.at("times").is_array()) {
            artifact_fail(path, lineno, "field 'times': expected an array");
        }
        for (const json& t : j.at("times")) {
            if (!t.is_number()) artifact_fail(path, lineno, "field 'times': non-numeric");
            row.times.push_back(t.get<double>());
        }
        if (!j.contains("frame_indices") || !j.at("frame_indices").is_array()) {
            artifact_fail(path, lineno, "field 'frame_indices': expected an array");
        }
        for (const json& f : j.at("frame_indices")) {
            if (!f.is_number_integer()) {
                artifact_fail(path, lineno, "field 'frame_indices': non-integer");
            }
            row.frame_indices.push_back(f.get<long>());
        }
        out.push_back(std::move(row));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Offline stubs

std::vector<GroundedProposal> stub_ground_option(const QuestionRecord& record, int option_index,
                                                 stub_proposal_mode mode, double noise,
                                                 std::uint64_t seed) {
    const double base =
        option_index == record.answer_index ? 0.9 : 0.5 - 0.02 * static_cast<double>(option_index);
    std::vector<GroundedProposal> out;
    if (record.gt_spans.empty()) {
        out.push_back({TimeInterval{0.0, record.duration_s}, base, option_index, 0});
        return out;
    }
    int piece = 0;
    for (const TimeInterval& span : record.gt_spans) {
        std::vector<TimeInterval> pieces;
        if (mode == stub_proposal_mode::spans) {
            pieces = {span};
        } else {
            const double len = span.length();
            pieces = {TimeInterval{span.t_start, span.t_start + 0.4 * len},
                      TimeInterval{span.t_start + 0.2 * len, span.t_end},
                      TimeInterval{span.t_start, span.t_end}};
        }
        for (TimeInterval p : pieces) {
            if (noise > 0.0) {
                const std::uint64_t h =
                    fnv1a64(std::to_string(seed) + "/" + record.question_id + "/" +
                            std::to_string(option_index) + "/" + std::to_string(piece));
                std::mt19937_64 gen(h);
                p.t_start += uniform(gen, -noise, noise);
                p.t_end += uniform(gen, -noise, noise);
            }
            p.t_start = std::clamp(p.t_start, 0.0, record.duration_s);
            p.t_end = std::clamp(p.t_end, 0.0, record.duration_s);
            if (p.t_end < p.t_start) std::swap(p.t_start, p.t_end);
            out.push_back({p, base - 0.01 * piece, option_index, piece});
            ++piece;
        }
    }
    return out;
}

int stub_answer(const std::vector<std::vector<GroundedProposal>>& per_option,
                const std::vector<FusedInterval>& fused) {
    int best = 0;
    double best_score = 0.0;
    for (std::size_t o = 0; o < per_option.size(); ++o) {
        double score = 0.0;
        for (const GroundedProposal& p : per_option[o]) {
            double covered = 0.0;
            for (const FusedInterval& f : fused) covered += overlap(p.interval, f.interval);
            score += p.score * covered;
        }
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(o);
        }
    }
    return best;
}

int external_answer(const std::string& command, const QuestionRecord& record,
                    const std::vector<double>& frame_times,
                    const std::vector<std::string>& descriptions) {
    json request;
    request["question"] = record.question;
    request["options"] = record.options;
    request["timestamps"] = frame_times;
    request["descriptions"] = descriptions;
    const std::string payload = request.dump() + "\n";

    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2] = {-1, -1};
    int from_child[2] = {-1, -1};
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw transport_error(std::string("answer command: pipe failed: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) {
        throw transport_error(std::string("answer command: fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    std::size_t written = 0;
    while (written < payload.size()) {
        const ssize_t n = write(to_child[1], payload.data() + written, payload.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            break; // the child may legitimately exit without draining stdin
        }
        written += static_cast<std::size_t>(n);
    }
    close(to_child[1]);

    std::string response;
    char buf[4096];
    for (;;) {
        const ssize_t n = read(from_child[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        response.append(buf, static_cast<std::size_t>(n));
    }
    close(from_child[0]);

    int status = 0;
    if (waitpid(pid, &status, 0) < 0) {
        throw transport_error(std::string("answer command: waitpid failed: ") +
                              std::strerror(errno));
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw transport_error("answer command exited abnormally (status " + std::to_string(status) +
                              ")");
    }
    json parsed;
    try {
        parsed = json::parse(response);
    } catch (const json::parse_error& e) {
        throw transport_error(std::string("answer command: malformed response: ") + e.what());
    }
    if (!parsed.is_object() || !parsed.contains("answer_index") ||
        !parsed.at("answer_index").is_number_integer()) {
        throw transport_error("answer command: response missing integer 'answer_index'");
    }
    const int index = parsed.at("answer_index").get<int>();
    if (index < 0 || static_cast<std::size_t>(index) >= record.options.size()) {
        throw transport_error("answer command: answer_index " + std::to_string(index) +
                              " out of range");
    }
    return index;
}

// ---------------------------------------------------------------------------
// Stages

void run_rewrite_stage(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.stage_dir);
    IngestResult ingest = ingest_dataset(cfg.dataset_path);

    std::unique_ptr<ChatClient> owned;
    StubChatClient stub_client;
    ChatClient* inner = &stub_client;
    if (!cfg.stub) {
        owned = make_http_client_from_env();
        inner = owned.get();
    }
    CountingChatClient client(*inner);
    CorpusRewrites corpus =
        rewrite_corpus(ingest.records, client, cfg.cache_directory(), cfg.parallelism);

    // The artifact records where a description originated (stub vs llm), not
    // whether this particular run fetched it from the cache: cache keys mix in
    // the model id, so a cached entry always came from the same provider, and
    // keeping the volatile fetch path out of the file makes cold and warm
    // reruns byte-identical.
    const std::string origin = to_string(client.offline() ? RewrittenQuery::provenance::stub
                                                          : RewrittenQuery::provenance::llm);
    std::vector<json> lines;
    lines.reserve(corpus.rewrites.size());
    for (const RewrittenQuery& r : corpus.rewrites) {
        lines.push_back({{"question_id", r.question_id},
                         {"option_index", r.option_index},
                         {"description", r.description},
                         {"source", origin}});
    }
    write_jsonl(stage_path(cfg, "rewrites.jsonl"), lines);
    std::fprintf(stderr, "rewrite: %zu descriptions (%d upstream calls, %zu failures)\n",
                 corpus.rewrites.size(), client.calls(), corpus.failures.size());

    json failures = json::array();
    for (const RewriteFailure& f : corpus.failures) {
        failures.push_back({{"question_id", f.question_id},
                            {"option_index", f.option_index},
                            {"message", f.message}});
    }
    atomic_write_file(stage_path(cfg, "rewrite.failures.json"), failures.dump(2) + "\n");

    // No call counter here: cache hits make it vary between cold and warm
    // runs, and manifests must be rerun-stable.
    write_manifest(cfg, "rewrite", {{"dataset", cfg.dataset_path}},
                   {stage_path(cfg, "rewrites.jsonl"), stage_path(cfg, "rewrite.failures.json")},
                   json{{"model_id", client.model_id()},
                        {"n_failures", corpus.failures.size()},
                        {"n_rewrites", corpus.rewrites.size()}});

    if (!corpus.failures.empty()) {
        throw transport_error("rewrite: " + std::to_string(corpus.failures.size()) + " of " +
                              std::to_string(corpus.rewrites.size() + corpus.failures.size()) +
                              " items failed; see rewrite.failures.json");
    }
}

void run_ground_stage(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.stage_dir);
    IngestResult ingest = ingest_dataset(cfg.dataset_path);
    require_artifact(stage_path(cfg, "rewrites.jsonl"), "rewrite");

    struct Task {
        const QuestionRecord* record;
        int option;
    };
    std::vector<Task> tasks;
    for (const QuestionRecord& record : ingest.records) {
        for (std::size_t o = 0; o < record.options.size(); ++o) {
            tasks.push_back({&record, static_cast<int>(o)});
        }
    }
    std::vector<std::vector<GroundedProposal>> results(tasks.size());
    std::atomic<long> invocations{0};

    std::vector<std::pair<std::string, std::filesystem::path>> inputs = {
        {"dataset", cfg.dataset_path}, {"rewrites", stage_path(cfg, "rewrites.jsonl")}};
    json extra;
    if (cfg.stub) {
        extra = {{"grounding", "stub"},
                 {"stub_mode", to_string(cfg.stub_mode)},
                 {"stub_noise", cfg.stub_noise},
                 {"stub_seed", cfg.stub_seed}};
        parallel_for(tasks, cfg.parallelism, [&](std::size_t i, const Task& task) {
            invocations.fetch_add(1, std::memory_order_relaxed);
            results[i] = stub_ground_option(*task.record, task.option, cfg.stub_mode,
                                            cfg.stub_noise, cfg.stub_seed);
        });
    } else {
        if (cfg.features_path.empty()) {
            throw schema_error("config: field 'features': required for model grounding");
        }
        if (cfg.weights_path.empty()) {
            throw schema_error("config: field 'weights': required for model grounding");
        }
        const FeatureTable table = read_features(cfg.features_path);
        const GrounderWeights weights = load_weights(cfg.weights_path);
        extra = {{"grounding", "model"}};
        inputs.push_back({"features", cfg.features_path});
        inputs.push_back({"weights", cfg.weights_path});
        parallel_for(tasks, cfg.parallelism, [&](std::size_t i, const Task& task) {
            auto clips = table.clips.find(task.record->video_id);
            if (clips == table.clips.end()) {
                throw schema_error("features: no clips entry for video '" +
                                   task.record->video_id + "'");
            }
            const std::string query_id =
                task.record->question_id + "#" + std::to_string(task.option);
            auto query = table.queries.find(query_id);
            if (query == table.queries.end()) {
                throw schema_error("features: no query entry '" + query_id + "'");
            }
            invocations.fetch_add(1, std::memory_order_relaxed);
            results[i] = ground_query(clips->second, query->second, weights, cfg.fusion);
        });
    }

    std::vector<json> lines;
    lines.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        json proposals = json::array();
        for (const GroundedProposal& p : results[i]) {
            proposals.push_back({{"t_start", p.interval.t_start},
                                 {"t_end", p.interval.t_end},
                                 {"score", p.score},
                                 {"rank", p.rank}});
        }
        lines.push_back({{"question_id", tasks[i].record->question_id},
                         {"option_index", tasks[i].option},
                         {"proposals", std::move(proposals)}});
    }
    write_jsonl(stage_path(cfg, "proposals.jsonl"), lines);
    extra["grounder_invocations"] = invocations.load();
    write_manifest(cfg, "ground", inputs, {stage_path(cfg, "proposals.jsonl")}, std::move(extra));
}

void run_fuse_stage(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.stage_dir);
    IngestResult ingest = ingest_dataset(cfg.dataset_path);
    const auto grouped = group_proposals(ingest.records, read_proposals(cfg.stage_dir));

    std::vector<json> lines;
    lines.reserve(ingest.records.size());
    for (const QuestionRecord& record : ingest.records) {
        std::vector<std::vector<GroundedProposal>> per_option = grouped.at(record.question_id);
        for (auto& option : per_option) option = top_k_by_rank(std::move(option), cfg.fusion.top_k);
        const std::vector<FusedInterval> fused = fuse_question_scored(per_option, cfg.fusion);
        json intervals = json::array();
        for (const FusedInterval& f : fused) {
            intervals.push_back({{"t_start", f.interval.t_start},
                                 {"t_end", f.interval.t_end},
                                 {"score", f.score},
                                 {"options", f.options}});
        }
        lines.push_back({{"question_id", record.question_id}, {"intervals", std::move(intervals)}});
    }
    write_jsonl(stage_path(cfg, "fused.jsonl"), lines);
    write_manifest(cfg, "fuse",
                   {{"dataset", cfg.dataset_path},
                    {"proposals", stage_path(cfg, "proposals.jsonl")}},
                   {stage_path(cfg, "fused.jsonl")});
}

void run_sample_stage(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.stage_dir);
    IngestResult ingest = ingest_dataset(cfg.dataset_path);
    std::map<std::string, std::vector<FusedInterval>> fused_by_question;
    for (QuestionFusion& row : read_fused(cfg.stage_dir)) {
        fused_by_question.emplace(row.question_id, std::move(row.intervals));
    }

    std::vector<json> lines;
    lines.reserve(ingest.records.size());
    for (const QuestionRecord& record : ingest.records) {
        auto it = fused_by_question.find(record.question_id);
        if (it == fused_by_question.end()) {
            throw schema_error("fused.jsonl: no entry for question '" + record.question_id + "'");
        }
        std::vector<TimeInterval> focus;
        focus.reserve(it->second.size());
        for (const FusedInterval& f : it->second) focus.push_back(f.interval);
        SamplingPlan plan = cfg.sampling;
        plan.seed = cfg.sampling.seed ^ fnv1a64(record.question_id);
        const std::vector<double> times = sample(plan, focus, record.duration_s);
        lines.push_back({{"question_id", record.question_id},
                         {"times", times},
                         {"frame_indices", to_frame_indices(times, cfg.fps)}});
    }
    write_jsonl(stage_path(cfg, "frames.jsonl"), lines);
    write_manifest(cfg, "sample",
                   {{"dataset", cfg.dataset_path}, {"fused", stage_path(cfg, "fused.jsonl")}},
                   {stage_path(cfg, "frames.jsonl")});
}

EvalReport run_evaluate_stage(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.stage_dir);
    IngestResult ingest = ingest_dataset(cfg.dataset_path);

    std::map<std::string, std::vector<std::string>> descriptions;
    for (const RewrittenQuery& r : read_rewrites(cfg.stage_dir)) {
        auto& list = descriptions[r.question_id];
        if (list.size() <= static_cast<std::size_t>(r.option_index)) {
            list.resize(static_cast<std::size_t>(r.option_index) + 1);
        }
        list[static_cast<std::size_t>(r.option_index)] = r.description;
    }
    const auto grouped = group_proposals(ingest.records, read_proposals(cfg.stage_dir));
    std::map<std::string, std::vector<FusedInterval>> fused_by_question;
    for (QuestionFusion& row : read_fused(cfg.stage_dir)) {
        fused_by_question.emplace(row.question_id, std::move(row.intervals));
    }
    std::map<std::string, std::vector<double>> frame_times;
    for (QuestionFrames& row : read_frames(cfg.stage_dir)) {
        frame_times.emplace(row.question_id, std::move(row.times));
    }

    const AnswerFn answer = make_answer_fn(cfg, &descriptions, &frame_times);
    const std::vector<QuestionResult> results =
        score_corpus(ingest.records, grouped, cfg.fusion, answer, &fused_by_question);
    const EvalReport report = aggregate(results);

    json report_json = report_to_json(report);
    report_json["oracle_best"] = oracle_best_json(ingest.records, fused_by_question);
    atomic_write_file(stage_path(cfg, "report.json"), report_json.dump(2) + "\n");
    atomic_write_file(stage_path(cfg, "per_question.csv"), results_to_csv(results));

    write_manifest(cfg, "evaluate",
                   {{"dataset", cfg.dataset_path},
                    {"rewrites", stage_path(cfg, "rewrites.jsonl")},
                    {"proposals", stage_path(cfg, "proposals.jsonl")},
                    {"fused", stage_path(cfg, "fused.jsonl")},
                    {"frames", stage_path(cfg, "frames.jsonl")}},
                   {stage_path(cfg, "report.json"), stage_path(cfg, "per_question.csv")});
    return report;
}

EvalReport run_pipeline(const PipelineConfig& cfg) {
    run_rewrite_stage(cfg);
    run_ground_stage(cfg);
    run_fuse_stage(cfg);
    run_sample_stage(cfg);
    return run_evaluate_stage(cfg);
}

SweepResult run_sweep(const PipelineConfig& cfg, const std::vector<int>& top_k_values,
                      const std::vector<double>& tau_values, const std::string& metric) {
    if (top_k_values.empty() || tau_values.empty()) {
        throw degenerate_input_error("sweep: top_k and tau grids must be non-empty");
    }
    std::filesystem::create_directories(cfg.stage_dir);
    IngestResult ingest = ingest_dataset(cfg.dataset_path);
    const auto grouped = group_proposals(ingest.records, read_proposals(cfg.stage_dir));
    const AnswerFn answer = make_answer_fn(cfg, nullptr, nullptr);

    SweepResult result;
    result.metric = metric;
    result.top_k_values = top_k_values;
    result.tau_values = tau_values;
    for (int top_k : top_k_values) {
        if (top_k < 1) throw schema_error("sweep: top_k values must be >= 1");
        std::vector<double> row;
        for (double tau : tau_values) {
            FusionConfig fusion = cfg.fusion;
            fusion.top_k = top_k;
            fusion.tau_intra = tau;
            fusion.tau_inter = tau;
            const EvalReport report =
                aggregate(score_corpus(ingest.records, grouped, fusion, answer));
            row.push_back(metric_from_report(report, metric));
        }
        result.cells.push_back(std::move(row));
    }

    // The grid never re-grounds; surface the single grounding pass's counter.
    const std::filesystem::path ground_manifest = stage_path(cfg, "ground.manifest.json");
    if (std::filesystem::exists(ground_manifest)) {
        try {
            const json m = json::parse(read_file(ground_manifest));
            result.grounder_invocations = m.value("grounder_invocations", 0L);
        } catch (const json::parse_error&) {
            result.grounder_invocations = 0;
        }
    }

    json out;
    out["schema_version"] = 1;
    out["metric"] = result.metric;
    out["top_k_values"] = result.top_k_values;
    out["tau_values"] = result.tau_values;
    out["cells"] = result.cells;
    out["grounder_invocations"] = result.grounder_invocations;
    atomic_write_file(stage_path(cfg, "sweep.json"), out.dump(2) + "\n");
    write_manifest(cfg, "sweep",
                   {{"dataset", cfg.dataset_path},
                    {"proposals", stage_path(cfg, "proposals.jsonl")}},
                   {stage_path(cfg, "sweep.json")});
    return result;
}

// ---------------------------------------------------------------------------
// Gradient audit

namespace {

/// Draws until `candidate` produces a point far enough from every documented
/// kink of the loss under test.
template <typename Candidate>
auto draw_safe(std::mt19937_64& gen, const Candidate& candidate) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        auto drawn = candidate(gen);
        if (drawn.has_value()) return *drawn;
    }
    throw error(exit_code::internal, "gradcheck: failed to draw a kink-free point");
}

constexpr double kKinkMargin = 0.05;

/// The overlap loss only reports the true gradient on overlapping pairs (on
/// disjoint ones it reports the documented signed-gap pull while the clamped
/// value sits flat at 1), so the audit samples pairs that overlap solidly and
/// stay clear of endpoint ties.
bool interval_pair_safe(const TimeInterval& a, const TimeInterval& b) {
    const double inter = std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start);
    if (inter < kKinkMargin) return false;
    for (double pa : {a.t_start, a.t_end}) {
        for (double pb : {b.t_start, b.t_end}) {
            if (std::abs(pa - pb) < kKinkMargin) return false; // endpoint tie
        }
    }
    return true;
}

} // namespace

std::vector<GradcheckRow> run_gradcheck(std::uint64_t seed, int trials) {
    if (trials < 1) throw degenerate_input_error("gradcheck: trials must be >= 1");
    const double eps = 1e-6;
    std::vector<GradcheckRow> rows;

    {
        std::mt19937_64 gen(seed ^ fnv1a64("foreground"));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const double lambda = uniform(gen, 0.5, 2.0);
            const int label = (gen() & 1u) ? 1 : 0;
            const double f = uniform(gen, 0.05, 0.95);
            auto fn = [&](const std::vector<double>& x) {
                auto [loss, grad] = loss_foreground(x[0], label, lambda);
                return std::make_pair(loss, std::vector<double>{grad});
            };
            worst = std::max(worst, finite_diff_check(fn, {f}, eps));
        }
        rows.push_back({"foreground_bce", worst});
    }

    {
        std::mt19937_64 gen(seed ^ fnv1a64("smooth_l1"));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const double beta = uniform(gen, 0.5, 2.0);
            const double target = uniform(gen, -3.0, 3.0);
            const double pred = draw_safe(gen, [&](std::mt19937_64& g) -> std::optional<double> {
                const double p = uniform(g, -3.0, 3.0);
                if (std::abs(std::abs(p - target) - beta) < kKinkMargin) return std::nullopt;
                return p;
            });
            auto fn = [&](const std::vector<double>& x) {
                auto [loss, grad] = smooth_l1(x[0], target, beta);
                return std::make_pair(loss, std::vector<double>{grad});
            };
            worst = std::max(worst, finite_diff_check(fn, {pred}, eps));
        }
        rows.push_back({"smooth_l1", worst});
    }

    {
        std::mt19937_64 gen(seed ^ fnv1a64("iou_1d"));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const auto [pred, target] =
                draw_safe(gen, [&](std::mt19937_64& g)
                                   -> std::optional<std::pair<TimeInterval, TimeInterval>> {
                    TimeInterval p{uniform(g, 0.0, 8.0), 0.0};
                    p.t_end = p.t_start + uniform(g, 0.3, 4.0);
                    TimeInterval q{uniform(g, 0.0, 8.0), 0.0};
                    q.t_end = q.t_start + uniform(g, 0.3, 4.0);
                    if (!interval_pair_safe(p, q)) return std::nullopt;
                    return std::make_pair(p, q);
                });
            auto fn = [&, target = target](const std::vector<double>& x) {
                auto [loss, grad] = loss_iou_1d(TimeInterval{x[0], x[1]}, target);
                return std::make_pair(loss, std::vector<double>{grad.first, grad.second});
            };
            worst = std::max(worst, finite_diff_check(fn, {pred.t_start, pred.t_end}, eps));
        }
        rows.push_back({"iou_1d", worst});
    }

    {
        std::mt19937_64 gen(seed ^ fnv1a64("boundary"));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            LossWeights w;
            w.lambda_l1 = uniform(gen, 0.5, 2.0);
            w.lambda_iou = uniform(gen, 0.5, 2.0);
            w.smooth_l1_beta = uniform(gen, 0.5, 1.5);
            const double center = uniform(gen, 4.0, 6.0);
            ClipTarget target;
            target.foreground_label = 1;
            target.offset_start = uniform(gen, -3.0, -0.3);
            target.offset_end = uniform(gen, 0.3, 3.0);
            target.target_interval =
                TimeInterval{center + target.offset_start, center + target.offset_end};
            const auto offsets =
                draw_safe(gen, [&](std::mt19937_64& g) -> std::optional<std::pair<double, double>> {
                    const double os = uniform(g, -3.0, -0.3);
                    const double oe = uniform(g, 0.3, 3.0);
                    if (std::abs(std::abs(os - target.offset_start) - w.smooth_l1_beta) <
                        kKinkMargin) {
                        return std::nullopt;
                    }
                    if (std::abs(std::abs(oe - target.offset_end) - w.smooth_l1_beta) <
                        kKinkMargin) {
                        return std::nullopt;
                    }
                    const TimeInterval derived{center + os, center + oe};
                    if (!interval_pair_safe(derived, target.target_interval)) return std::nullopt;
                    return std::make_pair(os, oe);
                });
            auto fn = [&](const std::vector<double>& x) {
                ClipPrediction pred;
                pred.offset_start = x[0];
                pred.offset_end = x[1];
                const BoundaryResult res = loss_boundary(pred, target, center, w);
                return std::make_pair(res.loss,
                                      std::vector<double>{res.d_offset_start, res.d_offset_end});
            };
            worst = std::max(worst, finite_diff_check(fn, {offsets.first, offsets.second}, eps));
        }
        rows.push_back({"boundary", worst});
    }

    {
        std::mt19937_64 gen(seed ^ fnv1a64("saliency"));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            LossWeights w;
            w.lambda_intra = uniform(gen, 0.5, 2.0);
            w.lambda_inter = uniform(gen, 0.5, 2.0);
            w.contrastive_temperature = uniform(gen, 0.05, 0.5);
            const std::size_t n = 6;
            std::vector<bool> mask(n, false);
            int positives = 0;
            for (std::size_t i = 0; i < n; ++i) {
                mask[i] = (gen() & 1u) != 0;
                positives += mask[i] ? 1 : 0;
            }
            if (positives == 0) mask[0] = true;
            std::vector<double> point;
            for (std::size_t i = 0; i < n; ++i) point.push_back(uniform(gen, -2.0, 2.0));
            const std::size_t n_cross = (t % 3 == 0) ? 0 : 3; // exercise the empty-inter branch
            for (std::size_t i = 0; i < n_cross; ++i) point.push_back(uniform(gen, -2.0, 2.0));
            auto fn = [&](const std::vector<double>& x) {
                const std::vector<double> scores(x.begin(), x.begin() + static_cast<long>(n));
                const std::vector<double> cross(x.begin() + static_cast<long>(n), x.end());
                const SaliencyResult res = loss_saliency(scores, mask, cross, w);
                std::vector<double> grad = res.d_scores;
                grad.insert(grad.end(), res.d_cross.begin(), res.d_cross.end());
                return std::make_pair(res.loss, grad);
            };
            worst = std::max(worst, finite_diff_check(fn, point, eps));
        }
        rows.push_back({"saliency", worst});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Bundled fixtures

namespace {

json feature_rows(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
    json out = json::array();
    for (std::size_t r = 0; r < rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < cols; ++c) {
            row.push_back(std::round(uniform(gen, -1.0, 1.0) * 1e4) / 1e4);
        }
        out.push_back(std::move(row));
    }
    return out;
}

json span_json(double s, double e) { return json::array({s, e}); }

} // namespace

void write_fixtures(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "synthetic");
    fs::create_directories(dir / "configs");

    const std::vector<std::string> kTypes = {"Tem", "Cau", "Des", "CW", "CH"};
    const std::vector<std::string> kQuestions = {
        "why did the chef lift the silver lid?",
        "what did the girl do after opening the door?",
        "how did the dog react when the bell rang?",
        "where was the cat before the lights went out?",
        "who picked up the red bucket near the fence?",
        "why did the rider slow down at the corner?",
        "what was the boy holding while he waved?",
        "how did the crowd respond to the final goal?",
        "where did the woman place the glass jar?",
        "who closed the window during the storm?",
    };
    const std::vector<std::vector<std::string>> kOptions = {
        {"to stir the soup", "to check the oven", "to taste the sauce", "to grab a towel",
         "to plate the dish"},
        {"she waved at the mailman", "she picked up the parcel", "she called the dog inside",
         "she closed it again", "she switched on the light"},
        {"it barked at the window", "it hid under the table", "it ran to the door",
         "it kept sleeping", "it chased its tail"},
        {"on the windowsill", "under the bed", "inside the basket", "behind the couch",
         "on the stairs"},
        {"the gardener", "the neighbour", "the delivery driver", "the older brother",
         "the girl in the raincoat"},
        {"the road was wet", "a dog crossed the track", "the chain slipped",
         "a marshal waved a flag", "the tire went flat"},
        {"a paper kite", "a blue balloon", "an ice cream cone", "a toy sailboat",
         "his father's hat"},
        {"they stood up and cheered", "they went silent", "they booed the referee",
         "they left the stands", "they waved their scarves"},
        {"on the top shelf", "next to the stove", "inside the cupboard", "on the counter",
         "by the sink"},
        {"the caretaker", "the tallest boy", "the shop owner", "the bus driver",
         "the woman upstairs"},
    };

    // Main corpus: 10 questions over 5 videos, evidence planted well inside
    // [0, 30] so small jitter never changes which span a proposal matches.
    std::string dataset;
    for (int k = 0; k < 10; ++k) {
        json rec;
        rec["video_id"] = "synth_v" + std::to_string(k / 2);
        rec["question_id"] = "synth_v" + std::to_string(k / 2) + "_q" + std::to_string(k);
        rec["question"] = kQuestions[static_cast<std::size_t>(k)];
        rec["options"] = kOptions[static_cast<std::size_t>(k)];
        rec["answer_index"] = (k * 3) % 5;
        rec["question_type"] = kTypes[static_cast<std::size_t>(k % 5)];
        rec["duration_s"] = 30.0;
        json spans = json::array();
        if (k % 2 == 0) {
            spans.push_back(span_json(3.0 + k, 9.0 + k));
        } else {
            spans.push_back(span_json(2.0 + k, 6.0 + k));
            spans.push_back(span_json(20.0 + k / 2, 26.0 + k / 2));
        }
        rec["gt_spans"] = std::move(spans);
        dataset += rec.dump() + "\n";
    }
    atomic_write_file(dir / "synthetic" / "dataset.jsonl", dataset);

    // Sweep corpus: every question carries the same [10, 20] span so the
    // decompose-mode grid has a hand-checkable closed form.
    std::string sweep_dataset;
    for (int k = 0; k < 10; ++k) {
        json rec;
        rec["video_id"] = "sweep_v" + std::to_string(k / 2);
        rec["question_id"] = "sweep_q" + std::to_string(k);
        rec["question"] = "what happened in segment " + std::to_string(k) + " of the recording?";
        rec["options"] = json::array({"a door opened", "a phone rang", "a light flickered",
                                      "a chair moved", "a curtain closed"});
        rec["answer_index"] = (k * 3) % 5;
        rec["question_type"] = kTypes[static_cast<std::size_t>(k % 5)];
        rec["duration_s"] = 30.0;
        rec["gt_spans"] = json::array({span_json(10.0, 20.0)});
        sweep_dataset += rec.dump() + "\n";
    }
    atomic_write_file(dir / "synthetic" / "sweep_dataset.jsonl", sweep_dataset);

    // Feature table sized for the bundled demo weights (d_in = 20): 12 clips
    // of 2.5 s per video and one 6-token table per (question, option).
    std::string features;
    for (int v = 0; v < 5; ++v) {
        const std::string video_id = "synth_v" + std::to_string(v);
        json rec;
        rec["kind"] = "clips";
        rec["video_id"] = video_id;
        rec["clip_duration_s"] = 2.5;
        json timestamps = json::array();
        for (int c = 0; c < 12; ++c) timestamps.push_back(1.25 + 2.5 * c);
        rec["timestamps"] = std::move(timestamps);
        std::mt19937_64 gen(fnv1a64("clips/" + video_id));
        rec["features"] = feature_rows(gen, 12, 20);
        features += rec.dump() + "\n";
    }
    for (int k = 0; k < 10; ++k) {
        for (int o = 0; o < 5; ++o) {
            const std::string query_id =
                "synth_v" + std::to_string(k / 2) + "_q" + std::to_string(k) + "#" +
                std::to_string(o);
            json rec;
            rec["kind"] = "query";
            rec["query_id"] = query_id;
            std::mt19937_64 gen(fnv1a64("query/" + query_id));
            rec["tokens"] = feature_rows(gen, 6, 20);
            features += rec.dump() + "\n";
        }
    }
    atomic_write_file(dir / "synthetic" / "features.jsonl", features);

    save_weights(dir / "toy_grounder.lead", make_toy_weights());

    const json fusion = {{"tau_intra", 0.3}, {"tau_inter", 0.3}, {"top_k", 5},
                         {"nms_threshold", 0.7}};
    const json sampling = {{"strategy", "hybrid"}, {"k_frames", 8}, {"seed", 7}};

    json stub_cfg;
    stub_cfg["dataset"] = "../synthetic/dataset.jsonl";
    stub_cfg["features"] = "../synthetic/features.jsonl";
    stub_cfg["weights"] = "../toy_grounder.lead";
    stub_cfg["fusion"] = fusion;
    stub_cfg["sampling"] = sampling;
    stub_cfg["fps"] = 4.0;
    stub_cfg["parallelism"] = 4;
    stub_cfg["stub"] = true;
    stub_cfg["stub_mode"] = "spans";
    stub_cfg["stub_noise"] = 0.0;
    stub_cfg["stub_seed"] = 0;
    atomic_write_file(dir / "configs" / "synthetic_stub.json", stub_cfg.dump(2) + "\n");

    json noise_cfg = stub_cfg;
    noise_cfg["stub_noise"] = 0.75;
    noise_cfg["stub_seed"] = 11;
    atomic_write_file(dir / "configs" / "synthetic_noise.json", noise_cfg.dump(2) + "\n");

    json sweep_cfg = stub_cfg;
    sweep_cfg["dataset"] = "../synthetic/sweep_dataset.jsonl";
    sweep_cfg["stub_mode"] = "decompose";
    sweep_cfg.erase("features");
    sweep_cfg.erase("weights");
    atomic_write_file(dir / "configs" / "sweep_decompose.json", sweep_cfg.dump(2) + "\n");
}

} // namespace leadqa
