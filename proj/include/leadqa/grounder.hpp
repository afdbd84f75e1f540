#pragma once

#include "leadqa/intervals.hpp"
#include "leadqa/objectives.hpp" // ClipPrediction

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace leadqa {

/// One video as L_v uniformly spaced clips: `timestamps` are clip centers,
/// `features` is the L_v x d_in visual feature matrix.
struct ClipSequence {
    std::string video_id;
    double clip_duration_s = 0.0;
    std::vector<double> timestamps;
    Eigen::MatrixXf features;
};

/// Validates the ClipSequence invariants (row/timestamp agreement, positive
/// clip length, uniform spacing within 1e-6). Throws schema_error.
void validate_clip_sequence(const ClipSequence& clips);

/// End of the last clip; the video duration used for interval clamping.
double video_duration(const ClipSequence& clips);

/// One query as L_q token embeddings (L_q x d_in).
struct QueryTokens {
    std::string query_id;
    Eigen::MatrixXf tokens;
};

/// Two-layer projection: out = relu(x * w1^T + b1) * w2^T + b2.
struct TwoLayerMlp {
    Eigen::MatrixXf w1; // d x d_in
    Eigen::RowVectorXf b1;
    Eigen::MatrixXf w2; // d x d
    Eigen::RowVectorXf b2;
};

/// Plain affine map: out = x * w^T + b.
struct LinearMap {
    Eigen::MatrixXf w;
    Eigen::RowVectorXf b;
};

/// One pre-norm transformer encoder layer: parameter-free LayerNorm, h-head
/// scaled dot-product self-attention (q/k/v projections bias-free, output
/// projection with bias), residual adds, then LayerNorm + ReLU feed-forward
/// with its own residual.
struct EncoderLayer {
    Eigen::MatrixXf wq, wk, wv; // d x d, bias-free
    Eigen::MatrixXf wo;         // d x d
    Eigen::RowVectorXf bo;
    Eigen::MatrixXf ff_w1; // d_ff x d
    Eigen::RowVectorXf ff_b1;
    Eigen::MatrixXf ff_w2; // d x d_ff
    Eigen::RowVectorXf ff_b2;
};

/// Width-3 1-D convolution over the clip axis with same-padding:
/// out[t] = sum_tap in[t + tap - 1] * taps[tap]^T + bias (missing neighbours
/// treated as zero rows). taps[tap] is out_channels x in_channels.
struct ConvLayer {
    std::array<Eigen::MatrixXf, 3> taps;
    Eigen::RowVectorXf bias;
};

/// Three-layer convolutional prediction head (ReLU between layers).
struct ConvHead {
    ConvLayer c1, c2, c3;
};

struct GrounderWeights {
    std::uint32_t d_in = 0;
    std::uint32_t d = 0;
    std::uint32_t h = 0;       // attention heads; d % h == 0
    std::uint32_t k = 0;       // encoder layers
    std::uint32_t max_len = 0; // positional table rows

    TwoLayerMlp video_proj;
    TwoLayerMlp text_proj;
    Eigen::RowVectorXf pool_vector; // attentive pooling scorer, length d
    Eigen::MatrixXf pos_embed;      // max_len x d
    Eigen::MatrixXf type_embed;     // 2 x d (row 0 video, row 1 text)
    std::vector<EncoderLayer> layers;
    ConvHead fg_head; // d -> d -> d -> 1
    ConvHead bd_head; // d -> d -> d -> 2 (start/end offset channels)
    LinearMap sal_video;
    LinearMap sal_sentence;
};

/// Two-layer MLP feature projection (rows preserved, columns -> d).
Eigen::MatrixXf project_features(const Eigen::MatrixXf& raw, const TwoLayerMlp& proj);

/// Softmax-weighted token pooling: scores = tokens * pool_vector^T, weights =
/// softmax(scores), output = weights^T * tokens (a convex combination).
Eigen::RowVectorXf attentive_pool(const Eigen::MatrixXf& tokens,
                                  const Eigen::RowVectorXf& pool_vector);

/// Joint encoding: adds positional embeddings (indexed over the concatenated
/// sequence) and modality-type embeddings to the projected inputs, runs k
/// pre-norm encoder layers over the concatenation, splits the result back
/// into (video rows, text rows).
std::pair<Eigen::MatrixXf, Eigen::MatrixXf> encode_joint(const Eigen::MatrixXf& video,
                                                         const Eigen::MatrixXf& text,
                                                         const GrounderWeights& w);

/// Per-clip predictions from the three heads: foreground probability
/// (conv stack + sigmoid), boundary offsets (dual-channel conv stack, clamped
/// so offset_start <= 0 <= offset_end), saliency
/// (cosine(video_row_proj, sentence_proj) + 1) / 2, with zero-norm vectors
/// scoring cosine 0.
std::vector<ClipPrediction> predict_heads(const Eigen::MatrixXf& video_out,
                                          const Eigen::RowVectorXf& sentence,
                                          const GrounderWeights& w, const ClipSequence& clips);

enum class proposal_score_mode { foreground_only, foreground_times_saliency };

/// Candidate intervals b_i = [t_i + offset_start, t_i + offset_end] for clips
/// whose foreground probability exceeds the cutoff, scored, clamped to
/// [0, video duration], NMS-filtered at cfg.nms_threshold, truncated to
/// cfg.top_k, ranks assigned 0..k-1 in score order.
std::vector<GroundedProposal> generate_proposals(
    const std::vector<ClipPrediction>& preds, const ClipSequence& clips,
    const FusionConfig& cfg, double foreground_cutoff = 0.5,
    proposal_score_mode mode = proposal_score_mode::foreground_times_saliency);

/// Full forward pass for one (video, query) pair: project both modalities,
/// pool the sentence vector from the projected tokens, joint-encode, run the
/// heads, emit proposals.
std::vector<GroundedProposal> ground_query(
    const ClipSequence& clips, const QueryTokens& query, const GrounderWeights& w,
    const FusionConfig& cfg, double foreground_cutoff = 0.5,
    proposal_score_mode mode = proposal_score_mode::foreground_times_saliency);

/// Binary weight file IO. Little-endian; magic "LEAD"; u32 version; u32
/// d_in/d/h/k/max_len; u32 tensor count; u32 CRC-32 of the tensor section;
/// then per tensor: u32 name length, name bytes, u32 ndim, u32 dims[],
/// f32 row-major payload. Loading validates magic/version/checksum, the
/// declared shapes, and d % h == 0; failures carry a weights_error_kind.
GrounderWeights load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const GrounderWeights& w);

/// Deterministic small random weights for fixtures and the bundled demo
/// model (seeded; identical bytes on every platform).
GrounderWeights make_toy_weights(std::uint64_t seed = 7, std::uint32_t d_in = 20,
                                 std::uint32_t d = 16, std::uint32_t h = 4,
                                 std::uint32_t k = 2, std::uint32_t max_len = 32,
                                 std::uint32_t d_ff = 32);

} // namespace leadqa
