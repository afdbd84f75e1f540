#include "leadqa/grounder.hpp"

#include "leadqa/errors.hpp"
#include "leadqa/rng.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

namespace leadqa {

namespace {

constexpr float kLayerNormEps = 1e-5f;

void require_cols(const Eigen::MatrixXf& m, Eigen::Index cols, const char* what) {
    if (m.cols() != cols) {
        throw dimension_error(std::string(what) + ": expected " + std::to_string(cols) +
                              " columns, got " + std::to_string(m.cols()));
    }
}

// Parameter-free per-row LayerNorm with population variance.
Eigen::MatrixXf layer_norm(const Eigen::MatrixXf& x) {
    Eigen::MatrixXf out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        float mean = x.row(r).mean();
        float var = (x.row(r).array() - mean).square().mean();
        out.row(r) = (x.row(r).array() - mean) / std::sqrt(var + kLayerNormEps);
    }
    return out;
}

// Row-wise stable softmax in place.
void softmax_rows(Eigen::MatrixXf& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        float mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

Eigen::MatrixXf self_attention(const Eigen::MatrixXf& x, const EncoderLayer& layer,
                               std::uint32_t heads) {
    const Eigen::Index d = x.cols();
    const Eigen::Index dh = d / heads;
    Eigen::MatrixXf q = x * layer.wq.transpose();
    Eigen::MatrixXf k = x * layer.wk.transpose();
    Eigen::MatrixXf v = x * layer.wv.transpose();
    Eigen::MatrixXf ctx(x.rows(), d);
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    for (std::uint32_t head = 0; head < heads; ++head) {
        auto qh = q.middleCols(head * dh, dh);
        auto kh = k.middleCols(head * dh, dh);
        auto vh = v.middleCols(head * dh, dh);
        Eigen::MatrixXf scores = qh * kh.transpose() * scale;
        softmax_rows(scores);
        ctx.middleCols(head * dh, dh) = scores * vh;
    }
    return (ctx * layer.wo.transpose()).rowwise() + layer.bo;
}

Eigen::MatrixXf feed_forward(const Eigen::MatrixXf& x, const EncoderLayer& layer) {
    Eigen::MatrixXf hidden =
        ((x * layer.ff_w1.transpose()).rowwise() + layer.ff_b1).cwiseMax(0.0f);
    return (hidden * layer.ff_w2.transpose()).rowwise() + layer.ff_b2;
}

// Width-3 same-padded 1-D convolution over the row (clip) axis.
Eigen::MatrixXf conv3(const Eigen::MatrixXf& x, const ConvLayer& layer) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index out_ch = layer.taps[0].rows();
    Eigen::MatrixXf out = Eigen::MatrixXf::Zero(rows, out_ch);
    for (Eigen::Index t = 0; t < rows; ++t) {
        Eigen::RowVectorXf acc = layer.bias;
        for (int tap = 0; tap < 3; ++tap) {
            Eigen::Index src = t + tap - 1;
            if (src < 0 || src >= rows) continue;
            acc += x.row(src) * layer.taps[static_cast<std::size_t>(tap)].transpose();
        }
        out.row(t) = acc;
    }
    return out;
}

Eigen::MatrixXf conv_head(const Eigen::MatrixXf& x, const ConvHead& head) {
    Eigen::MatrixXf h1 = conv3(x, head.c1).cwiseMax(0.0f);
    Eigen::MatrixXf h2 = conv3(h1, head.c2).cwiseMax(0.0f);
    return conv3(h2, head.c3);
}

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// ---------- weight-file serialization ----------

constexpr char kMagic[4] = {'L', 'E', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

struct TensorRef {
    std::string name;
    std::vector<std::uint32_t> dims;
    const Eigen::MatrixXf* mat = nullptr;      // 2-D tensors
    const Eigen::RowVectorXf* vec = nullptr;   // 1-D tensors
    const ConvLayer* conv = nullptr;           // 3-D tensors [3, out, in]
};

void append_u32(std::string& buf, std::uint32_t v) {
    char bytes[4];
    std::memcpy(bytes, &v, 4);
    buf.append(bytes, 4);
}

void append_f32(std::string& buf, float v) {
    char bytes[4];
    std::memcpy(bytes, &v, 4);
    buf.append(bytes, 4);
}

// Enumerate every tensor in canonical serialization order.
std::vector<TensorRef> tensor_table(const GrounderWeights& w) {
    std::vector<TensorRef> t;
    auto add_mat = [&](const std::string& name, const Eigen::MatrixXf& m) {
        t.push_back({name,
                     {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
                     &m,
                     nullptr,
                     nullptr});
    };
    auto add_vec = [&](const std::string& name, const Eigen::RowVectorXf& v) {
        t.push_back({name, {static_cast<std::uint32_t>(v.size())}, nullptr, &v, nullptr});
    };
    auto add_conv = [&](const std::string& name, const ConvLayer& c) {
        t.push_back({name + ".w",
                     {3, static_cast<std::uint32_t>(c.taps[0].rows()),
                      static_cast<std::uint32_t>(c.taps[0].cols())},
                     nullptr,
                     nullptr,
                     &c});
        add_vec(name + ".b", c.bias);
    };
    auto add_mlp = [&](const std::string& name, const TwoLayerMlp& m) {
        add_mat(name + ".w1", m.w1);
        add_vec(name + ".b1", m.b1);
        add_mat(name + ".w2", m.w2);
        add_vec(name + ".b2", m.b2);
    };
    add_mlp("video_proj", w.video_proj);
    add_mlp("text_proj", w.text_proj);
    add_vec("pool.vector", w.pool_vector);
    add_mat("pos_embed", w.pos_embed);
    add_mat("type_embed", w.type_embed);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const std::string p = "enc" + std::to_string(i);
        const EncoderLayer& l = w.layers[i];
        add_mat(p + ".wq", l.wq);
        add_mat(p + ".wk", l.wk);
        add_mat(p + ".wv", l.wv);
        add_mat(p + ".wo", l.wo);
        add_vec(p + ".bo", l.bo);
        add_mat(p + ".ff_w1", l.ff_w1);
        add_vec(p + ".ff_b1", l.ff_b1);
        add_mat(p + ".ff_w2", l.ff_w2);
        add_vec(p + ".ff_b2", l.ff_b2);
    }
    add_conv("fg.conv1", w.fg_head.c1);
    add_conv("fg.conv2", w.fg_head.c2);
    add_conv("fg.conv3", w.fg_head.c3);
    add_conv("bd.conv1", w.bd_head.c1);
    add_conv("bd.conv2", w.bd_head.c2);
    add_conv("bd.conv3", w.bd_head.c3);
    add_mat("sal.video.w", w.sal_video.w);
    add_vec("sal.video.b", w.sal_video.b);
    add_mat("sal.sent.w", w.sal_sentence.w);
    add_vec("sal.sent.b", w.sal_sentence.b);
    return t;
}

// Raw parsed tensor before shape validation.
struct RawTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data; // row-major
};

class Reader {
public:
    Reader(const std::string& bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

    std::uint32_t u32() {
        if (pos_ + 4 > bytes_.size()) {
            throw weights_error(weights_error_kind::corrupt, "weights file truncated");
        }
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    std::string str(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw weights_error(weights_error_kind::corrupt, "weights file truncated");
        }
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void f32_block(float* dst, std::size_t count) {
        if (pos_ + 4 * count > bytes_.size()) {
            throw weights_error(weights_error_kind::corrupt, "weights file truncated");
        }
        std::memcpy(dst, bytes_.data() + pos_, 4 * count);
        pos_ += 4 * count;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_;
};

Eigen::MatrixXf to_matrix(const RawTensor& t, std::uint32_t rows, std::uint32_t cols,
                          const std::string& name) {
    if (t.dims.size() != 2 || t.dims[0] != rows || t.dims[1] != cols) {
        throw weights_error(weights_error_kind::shape_mismatch,
                            "tensor '" + name + "' has unexpected shape");
    }
    Eigen::MatrixXf m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            m(r, c) = t.data[static_cast<std::size_t>(r) * cols + c];
        }
    }
    return m;
}

Eigen::RowVectorXf to_vector(const RawTensor& t, std::uint32_t size, const std::string& name) {
    if (t.dims.size() != 1 || t.dims[0] != size) {
        throw weights_error(weights_error_kind::shape_mismatch,
                            "tensor '" + name + "' has unexpected shape");
    }
    Eigen::RowVectorXf v(size);
    for (std::uint32_t i = 0; i < size; ++i) v(i) = t.data[i];
    return v;
}

ConvLayer to_conv(const RawTensor& w_t, const RawTensor& b_t, std::uint32_t out_ch,
                  std::uint32_t in_ch, const std::string& name) {
    if (w_t.dims.size() != 3 || w_t.dims[0] != 3 || w_t.dims[1] != out_ch ||
        w_t.dims[2] != in_ch) {
        throw weights_error(weights_error_kind::shape_mismatch,
                            "tensor '" + name + ".w' has unexpected shape");
    }
    ConvLayer layer;
    for (int tap = 0; tap < 3; ++tap) {
        Eigen::MatrixXf m(out_ch, in_ch);
        for (std::uint32_t r = 0; r < out_ch; ++r) {
            for (std::uint32_t c = 0; c < in_ch; ++c) {
                m(r, c) = w_t.data[(static_cast<std::size_t>(tap) * out_ch + r) * in_ch + c];
            }
        }
        layer.taps[static_cast<std::size_t>(tap)] = m;
    }
    layer.bias = to_vector(b_t, out_ch, name + ".b");
    return layer;
}

} // namespace

void validate_clip_sequence(const ClipSequence& clips) {
    if (clips.timestamps.empty() ||
        clips.features.rows() != static_cast<Eigen::Index>(clips.timestamps.size())) {
        throw schema_error("clip sequence '" + clips.video_id +
                           "': timestamps must match feature rows and be non-empty");
    }
    if (!(clips.clip_duration_s > 0.0)) {
        throw schema_error("clip sequence '" + clips.video_id +
                           "': clip_duration_s must be positive");
    }
    for (std::size_t i = 1; i < clips.timestamps.size(); ++i) {
        double gap = clips.timestamps[i] - clips.timestamps[i - 1];
        if (std::abs(gap - clips.clip_duration_s) > 1e-6) {
            throw schema_error("clip sequence '" + clips.video_id +
                               "': timestamps must be uniformly spaced by clip_duration_s");
        }
    }
}

double video_duration(const ClipSequence& clips) {
    if (clips.timestamps.empty()) return 0.0;
    return clips.timestamps.back() + clips.clip_duration_s / 2.0;
}

Eigen::MatrixXf project_features(const Eigen::MatrixXf& raw, const TwoLayerMlp& proj) {
    require_cols(raw, proj.w1.cols(), "project_features input");
    Eigen::MatrixXf hidden = ((raw * proj.w1.transpose()).rowwise() + proj.b1).cwiseMax(0.0f);
    return (hidden * proj.w2.transpose()).rowwise() + proj.b2;
}

Eigen::RowVectorXf attentive_pool(const Eigen::MatrixXf& tokens,
                                  const Eigen::RowVectorXf& pool_vector) {
    require_cols(tokens, pool_vector.size(), "attentive_pool tokens");
    if (tokens.rows() == 0) {
        throw empty_input_error("attentive_pool: no tokens");
    }
    Eigen::VectorXf scores = tokens * pool_vector.transpose();
    float mx = scores.maxCoeff();
    Eigen::VectorXf weights = (scores.array() - mx).exp();
    weights /= weights.sum();
    return weights.transpose() * tokens;
}

std::pair<Eigen::MatrixXf, Eigen::MatrixXf> encode_joint(const Eigen::MatrixXf& video,
                                                         const Eigen::MatrixXf& text,
                                                         const GrounderWeights& w) {
    const Eigen::Index d = static_cast<Eigen::Index>(w.d);
    require_cols(video, d, "encode_joint video");
    require_cols(text, d, "encode_joint text");
    const Eigen::Index l_v = video.rows();
    const Eigen::Index l_q = text.rows();
    if (l_v + l_q > w.pos_embed.rows()) {
        throw sequence_too_long_error(
            "encode_joint: sequence length " + std::to_string(l_v + l_q) +
            " exceeds positional table size " + std::to_string(w.pos_embed.rows()));
    }

    Eigen::MatrixXf x(l_v + l_q, d);
    for (Eigen::Index r = 0; r < l_v; ++r) {
        x.row(r) = video.row(r) + w.pos_embed.row(r) + w.type_embed.row(0);
    }
    for (Eigen::Index r = 0; r < l_q; ++r) {
        x.row(l_v + r) = text.row(r) + w.pos_embed.row(l_v + r) + w.type_embed.row(1);
    }

    for (const EncoderLayer& layer : w.layers) {
        x = x + self_attention(layer_norm(x), layer, w.h);
        x = x + feed_forward(layer_norm(x), layer);
    }
    return {x.topRows(l_v), x.bottomRows(l_q)};
}

std::vector<ClipPrediction> predict_heads(const Eigen::MatrixXf& video_out,
                                          const Eigen::RowVectorXf& sentence,
                                          const GrounderWeights& w,
                                          const ClipSequence& clips) {
    const Eigen::Index d = static_cast<Eigen::Index>(w.d);
    require_cols(video_out, d, "predict_heads video");
    if (sentence.size() != d) {
        throw dimension_error("predict_heads: sentence vector length mismatch");
    }
    if (video_out.rows() != static_cast<Eigen::Index>(clips.timestamps.size())) {
        throw dimension_error("predict_heads: clip count mismatch");
    }

    Eigen::MatrixXf fg_logits = conv_head(video_out, w.fg_head);  // L_v x 1
    Eigen::MatrixXf bd_raw = conv_head(video_out, w.bd_head);     // L_v x 2
    Eigen::MatrixXf v_proj =
        (video_out * w.sal_video.w.transpose()).rowwise() + w.sal_video.b;
    Eigen::RowVectorXf s_proj = sentence * w.sal_sentence.w.transpose() + w.sal_sentence.b;
    const float s_norm = s_proj.norm();

    std::vector<ClipPrediction> preds(static_cast<std::size_t>(video_out.rows()));
    for (Eigen::Index i = 0; i < video_out.rows(); ++i) {
        ClipPrediction& p = preds[static_cast<std::size_t>(i)];
        p.foreground = static_cast<double>(sigmoid(fg_logits(i, 0)));
        p.offset_start = static_cast<double>(std::min(bd_raw(i, 0), 0.0f));
        p.offset_end = static_cast<double>(std::max(bd_raw(i, 1), 0.0f));
        float v_norm = v_proj.row(i).norm();
        float cosine =
            (v_norm == 0.0f || s_norm == 0.0f)
                ? 0.0f
                : (v_proj.row(i) * s_proj.transpose())(0, 0) / (v_norm * s_norm);
        p.saliency = std::clamp((static_cast<double>(cosine) + 1.0) / 2.0, 0.0, 1.0);
    }
    return preds;
}

std::vector<GroundedProposal> generate_proposals(const std::vector<ClipPrediction>& preds,
                                                 const ClipSequence& clips,
                                                 const FusionConfig& cfg,
                                                 double foreground_cutoff,
                                                 proposal_score_mode mode) {
    if (preds.size() != clips.timestamps.size()) {
        throw dimension_error("generate_proposals: prediction count mismatch");
    }
    const double duration = video_duration(clips);
    std::vector<GroundedProposal> candidates;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const ClipPrediction& p = preds[i];
        if (!(p.foreground > foreground_cutoff)) continue;
        double lo = std::clamp(clips.timestamps[i] + p.offset_start, 0.0, duration);
        double hi = std::clamp(clips.timestamps[i] + p.offset_end, 0.0, duration);
        double score = mode == proposal_score_mode::foreground_only
                           ? p.foreground
                           : p.foreground * p.saliency;
        candidates.push_back({TimeInterval{lo, hi}, std::clamp(score, 0.0, 1.0), 0, 0});
    }
    std::vector<GroundedProposal> kept = nms(candidates, cfg.nms_threshold);
    if (static_cast<int>(kept.size()) > cfg.top_k) {
        kept.resize(static_cast<std::size_t>(cfg.top_k));
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        kept[i].rank = static_cast<int>(i);
    }
    return kept;
}

std::vector<GroundedProposal> ground_query(const ClipSequence& clips, const QueryTokens& query,
                                           const GrounderWeights& w, const FusionConfig& cfg,
                                           double foreground_cutoff,
                                           proposal_score_mode mode) {
    Eigen::MatrixXf video = project_features(clips.features, w.video_proj);
    Eigen::MatrixXf text = project_features(query.tokens, w.text_proj);
    Eigen::RowVectorXf sentence = attentive_pool(text, w.pool_vector);
    auto [video_out, text_out] = encode_joint(video, text, w);
    (void)text_out;
    auto preds = predict_heads(video_out, sentence, w, clips);
    return generate_proposals(preds, clips, cfg, foreground_cutoff, mode);
}

void save_weights(const std::filesystem::path& path, const GrounderWeights& w) {
    std::string payload;
    for (const TensorRef& t : tensor_table(w)) {
        append_u32(payload, static_cast<std::uint32_t>(t.name.size()));
        payload += t.name;
        append_u32(payload, static_cast<std::uint32_t>(t.dims.size()));
        for (std::uint32_t dim : t.dims) append_u32(payload, dim);
        if (t.mat) {
            for (Eigen::Index r = 0; r < t.mat->rows(); ++r) {
                for (Eigen::Index c = 0; c < t.mat->cols(); ++c) {
                    append_f32(payload, (*t.mat)(r, c));
                }
            }
        } else if (t.vec) {
            for (Eigen::Index i = 0; i < t.vec->size(); ++i) append_f32(payload, (*t.vec)(i));
        } else {
            for (const Eigen::MatrixXf& tap : t.conv->taps) {
                for (Eigen::Index r = 0; r < tap.rows(); ++r) {
                    for (Eigen::Index c = 0; c < tap.cols(); ++c) {
                        append_f32(payload, tap(r, c));
                    }
                }
            }
        }
    }

    std::string out;
    out.append(kMagic, 4);
    append_u32(out, kVersion);
    append_u32(out, w.d_in);
    append_u32(out, w.d);
    append_u32(out, w.h);
    append_u32(out, w.k);
    append_u32(out, w.max_len);
    append_u32(out, static_cast<std::uint32_t>(tensor_table(w).size()));
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0, reinterpret_cast<const Bytef*>(payload.data()),
                static_cast<uInt>(payload.size())));
    append_u32(out, crc);
    out += payload;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw weights_error(weights_error_kind::missing_file,
                            "cannot open '" + path.string() + "' for writing");
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

GrounderWeights load_weights(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw weights_error(weights_error_kind::missing_file,
                            "weights file not found: " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 36 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw weights_error(weights_error_kind::corrupt, "bad magic or truncated header");
    }
    Reader header(bytes, 4);
    if (header.u32() != kVersion) {
        throw weights_error(weights_error_kind::corrupt, "unsupported weights version");
    }
    GrounderWeights w;
    w.d_in = header.u32();
    w.d = header.u32();
    w.h = header.u32();
    w.k = header.u32();
    w.max_len = header.u32();
    const std::uint32_t tensor_count = header.u32();
    const std::uint32_t crc_expect = header.u32();

    if (w.d == 0 || w.h == 0 || w.d % w.h != 0) {
        throw weights_error(weights_error_kind::shape_mismatch,
                            "header dims invalid: d=" + std::to_string(w.d) +
                                " not divisible by h=" + std::to_string(w.h));
    }

    constexpr std::size_t kHeaderSize = 4 + 4 * 8;
    std::uint32_t crc_actual = static_cast<std::uint32_t>(
        ::crc32(0, reinterpret_cast<const Bytef*>(bytes.data() + kHeaderSize),
                static_cast<uInt>(bytes.size() - kHeaderSize)));
    if (crc_actual != crc_expect) {
        throw weights_error(weights_error_kind::corrupt, "payload checksum mismatch");
    }

    Reader r(bytes, kHeaderSize);
    std::map<std::string, RawTensor> tensors;
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        std::uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        RawTensor t;
        std::uint32_t ndim = r.u32();
        if (ndim == 0 || ndim > 3) {
            throw weights_error(weights_error_kind::corrupt,
                                "tensor '" + name + "' has invalid rank");
        }
        std::size_t count = 1;
        for (std::uint32_t dim = 0; dim < ndim; ++dim) {
            t.dims.push_back(r.u32());
            count *= t.dims.back();
        }
        t.data.resize(count);
        r.f32_block(t.data.data(), count);
        if (!tensors.emplace(name, std::move(t)).second) {
            throw weights_error(weights_error_kind::corrupt, "duplicate tensor '" + name + "'");
        }
    }
    if (!r.at_end()) {
        throw weights_error(weights_error_kind::corrupt, "trailing bytes after tensors");
    }

    auto take = [&](const std::string& name) -> RawTensor {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw weights_error(weights_error_kind::corrupt, "missing tensor '" + name + "'");
        }
        RawTensor t = std::move(it->second);
        tensors.erase(it);
        return t;
    };

    auto take_mlp = [&](const std::string& p, std::uint32_t in_dim) {
        TwoLayerMlp m;
        m.w1 = to_matrix(take(p + ".w1"), w.d, in_dim, p + ".w1");
        m.b1 = to_vector(take(p + ".b1"), w.d, p + ".b1");
        m.w2 = to_matrix(take(p + ".w2"), w.d, w.d, p + ".w2");
        m.b2 = to_vector(take(p + ".b2"), w.d, p + ".b2");
        return m;
    };

    w.video_proj = take_mlp("video_proj", w.d_in);
    w.text_proj = take_mlp("text_proj", w.d_in);
    w.pool_vector = to_vector(take("pool.vector"), w.d, "pool.vector");
    w.pos_embed = to_matrix(take("pos_embed"), w.max_len, w.d, "pos_embed");
    w.type_embed = to_matrix(take("type_embed"), 2, w.d, "type_embed");
    for (std::uint32_t i = 0; i < w.k; ++i) {
        const std::string p = "enc" + std::to_string(i);
        EncoderLayer l;
        l.wq = to_matrix(take(p + ".wq"), w.d, w.d, p + ".wq");
        l.wk = to_matrix(take(p + ".wk"), w.d, w.d, p + ".wk");
        l.wv = to_matrix(take(p + ".wv"), w.d, w.d, p + ".wv");
        l.wo = to_matrix(take(p + ".wo"), w.d, w.d, p + ".wo");
        l.bo = to_vector(take(p + ".bo"), w.d, p + ".bo");
        RawTensor ff1 = take(p + ".ff_w1");
        if (ff1.dims.size() != 2 || ff1.dims[1] != w.d || ff1.dims[0] == 0) {
            throw weights_error(weights_error_kind::shape_mismatch,
                                "tensor '" + p + ".ff_w1' has unexpected shape");
        }
        const std::uint32_t d_ff = ff1.dims[0];
        l.ff_w1 = to_matrix(ff1, d_ff, w.d, p + ".ff_w1");
        l.ff_b1 = to_vector(take(p + ".ff_b1"), d_ff, p + ".ff_b1");
        l.ff_w2 = to_matrix(take(p + ".ff_w2"), w.d, d_ff, p + ".ff_w2");
        l.ff_b2 = to_vector(take(p + ".ff_b2"), w.d, p + ".ff_b2");
        w.layers.push_back(std::move(l));
    }
    auto take_head = [&](const std::string& p, std::uint32_t out_ch) {
        ConvHead head;
        head.c1 = to_conv(take(p + ".conv1.w"), take(p + ".conv1.b"), w.d, w.d, p + ".conv1");
        head.c2 = to_conv(take(p + ".conv2.w"), take(p + ".conv2.b"), w.d, w.d, p + ".conv2");
        head.c3 =
            to_conv(take(p + ".conv3.w"), take(p + ".conv3.b"), out_ch, w.d, p + ".conv3");
        return head;
    };
    w.fg_head = take_head("fg", 1);
    w.bd_head = take_head("bd", 2);
    w.sal_video.w = to_matrix(take("sal.video.w"), w.d, w.d, "sal.video.w");
    w.sal_video.b = to_vector(take("sal.video.b"), w.d, "sal.video.b");
    w.sal_sentence.w = to_matrix(take("sal.sent.w"), w.d, w.d, "sal.sent.w");
    w.sal_sentence.b = to_vector(take("sal.sent.b"), w.d, "sal.sent.b");

    if (!tensors.empty()) {
        throw weights_error(weights_error_kind::corrupt,
                            "unknown tensor '" + tensors.begin()->first + "'");
    }
    return w;
}

GrounderWeights make_toy_weights(std::uint64_t seed, std::uint32_t d_in, std::uint32_t d,
                                 std::uint32_t h, std::uint32_t k, std::uint32_t max_len,
                                 std::uint32_t d_ff) {
    std::mt19937_64 gen(seed);
    auto fill_mat = [&](std::uint32_t rows, std::uint32_t cols) {
        Eigen::MatrixXf m(rows, cols);
        float scale = 1.0f / std::sqrt(static_cast<float>(cols));
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                m(r, c) = static_cast<float>(uniform(gen, -1.0, 1.0)) * scale;
            }
        }
        return m;
    };
    auto fill_vec = [&](std::uint32_t n) {
        Eigen::RowVectorXf v(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            v(i) = static_cast<float>(uniform(gen, -0.1, 0.1));
        }
        return v;
    };
    auto fill_conv = [&](std::uint32_t out_ch, std::uint32_t in_ch) {
        ConvLayer c;
        for (int tap = 0; tap < 3; ++tap) c.taps[static_cast<std::size_t>(tap)] = fill_mat(out_ch, in_ch);
        c.bias = fill_vec(out_ch);
        return c;
    };

    GrounderWeights w;
    w.d_in = d_in;
    w.d = d;
    w.h = h;
    w.k = k;
    w.max_len = max_len;
    w.video_proj = {fill_mat(d, d_in), fill_vec(d), fill_mat(d, d), fill_vec(d)};
    w.text_proj = {fill_mat(d, d_in), fill_vec(d), fill_mat(d, d), fill_vec(d)};
    w.pool_vector = fill_vec(d);
    w.pos_embed = 0.1f * fill_mat(max_len, d);
    w.type_embed = 0.1f * fill_mat(2, d);
    for (std::uint32_t i = 0; i < k; ++i) {
        EncoderLayer l;
        l.wq = fill_mat(d, d);
        l.wk = fill_mat(d, d);
        l.wv = fill_mat(d, d);
        l.wo = fill_mat(d, d);
        l.bo = fill_vec(d);
        l.ff_w1 = fill_mat(d_ff, d);
        l.ff_b1 = fill_vec(d_ff);
        l.ff_w2 = fill_mat(d, d_ff);
        l.ff_b2 = fill_vec(d);
        w.layers.push_back(std::move(l));
    }
    w.fg_head = {fill_conv(d, d), fill_conv(d, d), fill_conv(1, d)};
    w.bd_head = {fill_conv(d, d), fill_conv(d, d), fill_conv(2, d)};
    w.sal_video = {fill_mat(d, d), fill_vec(d)};
    w.sal_sentence = {fill_mat(d, d), fill_vec(d)};
    return w;
}

} // namespace leadqa
