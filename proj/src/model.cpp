#include "cmt/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cmt {

void ModelConfig::validate() const {
    if (vocab_size < 6) throw std::invalid_argument("vocab_size must be >= 6");
    if (max_len < 3) throw std::invalid_argument("max_len must be >= 3");
    if (num_heads == 0 || d_model % num_heads != 0)
        throw std::invalid_argument("d_model must be divisible by num_heads");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("dropout_rate must be in [0,1)");
    if (mask_prob < 0.0 || mask_prob > 1.0)
        throw std::invalid_argument("mask_prob must be in [0,1]");
}

ParamGroup parse_param_group(const std::string& name) {
    if (name == "embeddings") return ParamGroup::Embeddings;
    if (name == "encoder_layers") return ParamGroup::EncoderLayers;
    if (name == "mlm_head") return ParamGroup::MlmHead;
    if (name == "sentiment_head") return ParamGroup::SentimentHead;
    if (name == "langid_head") return ParamGroup::LangidHead;
    throw std::invalid_argument("unknown parameter group: " + name);
}

std::string to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::Embeddings: return "embeddings";
        case ParamGroup::EncoderLayers: return "encoder_layers";
        case ParamGroup::MlmHead: return "mlm_head";
        case ParamGroup::SentimentHead: return "sentiment_head";
        case ParamGroup::LangidHead: return "langid_head";
    }
    throw std::logic_error("invalid ParamGroup");
}

namespace {

TensorPtr randn(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
    auto t = Tensor::zeros(std::move(shape), true);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t->data) v = dist(rng);
    return t;
}

TensorPtr filled(std::vector<std::size_t> shape, double value) {
    auto t = Tensor::zeros(std::move(shape), true);
    for (double& v : t->data) v = value;
    return t;
}

}  // namespace

ModelWeights::ModelWeights(const ModelConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const std::size_t d = config_.d_model;
    const double s = 0.02;

    token_embedding = randn({config_.vocab_size, d}, s, rng);
    position_embedding = randn({config_.max_len, d}, s, rng);
    segment_embedding = randn({2, d}, s, rng);
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        LayerWeights lw;
        lw.wq = randn({d, d}, s, rng); lw.bq = Tensor::zeros({d}, true);
        lw.wk = randn({d, d}, s, rng); lw.bk = Tensor::zeros({d}, true);
        lw.wv = randn({d, d}, s, rng); lw.bv = Tensor::zeros({d}, true);
        lw.wo = randn({d, d}, s, rng); lw.bo = Tensor::zeros({d}, true);
        lw.ln1_gain = filled({d}, 1.0); lw.ln1_bias = Tensor::zeros({d}, true);
        lw.ff_w1 = randn({d, config_.d_ff}, s, rng);
        lw.ff_b1 = Tensor::zeros({config_.d_ff}, true);
        lw.ff_w2 = randn({config_.d_ff, d}, s, rng);
        lw.ff_b2 = Tensor::zeros({d}, true);
        lw.ln2_gain = filled({d}, 1.0); lw.ln2_bias = Tensor::zeros({d}, true);
        layers.push_back(std::move(lw));
    }
    mlm_w = randn({d, config_.vocab_size}, s, rng);
    mlm_b = Tensor::zeros({config_.vocab_size}, true);
    sentiment_w = randn({d, config_.num_sentiments}, s, rng);
    sentiment_b = Tensor::zeros({config_.num_sentiments}, true);
    langid_w = randn({d, config_.num_langtags}, s, rng);
    langid_b = Tensor::zeros({config_.num_langtags}, true);
    register_params();
}

void ModelWeights::register_params() {
    params_.clear();
    auto reg = [&](std::string name, const TensorPtr& t, ParamGroup g) {
        params_.push_back({std::move(name), t, g});
    };
    reg("token_embedding", token_embedding, ParamGroup::Embeddings);
    reg("position_embedding", position_embedding, ParamGroup::Embeddings);
    reg("segment_embedding", segment_embedding, ParamGroup::Embeddings);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        const auto& lw = layers[l];
        reg(p + "attn.wq", lw.wq, ParamGroup::EncoderLayers);
        reg(p + "attn.bq", lw.bq, ParamGroup::EncoderLayers);
        reg(p + "attn.wk", lw.wk, ParamGroup::EncoderLayers);
        reg(p + "attn.bk", lw.bk, ParamGroup::EncoderLayers);
        reg(p + "attn.wv", lw.wv, ParamGroup::EncoderLayers);
        reg(p + "attn.bv", lw.bv, ParamGroup::EncoderLayers);
        reg(p + "attn.wo", lw.wo, ParamGroup::EncoderLayers);
        reg(p + "attn.bo", lw.bo, ParamGroup::EncoderLayers);
        reg(p + "ln1.gain", lw.ln1_gain, ParamGroup::EncoderLayers);
        reg(p + "ln1.bias", lw.ln1_bias, ParamGroup::EncoderLayers);
        reg(p + "ff.w1", lw.ff_w1, ParamGroup::EncoderLayers);
        reg(p + "ff.b1", lw.ff_b1, ParamGroup::EncoderLayers);
        reg(p + "ff.w2", lw.ff_w2, ParamGroup::EncoderLayers);
        reg(p + "ff.b2", lw.ff_b2, ParamGroup::EncoderLayers);
        reg(p + "ln2.gain", lw.ln2_gain, ParamGroup::EncoderLayers);
        reg(p + "ln2.bias", lw.ln2_bias, ParamGroup::EncoderLayers);
    }
    reg("mlm_head.w", mlm_w, ParamGroup::MlmHead);
    reg("mlm_head.b", mlm_b, ParamGroup::MlmHead);
    reg("sentiment_head.w", sentiment_w, ParamGroup::SentimentHead);
    reg("sentiment_head.b", sentiment_b, ParamGroup::SentimentHead);
    reg("langid_head.w", langid_w, ParamGroup::LangidHead);
    reg("langid_head.b", langid_b, ParamGroup::LangidHead);
}

void ModelWeights::set_frozen(const std::set<ParamGroup>& groups) { frozen_ = groups; }

void ModelWeights::zero_grads() {
    for (auto& p : params_) p.tensor->zero_grad();
}

TensorPtr embed(const ModelWeights& w, const std::vector<int>& ids,
                const std::vector<int>& segment_ids) {
    if (ids.size() != segment_ids.size())
        throw std::invalid_argument("embed: ids/segment_ids length mismatch");
    for (int id : ids)
        if (id < 0 || std::size_t(id) >= w.config().vocab_size)
            throw std::invalid_argument("embed: token id out of range");
    for (int s : segment_ids)
        if (s != 0 && s != 1)
            throw std::invalid_argument("embed: segment id must be 0 or 1");
    std::vector<int> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = int(i);
    auto tok = rows_gather(w.token_embedding, ids);
    auto pos = rows_gather(w.position_embedding, positions);
    auto seg = rows_gather(w.segment_embedding, segment_ids);
    return add(add(tok, pos), seg);
}

namespace {

/// Multiplies by a 0/1 keep-mask scaled by 1/(1-rate); no-op at rate 0.
TensorPtr dropout(TensorPtr x, double rate, std::mt19937_64* rng) {
    if (rate == 0.0 || rng == nullptr) return x;
    auto mask = Tensor::zeros(x->shape);
    double keep = 1.0 - rate;
    for (double& v : mask->data) {
        double u = double((*rng)() >> 11) * (1.0 / 9007199254740992.0);
        v = u < rate ? 0.0 : 1.0 / keep;
    }
    return mul(x, mask);
}

}  // namespace

TensorPtr encoder_forward(const ModelWeights& w, TensorPtr hidden,
                          const std::vector<int>& attention_mask,
                          std::mt19937_64* dropout_rng) {
    const auto& cfg = w.config();
    const std::size_t len = hidden->rows();
    if (attention_mask.size() != len)
        throw std::invalid_argument("encoder_forward: mask length mismatch");
    const std::size_t dk = cfg.d_model / cfg.num_heads;
    const double eps = 1e-12;

    // Additive column mask: -1e9 on PAD keys underflows to exactly zero
    // attention weight, so PAD content cannot leak into real positions.
    std::vector<double> mask_bias(len * len, 0.0);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < len; ++j)
            if (attention_mask[j] == 0) mask_bias[i * len + j] = -1e9;

    for (const auto& lw : w.layers) {
        auto q = add_row_bias(matmul(hidden, lw.wq), lw.bq);
        auto k = add_row_bias(matmul(hidden, lw.wk), lw.bk);
        auto v = add_row_bias(matmul(hidden, lw.wv), lw.bv);
        std::vector<TensorPtr> heads;
        for (std::size_t h = 0; h < cfg.num_heads; ++h) {
            auto qh = slice_cols(q, h * dk, dk);
            auto kh = slice_cols(k, h * dk, dk);
            auto vh = slice_cols(v, h * dk, dk);
            auto scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dk)));
            auto attn = softmax_rows(add_constant(scores, mask_bias));
            attn = dropout(attn, cfg.dropout_rate, dropout_rng);
            heads.push_back(matmul(attn, vh));
        }
        auto ctx = cfg.num_heads == 1 ? heads[0] : concat_cols(heads);
        auto attn_out = add_row_bias(matmul(ctx, lw.wo), lw.bo);
        hidden = layer_norm(add(hidden, attn_out), lw.ln1_gain, lw.ln1_bias, eps);

        auto ff = gelu(add_row_bias(matmul(hidden, lw.ff_w1), lw.ff_b1));
        ff = dropout(ff, cfg.dropout_rate, dropout_rng);
        auto ff_out = add_row_bias(matmul(ff, lw.ff_w2), lw.ff_b2);
        ff_out = dropout(ff_out, cfg.dropout_rate, dropout_rng);
        hidden = layer_norm(add(hidden, ff_out), lw.ln2_gain, lw.ln2_bias, eps);
    }
    return hidden;
}

TensorPtr encode_sequence(const ModelWeights& w, const std::vector<int>& ids,
                          const std::vector<int>& attention_mask,
                          std::mt19937_64* dropout_rng) {
    std::vector<int> segments(ids.size(), 0);
    return encoder_forward(w, embed(w, ids, segments), attention_mask, dropout_rng);
}

MultitaskLogits forward_multitask(const ModelWeights& w, const std::vector<int>& ids,
                                  const std::vector<int>& attention_mask,
                                  std::mt19937_64* dropout_rng) {
    auto hidden = encode_sequence(w, ids, attention_mask, dropout_rng);
    MultitaskLogits out;
    out.sentiment = add_row_bias(matmul(pick_row(hidden, 0), w.sentiment_w), w.sentiment_b);
    out.langid = add_row_bias(matmul(hidden, w.langid_w), w.langid_b);
    return out;
}

TensorPtr forward_mlm(const ModelWeights& w, const std::vector<int>& ids,
                      const std::vector<int>& attention_mask,
                      std::mt19937_64* dropout_rng) {
    auto hidden = encode_sequence(w, ids, attention_mask, dropout_rng);
    return add_row_bias(matmul(hidden, w.mlm_w), w.mlm_b);
}

MaskedBatch mask_tokens(const std::vector<int>& ids, double mask_prob,
                        std::mt19937_64& rng, std::size_t vocab_size,
                        const MaskPolicy& policy) {
    if (mask_prob < 0.0 || mask_prob > 1.0)
        throw std::invalid_argument("mask_tokens: mask_prob must be in [0,1]");
    if (vocab_size <= std::size_t(Vocabulary::kNumSpecials))
        throw std::invalid_argument("mask_tokens: vocabulary has no content tokens");
    auto unit = [&rng] { return double(rng() >> 11) * (1.0 / 9007199254740992.0); };
    MaskedBatch out;
    out.corrupted_ids = ids;
    out.mlm_labels.assign(ids.size(), kIgnoreIndex);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad)
            continue;
        if (unit() >= mask_prob) continue;
        out.mlm_labels[i] = id;
        double branch = unit();
        if (branch < policy.mask_fraction) {
            out.corrupted_ids[i] = Vocabulary::kMask;
        } else if (branch < policy.mask_fraction + policy.random_fraction) {
            std::size_t content = vocab_size - std::size_t(Vocabulary::kNumSpecials);
            out.corrupted_ids[i] =
                int(std::size_t(Vocabulary::kNumSpecials) + rng() % content);
        }
        // else: left unchanged, still predicted
    }
    return out;
}

// ---- checkpoint format: "CMT1", config as u32 LE, then named params ----

namespace {

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& buf, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(buf, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;
    std::uint8_t byte() {
        if (pos >= buf.size()) throw std::runtime_error("truncated checkpoint");
        return buf[pos++];
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(byte()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(byte()) << (8 * i);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

}  // namespace

std::vector<std::uint8_t> ModelWeights::serialize() const {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'C', 'M', 'T', '1'});
    put_u32(buf, std::uint32_t(config_.vocab_size));
    put_u32(buf, std::uint32_t(config_.max_len));
    put_u32(buf, std::uint32_t(config_.d_model));
    put_u32(buf, std::uint32_t(config_.num_layers));
    put_u32(buf, std::uint32_t(config_.num_heads));
    put_u32(buf, std::uint32_t(config_.d_ff));
    put_u32(buf, std::uint32_t(config_.num_sentiments));
    put_u32(buf, std::uint32_t(config_.num_langtags));
    put_u64(buf, config_.seed);
    put_u32(buf, std::uint32_t(params_.size()));
    for (const auto& p : params_) {
        put_u32(buf, std::uint32_t(p.name.size()));
        buf.insert(buf.end(), p.name.begin(), p.name.end());
        put_u32(buf, std::uint32_t(p.tensor->shape.size()));
        for (std::size_t d : p.tensor->shape) put_u32(buf, std::uint32_t(d));
        for (double v : p.tensor->data) put_f64(buf, v);
    }
    return buf;
}

void ModelWeights::save(const std::string& path) const {
    auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelWeights ModelWeights::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    Reader r{buf};
    if (buf.size() < 4 || buf[0] != 'C' || buf[1] != 'M' || buf[2] != 'T' || buf[3] != '1')
        throw std::runtime_error("bad checkpoint magic: " + path);
    r.pos = 4;
    ModelConfig cfg;
    cfg.vocab_size = r.u32();
    cfg.max_len = r.u32();
    cfg.d_model = r.u32();
    cfg.num_layers = r.u32();
    cfg.num_heads = r.u32();
    cfg.d_ff = r.u32();
    cfg.num_sentiments = r.u32();
    cfg.num_langtags = r.u32();
    cfg.seed = r.u64();

    ModelWeights w(cfg);
    std::uint32_t count = r.u32();
    if (count != w.params_.size())
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    for (auto& p : w.params_) {
        std::uint32_t name_len = r.u32();
        std::string name;
        for (std::uint32_t i = 0; i < name_len; ++i) name += char(r.byte());
        if (name != p.name)
            throw std::runtime_error("checkpoint parameter order mismatch at " + name);
        std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
        if (shape != p.tensor->shape)
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        for (double& v : p.tensor->data) v = r.f64();
    }
    return w;
}

}  // namespace cmt
