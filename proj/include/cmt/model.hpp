#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cmt/tensor.hpp"
#include "cmt/vocab.hpp"

namespace cmt {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t max_len = 32;
    std::size_t d_model = 32;
    std::size_t num_layers = 2;
    std::size_t num_heads = 2;
    std::size_t d_ff = 64;
    double dropout_rate = 0.0;
    std::size_t num_sentiments = 3;
    std::size_t num_langtags = 5;
    double mask_prob = 0.15;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Parameter groups addressable by the freezing switch.
enum class ParamGroup { Embeddings, EncoderLayers, MlmHead, SentimentHead, LangidHead };

ParamGroup parse_param_group(const std::string& name);  // throws on unknown
std::string to_string(ParamGroup g);

struct NamedParam {
    std::string name;
    TensorPtr tensor;
    ParamGroup group;
};

struct LayerWeights {
    TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
    TensorPtr ln1_gain, ln1_bias;
    TensorPtr ff_w1, ff_b1, ff_w2, ff_b2;
    TensorPtr ln2_gain, ln2_bias;
};

class ModelWeights {
public:
    /// Random initialization: N(0, 0.02) for matrices/embeddings, zeros for
    /// biases, ones for layer-norm gains, seeded by config.seed.
    explicit ModelWeights(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    TensorPtr token_embedding, position_embedding, segment_embedding;
    std::vector<LayerWeights> layers;
    TensorPtr mlm_w, mlm_b;
    TensorPtr sentiment_w, sentiment_b;
    TensorPtr langid_w, langid_b;

    const std::vector<NamedParam>& parameters() const { return params_; }

    void set_frozen(const std::set<ParamGroup>& groups);
    const std::set<ParamGroup>& frozen() const { return frozen_; }
    bool is_frozen(ParamGroup g) const { return frozen_.count(g) > 0; }

    void zero_grads();

    void save(const std::string& path) const;
    static ModelWeights load(const std::string& path);

    /// Checkpoint bytes as written by save(); used for determinism and
    /// freezing checks.
    std::vector<std::uint8_t> serialize() const;

private:
    ModelWeights() = default;
    void register_params();

    ModelConfig config_;
    std::vector<NamedParam> params_;
    std::set<ParamGroup> frozen_;
};

/// Sum of token, learned-position, and segment embeddings per position.
TensorPtr embed(const ModelWeights& w, const std::vector<int>& ids,
                const std::vector<int>& segment_ids);

/// Full encoder stack over already-embedded input. attention_mask is 0/1 per
/// position; masked positions are excluded from every softmax.
TensorPtr encoder_forward(const ModelWeights& w, TensorPtr hidden,
                          const std::vector<int>& attention_mask,
                          std::mt19937_64* dropout_rng = nullptr);

/// Embedding + encoder in one call (segment ids all zero).
TensorPtr encode_sequence(const ModelWeights& w, const std::vector<int>& ids,
                          const std::vector<int>& attention_mask,
                          std::mt19937_64* dropout_rng = nullptr);

struct MultitaskLogits {
    TensorPtr sentiment;  // [1 x num_sentiments], from the CLS position
    TensorPtr langid;     // [len x num_langtags]
};

MultitaskLogits forward_multitask(const ModelWeights& w, const std::vector<int>& ids,
                                  const std::vector<int>& attention_mask,
                                  std::mt19937_64* dropout_rng = nullptr);

TensorPtr forward_mlm(const ModelWeights& w, const std::vector<int>& ids,
                      const std::vector<int>& attention_mask,
                      std::mt19937_64* dropout_rng = nullptr);

struct MaskPolicy {
    double mask_fraction = 0.8;    // selected -> [MASK]
    double random_fraction = 0.1;  // selected -> random non-special token
};

struct MaskedBatch {
    std::vector<int> corrupted_ids;
    std::vector<int> mlm_labels;  // original id at selected positions, else ignore
};

/// BERT-style corruption: each content position is selected with mask_prob;
/// selected positions become [MASK] / random token / unchanged per policy.
/// Specials (CLS, SEP, PAD) are never selected.
MaskedBatch mask_tokens(const std::vector<int>& ids, double mask_prob,
                        std::mt19937_64& rng, std::size_t vocab_size,
                        const MaskPolicy& policy = {});

}  // namespace cmt
