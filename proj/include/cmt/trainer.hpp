#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cmt/corpus.hpp"
#include "cmt/model.hpp"
#include "cmt/vocab.hpp"

namespace cmt {

/// Signals a NaN/Inf loss during training (CLI exit code 3).
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_count = 0;
    // Moment buffers per parameter, indexed like ModelWeights::parameters().
    std::vector<std::vector<double>> m, v;

    void init(const ModelWeights& weights);
};

/// One bias-corrected Adam update from the gradients currently stored on the
/// parameters. Frozen groups are skipped.
void adam_step(ModelWeights& weights, AdamState& state);

/// Scales all trainable gradients so their global L2 norm is at most
/// max_norm. Returns the pre-clip norm.
double clip_gradients(ModelWeights& weights, double max_norm);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t max_steps = 0;  // 0 = no step cap
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double sentiment_loss_weight = 1.0;
    double langid_loss_weight = 1.0;
    std::set<ParamGroup> freeze_groups;
    std::uint64_t seed = 0;
    double mask_prob = 0.15;
    double grad_clip_norm = 1.0;

    void validate() const;
};

/// lambda_s * CE(sentiment) + lambda_l * meanCE(langid over supervised
/// positions); the sentiment term is dropped when no label is given.
TensorPtr multitask_loss(const TensorPtr& sentiment_logits,
                         std::optional<int> sentiment_label,
                         const TensorPtr& langid_logits,
                         const std::vector<int>& langid_labels,
                         double lambda_s, double lambda_l);

/// Masked-token prediction over the corpus. Logs one line per epoch:
/// `epoch <n> task mlm loss <float>`.
ModelWeights pretrain_mlm(const std::vector<TweetRecord>& corpus,
                          const Vocabulary& vocab, const ModelConfig& model_cfg,
                          const TrainConfig& train_cfg, std::ostream& log);

/// Joint sentiment + language-ID fine-tuning. Every record must carry a
/// sentiment label. Logs `epoch <n> task multitask loss <float>
/// [dev_f1 <float>]`.
ModelWeights finetune_multitask(ModelWeights weights,
                                const std::vector<TweetRecord>& labeled_corpus,
                                const Vocabulary& vocab, const TrainConfig& train_cfg,
                                const std::vector<TweetRecord>* dev_set,
                                std::ostream& log);

}  // namespace cmt
