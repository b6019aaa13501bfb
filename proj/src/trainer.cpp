#include "cmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmt/metrics.hpp"

namespace cmt {

void AdamState::init(const ModelWeights& weights) {
    step_count = 0;
    m.clear();
    v.clear();
    for (const auto& p : weights.parameters()) {
        m.emplace_back(p.tensor->size(), 0.0);
        v.emplace_back(p.tensor->size(), 0.0);
    }
}

void adam_step(ModelWeights& weights, AdamState& state) {
    const auto& params = weights.parameters();
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state not initialized for these weights");
    ++state.step_count;
    double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
    double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = *params[i].tensor;
        if (weights.is_frozen(params[i].group)) continue;
        if (t.grad.size() != t.data.size())
            throw std::invalid_argument("adam_step: missing gradient for " + params[i].name);
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < t.data.size(); ++j) {
            double g = t.grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            t.data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_gradients(ModelWeights& weights, double max_norm) {
    double sq = 0.0;
    for (const auto& p : weights.parameters()) {
        if (weights.is_frozen(p.group)) continue;
        for (double g : p.tensor->grad) sq += g * g;
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (const auto& p : weights.parameters()) {
            if (weights.is_frozen(p.group)) continue;
            for (double& g : p.tensor->grad) g *= s;
        }
    }
    return norm;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (sentiment_loss_weight < 0.0 || langid_loss_weight < 0.0)
        throw std::invalid_argument("loss weights must be nonnegative");
    if (sentiment_loss_weight == 0.0 && langid_loss_weight == 0.0)
        throw std::invalid_argument("at least one loss weight must be positive");
    if (mask_prob < 0.0 || mask_prob > 1.0)
        throw std::invalid_argument("mask_prob must be in [0,1]");
}

TensorPtr multitask_loss(const TensorPtr& sentiment_logits,
                         std::optional<int> sentiment_label,
                         const TensorPtr& langid_logits,
                         const std::vector<int>& langid_labels,
                         double lambda_s, double lambda_l) {
    TensorPtr loss;
    if (sentiment_label) {
        loss = scale(cross_entropy(sentiment_logits, {*sentiment_label}, kIgnoreIndex),
                     lambda_s);
    }
    auto lang = scale(cross_entropy(langid_logits, langid_labels, kIgnoreIndex), lambda_l);
    return loss ? add(loss, lang) : lang;
}

namespace {

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng() % i]);
}

void check_loss_finite(double loss) {
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss");
}

void average_grads(ModelWeights& weights, std::size_t batch) {
    for (const auto& p : weights.parameters()) {
        p.tensor->ensure_grad();
        for (double& g : p.tensor->grad) g /= double(batch);
    }
}

}  // namespace

ModelWeights pretrain_mlm(const std::vector<TweetRecord>& corpus,
                          const Vocabulary& vocab, const ModelConfig& model_cfg,
                          const TrainConfig& train_cfg, std::ostream& log) {
    if (corpus.empty()) throw std::invalid_argument("pretrain_mlm: empty corpus");
    train_cfg.validate();
    ModelWeights weights(model_cfg);
    weights.set_frozen(train_cfg.freeze_groups);
    AdamState adam;
    adam.lr = train_cfg.lr;
    adam.init(weights);

    std::mt19937_64 rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        seeded_shuffle(order, rng);
        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += train_cfg.batch_size) {
            if (train_cfg.max_steps && steps >= train_cfg.max_steps) break;
            std::size_t end = std::min(order.size(), start + train_cfg.batch_size);
            weights.zero_grads();
            double batch_loss = 0.0;
            std::size_t used = 0;
            for (std::size_t k = start; k < end; ++k) {
                const auto& r = corpus[order[k]];
                auto enc = encode(r.tokens, vocab, model_cfg.max_len);
                auto masked = mask_tokens(enc.ids, train_cfg.mask_prob, rng,
                                          vocab.size());
                bool any = std::any_of(masked.mlm_labels.begin(), masked.mlm_labels.end(),
                                       [](int l) { return l != kIgnoreIndex; });
                if (!any) continue;  // nothing selected this draw
                auto logits = forward_mlm(weights, masked.corrupted_ids,
                                          enc.attention_mask);
                auto loss = cross_entropy(logits, masked.mlm_labels, kIgnoreIndex);
                check_loss_finite(loss->data[0]);
                batch_loss += loss->data[0];
                loss->backward();
                ++used;
            }
            if (used == 0) {
                log << "epoch " << epoch << " skipped empty batch at record "
                    << start << '\n';
                continue;
            }
            average_grads(weights, used);
            clip_gradients(weights, train_cfg.grad_clip_norm);
            adam_step(weights, adam);
            epoch_loss += batch_loss / double(used);
            ++epoch_batches;
            ++steps;
        }
        if (epoch_batches)
            log << "epoch " << epoch << " task mlm loss "
                << epoch_loss / double(epoch_batches) << '\n';
        if (train_cfg.max_steps && steps >= train_cfg.max_steps) break;
    }
    return weights;
}

ModelWeights finetune_multitask(ModelWeights weights,
                                const std::vector<TweetRecord>& labeled_corpus,
                                const Vocabulary& vocab, const TrainConfig& train_cfg,
                                const std::vector<TweetRecord>* dev_set,
                                std::ostream& log) {
    train_cfg.validate();
    for (const auto& r : labeled_corpus)
        if (!r.sentiment)
            throw std::invalid_argument("finetune: record '" + r.id +
                                        "' has no sentiment label");

    weights.set_frozen(train_cfg.freeze_groups);
    AdamState adam;
    adam.lr = train_cfg.lr;
    adam.init(weights);
    const auto& cfg = weights.config();

    std::mt19937_64 rng(train_cfg.seed ^ 0xc2b2ae3d27d4eb4full);
    std::vector<std::size_t> order(labeled_corpus.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        seeded_shuffle(order, rng);
        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += train_cfg.batch_size) {
            if (train_cfg.max_steps && steps >= train_cfg.max_steps) break;
            std::size_t end = std::min(order.size(), start + train_cfg.batch_size);
            weights.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const auto& r = labeled_corpus[order[k]];
                auto enc = encode(r.tokens, vocab, cfg.max_len);
                auto logits = forward_multitask(weights, enc.ids, enc.attention_mask);
                auto loss = multitask_loss(logits.sentiment, int(*r.sentiment),
                                           logits.langid, align_tags(r.tags, cfg.max_len),
                                           train_cfg.sentiment_loss_weight,
                                           train_cfg.langid_loss_weight);
                check_loss_finite(loss->data[0]);
                batch_loss += loss->data[0];
                loss->backward();
            }
            average_grads(weights, end - start);
            clip_gradients(weights, train_cfg.grad_clip_norm);
            adam_step(weights, adam);
            epoch_loss += batch_loss / double(end - start);
            ++epoch_batches;
            ++steps;
        }
        if (epoch_batches) {
            log << "epoch " << epoch << " task multitask loss "
                << epoch_loss / double(epoch_batches);
            if (dev_set && !dev_set->empty()) {
                auto report = evaluate(weights, *dev_set, vocab);
                log << " dev_f1 " << report.macro_f1;
            }
            log << '\n';
        }
        if (train_cfg.max_steps && steps >= train_cfg.max_steps) break;
    }
    return weights;
}

}  // namespace cmt
