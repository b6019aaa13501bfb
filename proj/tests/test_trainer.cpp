#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cmt/metrics.hpp"
#include "cmt/trainer.hpp"
#include "fd_check.hpp"

using namespace cmt;
using cmt::test::fd_check;

namespace {

ModelConfig tiny_config(std::size_t vocab) {
    ModelConfig cfg;
    cfg.vocab_size = vocab;
    cfg.max_len = 12;
    cfg.d_model = 16;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.d_ff = 24;
    cfg.seed = 21;
    return cfg;
}

/// Independent straight-line Adam on a plain vector, no shared code with
/// adam_step.
struct ScriptedAdam {
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    std::size_t t = 0;
    explicit ScriptedAdam(double lr, std::size_t n) : lr(lr), m(n, 0.0), v(n, 0.0) {}
    void step(std::vector<double>& theta, const std::vector<double>& grad) {
        ++t;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * grad[i];
            v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
            double mh = m[i] / (1 - std::pow(b1, double(t)));
            double vh = v[i] / (1 - std::pow(b2, double(t)));
            theta[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

/// Minimal single-parameter "model" for optimizer tests: wraps a tensor as
/// the langid head bias of a real weight set so adam_step applies to it.
struct ScalarProblem {
    ModelWeights weights;
    AdamState adam;
    explicit ScalarProblem(double lr) : weights(tiny_config(16)) {
        adam.lr = lr;
        adam.init(weights);
    }
    void set_grads(const std::vector<double>& g_bias) {
        for (const auto& p : weights.parameters()) {
            p.tensor->zero_grad();
        }
        weights.langid_b->grad = g_bias;
    }
};

}  // namespace

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    ScalarProblem prob(0.001);
    auto before = prob.weights.langid_b->data;
    prob.set_grads({0, 0, 0, 0, 0});
    adam_step(prob.weights, prob.adam);
    CHECK(prob.weights.langid_b->data == before);
}

TEST_CASE("adam first step has magnitude ~lr regardless of gradient scale") {
    // Bias correction makes mhat = g and sqrt(vhat) = |g| on step one.
    for (double g : {0.01, 0.5, 1.0, 100.0}) {
        ScalarProblem prob(0.001);
        double before = prob.weights.langid_b->data[0];
        prob.set_grads({g, 0, 0, 0, 0});
        adam_step(prob.weights, prob.adam);
        double delta = prob.weights.langid_b->data[0] - before;
        CHECK(std::abs(delta + 0.001) < 1e-6);
    }
}

TEST_CASE("adam trajectory matches the scripted oracle on f(theta)=sum theta^2") {
    ScalarProblem prob(0.1);
    prob.weights.langid_b->data = {1.0, -1.0, 0.5, 2.0, -0.3};
    ScriptedAdam oracle(0.1, 5);
    std::vector<double> theta = prob.weights.langid_b->data;
    for (int step = 0; step < 100; ++step) {
        std::vector<double> grad(5);
        for (std::size_t i = 0; i < 5; ++i) grad[i] = 2.0 * theta[i];
        oracle.step(theta, grad);

        std::vector<double> grad2(5);
        for (std::size_t i = 0; i < 5; ++i)
            grad2[i] = 2.0 * prob.weights.langid_b->data[i];
        prob.set_grads(grad2);
        adam_step(prob.weights, prob.adam);

        for (std::size_t i = 0; i < 5; ++i)
            CHECK(std::abs(prob.weights.langid_b->data[i] - theta[i]) <= 1e-10);
    }
}

TEST_CASE("adam skips frozen groups") {
    ScalarProblem prob(0.01);
    prob.weights.set_frozen({ParamGroup::LangidHead});
    auto before = prob.weights.langid_b->data;
    prob.set_grads({1, 1, 1, 1, 1});
    adam_step(prob.weights, prob.adam);
    CHECK(prob.weights.langid_b->data == before);
}

TEST_CASE("gradient clipping caps the global norm") {
    ScalarProblem prob(0.01);
    prob.set_grads({3, 4, 0, 0, 0});
    double norm = clip_gradients(prob.weights, 1.0);
    CHECK(norm == doctest::Approx(5.0));
    double after = 0.0;
    for (const auto& p : prob.weights.parameters())
        for (double g : p.tensor->grad) after += g * g;
    CHECK(std::sqrt(after) == doctest::Approx(1.0));
}

TEST_CASE("multitask_loss hand cases") {
    auto s_logits = Tensor::from_values({1, 3}, {0, 0, 0});
    auto l_logits = Tensor::from_values({2, 5}, {1, 2, 3, 4, 5, 5, 4, 3, 2, 1});
    std::vector<int> ignored(2, kIgnoreIndex);

    // lambda_l = 0 reduces to the sentiment term.
    auto only_s = multitask_loss(s_logits, 1, l_logits, ignored, 1.0, 0.0);
    CHECK(only_s->data[0] == doctest::Approx(std::log(3.0)));

    // Uniform sentiment + all-ignored langid.
    auto uniform = multitask_loss(s_logits, 2, l_logits, ignored, 2.5, 1.0);
    CHECK(uniform->data[0] == doctest::Approx(2.5 * std::log(3.0)));

    // Hand-summed two-token example.
    std::vector<int> tags = {0, 3};
    auto lse = [](const std::vector<double>& row) {
        double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        return std::log(z) + mx;
    };
    double want = 0.7 * (lse({0, 0, 0}) - 0.0) +
                  1.3 * 0.5 * ((lse({1, 2, 3, 4, 5}) - 1.0) + (lse({5, 4, 3, 2, 1}) - 2.0));
    auto joint = multitask_loss(s_logits, 1, l_logits, tags, 0.7, 1.3);
    CHECK(joint->data[0] == doctest::Approx(want).epsilon(1e-12));

    // Missing sentiment label drops that term.
    auto no_label = multitask_loss(s_logits, std::nullopt, l_logits, tags, 0.7, 1.0);
    CHECK(no_label->data[0] ==
          doctest::Approx(0.5 * ((lse({1, 2, 3, 4, 5}) - 1.0) +
                                 (lse({5, 4, 3, 2, 1}) - 2.0))));
}

TEST_CASE("multitask_loss gradient check through both heads") {
    std::mt19937_64 rng(5);
    auto s_logits = cmt::test::random_tensor({1, 3}, rng);
    auto l_logits = cmt::test::random_tensor({4, 5}, rng);
    std::vector<int> tags = {kIgnoreIndex, 1, 4, kIgnoreIndex};
    auto fwd = [&] { return multitask_loss(s_logits, 2, l_logits, tags, 1.0, 1.0); };
    auto res = fd_check({s_logits, l_logits}, [&] { return fwd()->data[0]; }, fwd);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("pretrain_mlm epochs=0 returns the initialization") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.seed = 3;
    spec.num_records = 20;
    auto corpus = generate_synthetic(spec);
    auto vocab = build_vocabulary(corpus, 128, 0.0);
    ModelConfig cfg = tiny_config(vocab.size());
    TrainConfig tcfg;
    tcfg.epochs = 0;
    tcfg.seed = 3;
    std::ostringstream log;
    auto weights = pretrain_mlm(corpus, vocab, cfg, tcfg, log);
    CHECK(weights.serialize() == ModelWeights(cfg).serialize());
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.seed = 11;
    spec.num_records = 30;
    auto corpus = generate_synthetic(spec);
    auto vocab = build_vocabulary(corpus, 128, 0.0);
    ModelConfig cfg = tiny_config(vocab.size());
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 8;
    tcfg.seed = 11;
    std::ostringstream log1, log2;
    auto w1 = pretrain_mlm(corpus, vocab, cfg, tcfg, log1);
    auto w2 = pretrain_mlm(corpus, vocab, cfg, tcfg, log2);
    CHECK(w1.serialize() == w2.serialize());
    CHECK(log1.str() == log2.str());

    auto f1 = finetune_multitask(std::move(w1), corpus, vocab, tcfg, nullptr, log1);
    auto f2 = finetune_multitask(std::move(w2), corpus, vocab, tcfg, nullptr, log2);
    CHECK(f1.serialize() == f2.serialize());
}

TEST_CASE("finetune freezing keeps encoder bytes identical") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.seed = 13;
    spec.num_records = 24;
    auto corpus = generate_synthetic(spec);
    auto vocab = build_vocabulary(corpus, 128, 0.0);
    ModelConfig cfg = tiny_config(vocab.size());
    ModelWeights init(cfg);
    auto before = init.serialize();

    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 8;
    tcfg.seed = 13;
    tcfg.freeze_groups = {ParamGroup::Embeddings, ParamGroup::EncoderLayers};
    std::ostringstream log;
    auto tuned = finetune_multitask(std::move(init), corpus, vocab, tcfg, nullptr, log);

    ModelWeights reference(cfg);
    for (const auto& p : tuned.parameters()) {
        const TensorPtr ref = [&] {
            for (const auto& q : reference.parameters())
                if (q.name == p.name) return q.tensor;
            return TensorPtr{};
        }();
        REQUIRE(ref);
        if (p.group == ParamGroup::Embeddings || p.group == ParamGroup::EncoderLayers)
            CHECK(p.tensor->data == ref->data);
        else if (p.group == ParamGroup::SentimentHead || p.group == ParamGroup::LangidHead)
            CHECK(p.tensor->data != ref->data);
    }
}

TEST_CASE("finetune rejects unlabeled records") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.seed = 2;
    spec.num_records = 6;
    auto corpus = generate_synthetic(spec);
    corpus[3].sentiment.reset();
    auto vocab = build_vocabulary(corpus, 128, 0.0);
    ModelConfig cfg = tiny_config(vocab.size());
    TrainConfig tcfg;
    tcfg.seed = 2;
    std::ostringstream log;
    try {
        finetune_multitask(ModelWeights(cfg), corpus, vocab, tcfg, nullptr, log);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("syn3") != std::string::npos);
    }
}

TEST_CASE("train config validation") {
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    TrainConfig zero_weights;
    zero_weights.sentiment_loss_weight = 0.0;
    zero_weights.langid_loss_weight = 0.0;
    CHECK_THROWS_AS(zero_weights.validate(), std::invalid_argument);
}
