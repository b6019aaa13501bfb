#include <doctest.h>

#include <random>
#include <sstream>

#include "cmt/metrics.hpp"

using namespace cmt;

TEST_CASE("confusion matrix tallies") {
    auto diag = confusion({0, 1, 2}, {0, 1, 2}, 3);
    CHECK(diag.at(0, 0) == 1);
    CHECK(diag.at(1, 1) == 1);
    CHECK(diag.total() == 3);

    CHECK(confusion({}, {}, 3).total() == 0);

    auto cm = confusion({0, 0, 1, 2}, {0, 1, 1, 1}, 3);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.at(2, 1) == 1);
    CHECK(cm.total() == 4);

    CHECK_THROWS_AS(confusion({0}, {0, 1}, 3), std::invalid_argument);
    CHECK_THROWS_AS(confusion({5}, {0}, 3), std::invalid_argument);
}

TEST_CASE("macro F1 hand computation") {
    CHECK(macro_f1(confusion({0, 1, 2, 0}, {0, 1, 2, 0}, 3)) == doctest::Approx(1.0));
    CHECK(macro_f1(confusion({0, 1, 2}, {1, 2, 0}, 3)) == doctest::Approx(0.0));

    // P=(1, 1/3, 0), R=(1/2, 1, 0), F1=(2/3, 1/2, 0), macro = 0.38889.
    auto cm = confusion({0, 0, 1, 2}, {0, 1, 1, 1}, 3);
    auto report = scores_from_confusion(cm);
    CHECK(report.per_class[0].precision == doctest::Approx(1.0));
    CHECK(report.per_class[0].recall == doctest::Approx(0.5));
    CHECK(report.per_class[1].precision == doctest::Approx(1.0 / 3.0));
    CHECK(report.per_class[2].f1 == doctest::Approx(0.0));
    CHECK(report.macro_f1 == doctest::Approx(0.38889).epsilon(1e-4));
}

TEST_CASE("macro F1 is invariant under consistent class relabeling") {
    std::mt19937_64 rng(31);
    std::vector<int> gold, pred;
    for (int i = 0; i < 200; ++i) {
        gold.push_back(int(rng() % 3));
        pred.push_back(int(rng() % 3));
    }
    double base = macro_f1(confusion(gold, pred, 3));
    std::vector<int> perm = {2, 0, 1};
    std::vector<int> g2, p2;
    for (int v : gold) g2.push_back(perm[std::size_t(v)]);
    for (int v : pred) p2.push_back(perm[std::size_t(v)]);
    CHECK(macro_f1(confusion(g2, p2, 3)) == doctest::Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
}

TEST_CASE("uniform random predictor scores near 1/3 on balanced data") {
    std::mt19937_64 rng(77);
    std::vector<int> gold, pred;
    for (int i = 0; i < 10000; ++i) {
        gold.push_back(i % 3);
        pred.push_back(int(rng() % 3));
    }
    CHECK(macro_f1(confusion(gold, pred, 3)) == doctest::Approx(1.0 / 3.0).epsilon(0.06));
}

TEST_CASE("evaluate is consistent with an external recomputation") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.seed = 23;
    spec.num_records = 30;
    auto dataset = generate_synthetic(spec);
    auto vocab = build_vocabulary(dataset, 256, 0.0);
    ModelConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.max_len = 16;
    cfg.d_model = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 1;
    cfg.d_ff = 8;
    cfg.seed = 23;
    ModelWeights w(cfg);

    auto report = evaluate(w, dataset, vocab);
    std::vector<int> gold, pred;
    for (const auto& r : dataset) {
        gold.push_back(int(*r.sentiment));
        pred.push_back(predict_sentiment(w, r, vocab));
    }
    double recomputed = macro_f1(confusion(gold, pred, 3));
    CHECK(std::abs(report.macro_f1 - recomputed) <= 1e-12);
    REQUIRE(report.langid_accuracy.has_value());
    CHECK(*report.langid_accuracy >= 0.0);
    CHECK(*report.langid_accuracy <= 1.0);
}

TEST_CASE("evaluate with a bias-hardwired model on single-class data") {
    // Zero weights + a dominant sentiment bias always predict that class;
    // on a dataset of only that class the macro F1 per supported class is 1.
    SyntheticSpec spec = default_synthetic_spec();
    spec.seed = 29;
    spec.num_records = 40;
    auto all = generate_synthetic(spec);
    std::vector<TweetRecord> positives;
    for (auto& r : all)
        if (r.sentiment == Sentiment::Positive) positives.push_back(r);
    REQUIRE(!positives.empty());

    auto vocab = build_vocabulary(all, 256, 0.0);
    ModelConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.max_len = 16;
    cfg.d_model = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 1;
    cfg.d_ff = 8;
    cfg.seed = 29;
    ModelWeights w(cfg);
    std::fill(w.sentiment_w->data.begin(), w.sentiment_w->data.end(), 0.0);
    w.sentiment_b->data = {10.0, 0.0, 0.0};

    auto report = evaluate(w, positives, vocab);
    CHECK(report.accuracy == doctest::Approx(1.0));
    CHECK(report.per_class[0].f1 == doctest::Approx(1.0));

    auto unlabeled = positives;
    unlabeled[0].sentiment.reset();
    CHECK_THROWS_AS(evaluate(w, unlabeled, vocab), std::invalid_argument);
}

TEST_CASE("report serialization formats") {
    auto report = scores_from_confusion(confusion({0, 1, 2}, {0, 1, 2}, 3));
    std::ostringstream text;
    write_report_text(report, text);
    CHECK(text.str().find("macro_f1 1.000000") == 0);
    CHECK(text.str().find("positive_f1 1.000000") != std::string::npos);

    std::ostringstream json;
    write_report_json(report, json);
    CHECK(json.str().find("\"macro_f1\"") != std::string::npos);
}
