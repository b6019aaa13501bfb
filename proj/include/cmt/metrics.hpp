#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cmt/corpus.hpp"
#include "cmt/model.hpp"
#include "cmt/vocab.hpp"

namespace cmt {

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts;  // rows = gold, cols = predicted

    std::size_t& at(std::size_t gold, std::size_t pred) {
        return counts[gold * num_classes + pred];
    }
    std::size_t at(std::size_t gold, std::size_t pred) const {
        return counts[gold * num_classes + pred];
    }
    std::size_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& gold, const std::vector<int>& pred,
                          std::size_t num_classes);

struct ClassScores {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::size_t support = 0;
};

struct EvalReport {
    std::vector<ClassScores> per_class;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::optional<double> langid_accuracy;
};

/// Per-class P/R/F1 with 0/0 := 0, macro = unweighted mean over all classes.
EvalReport scores_from_confusion(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

/// Argmax sentiment prediction for one record.
int predict_sentiment(const ModelWeights& weights, const TweetRecord& record,
                      const Vocabulary& vocab);

/// Sentiment macro-F1 plus token language-ID accuracy over supervised
/// positions. Throws if any record lacks a sentiment label.
EvalReport evaluate(const ModelWeights& weights, const std::vector<TweetRecord>& dataset,
                    const Vocabulary& vocab);

/// Flat `key value` lines, stable for golden files.
void write_report_text(const EvalReport& report, std::ostream& out);
void write_report_json(const EvalReport& report, std::ostream& out);

}  // namespace cmt
