#include "cmt/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cmt {

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t(0));
}

ConfusionMatrix confusion(const std::vector<int>& gold, const std::vector<int>& pred,
                          std::size_t num_classes) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("confusion: gold/pred length mismatch");
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(num_classes * num_classes, 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || std::size_t(gold[i]) >= num_classes ||
            pred[i] < 0 || std::size_t(pred[i]) >= num_classes)
            throw std::invalid_argument("confusion: class id out of range");
        ++cm.at(std::size_t(gold[i]), std::size_t(pred[i]));
    }
    return cm;
}

EvalReport scores_from_confusion(const ConfusionMatrix& cm) {
    EvalReport report;
    const std::size_t c = cm.num_classes;
    std::size_t correct = 0;
    double f1_sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t tp = cm.at(k, k);
        std::size_t row = 0, col = 0;
        for (std::size_t j = 0; j < c; ++j) {
            row += cm.at(k, j);
            col += cm.at(j, k);
        }
        ClassScores s;
        s.support = row;
        s.precision = col ? double(tp) / double(col) : 0.0;
        s.recall = row ? double(tp) / double(row) : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        f1_sum += s.f1;
        correct += tp;
        report.per_class.push_back(s);
    }
    report.macro_f1 = c ? f1_sum / double(c) : 0.0;
    std::size_t n = cm.total();
    report.accuracy = n ? double(correct) / double(n) : 0.0;
    return report;
}

double macro_f1(const ConfusionMatrix& cm) { return scores_from_confusion(cm).macro_f1; }

int predict_sentiment(const ModelWeights& weights, const TweetRecord& record,
                      const Vocabulary& vocab) {
    auto enc = encode(record.tokens, vocab, weights.config().max_len);
    auto logits = forward_multitask(weights, enc.ids, enc.attention_mask).sentiment;
    return int(std::max_element(logits->data.begin(), logits->data.end()) -
               logits->data.begin());
}

EvalReport evaluate(const ModelWeights& weights, const std::vector<TweetRecord>& dataset,
                    const Vocabulary& vocab) {
    std::vector<int> gold, pred;
    std::size_t lang_correct = 0, lang_total = 0;
    const std::size_t max_len = weights.config().max_len;
    for (const auto& r : dataset) {
        if (!r.sentiment)
            throw std::invalid_argument("evaluate: record '" + r.id + "' is unlabeled");
        auto enc = encode(r.tokens, vocab, max_len);
        auto logits = forward_multitask(weights, enc.ids, enc.attention_mask);
        gold.push_back(int(*r.sentiment));
        pred.push_back(int(std::max_element(logits.sentiment->data.begin(),
                                            logits.sentiment->data.end()) -
                           logits.sentiment->data.begin()));
        auto tag_targets = align_tags(r.tags, max_len);
        const std::size_t nl = weights.config().num_langtags;
        for (std::size_t i = 0; i < max_len; ++i) {
            if (tag_targets[i] == kIgnoreIndex) continue;
            const double* row = &logits.langid->data[i * nl];
            int best = int(std::max_element(row, row + nl) - row);
            if (best == tag_targets[i]) ++lang_correct;
            ++lang_total;
        }
    }
    EvalReport report =
        scores_from_confusion(confusion(gold, pred, std::size_t(kNumSentiments)));
    if (lang_total) report.langid_accuracy = double(lang_correct) / double(lang_total);
    return report;
}

void write_report_text(const EvalReport& report, std::ostream& out) {
    out << std::fixed << std::setprecision(6);
    out << "macro_f1 " << report.macro_f1 << '\n';
    out << "accuracy " << report.accuracy << '\n';
    if (report.langid_accuracy)
        out << "langid_accuracy " << *report.langid_accuracy << '\n';
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        const auto& s = report.per_class[k];
        std::string label = to_string(Sentiment(k));
        out << label << "_precision " << s.precision << '\n';
        out << label << "_recall " << s.recall << '\n';
        out << label << "_f1 " << s.f1 << '\n';
        out << label << "_support " << s.support << '\n';
    }
}

void write_report_json(const EvalReport& report, std::ostream& out) {
    nlohmann::json j;
    j["macro_f1"] = report.macro_f1;
    j["accuracy"] = report.accuracy;
    if (report.langid_accuracy) j["langid_accuracy"] = *report.langid_accuracy;
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        const auto& s = report.per_class[k];
        nlohmann::json c;
        c["precision"] = s.precision;
        c["recall"] = s.recall;
        c["f1"] = s.f1;
        c["support"] = s.support;
        j["classes"][to_string(Sentiment(k))] = c;
    }
    out << j.dump(2) << '\n';
}

}  // namespace cmt
