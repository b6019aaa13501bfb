#include "cmt/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cmt {

namespace {
const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

Vocabulary::Vocabulary(const std::vector<std::string>& corpus_tokens) {
    id_to_token_ = kSpecials;
    for (const auto& t : corpus_tokens) {
        if (std::find(kSpecials.begin(), kSpecials.end(), t) != kSpecials.end())
            throw std::invalid_argument("corpus token collides with special: " + t);
        id_to_token_.push_back(t);
    }
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], int(i)).second)
            throw std::invalid_argument("duplicate vocabulary token: " + id_to_token_[i]);
    }
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || std::size_t(id) >= id_to_token_.size())
        throw std::out_of_range("vocabulary id out of range");
    return id_to_token_[std::size_t(id)];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    for (const auto& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    if (tokens.size() < kSpecials.size() ||
        !std::equal(kSpecials.begin(), kSpecials.end(), tokens.begin()))
        throw std::runtime_error("vocabulary file missing special tokens: " + path);
    return Vocabulary({tokens.begin() + kSpecials.size(), tokens.end()});
}

TfidfStats compute_tfidf_stats(const std::vector<TweetRecord>& corpus) {
    TfidfStats stats;
    stats.num_documents = corpus.size();
    for (const auto& r : corpus) {
        std::unordered_map<std::string, bool> seen;
        for (const auto& t : r.tokens)
            if (seen.emplace(t, true).second) ++stats.document_frequency[t];
    }
    return stats;
}

double tfidf_score(const std::string& token, const std::vector<std::string>& doc,
                   const TfidfStats& stats) {
    if (doc.empty()) throw std::invalid_argument("tfidf_score: empty document");
    auto it = stats.document_frequency.find(token);
    if (it == stats.document_frequency.end())
        throw std::invalid_argument("tfidf_score: token unseen in corpus: " + token);
    std::size_t count = std::size_t(std::count(doc.begin(), doc.end(), token));
    double tf = double(count) / double(doc.size());
    double idf = std::log(double(stats.num_documents) / double(it->second));
    return tf * idf;
}

Vocabulary build_vocabulary(const std::vector<TweetRecord>& corpus,
                            std::size_t max_size, double tfidf_floor) {
    if (corpus.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
    if (max_size <= std::size_t(Vocabulary::kNumSpecials))
        throw std::invalid_argument("build_vocabulary: max_size must exceed specials");

    TfidfStats stats = compute_tfidf_stats(corpus);
    std::unordered_map<std::string, double> max_score;
    std::unordered_map<std::string, std::size_t> frequency;
    for (const auto& r : corpus) {
        for (const auto& t : r.tokens) ++frequency[t];
        std::unordered_map<std::string, bool> seen;
        for (const auto& t : r.tokens) {
            if (!seen.emplace(t, true).second) continue;
            double s = tfidf_score(t, r.tokens, stats);
            auto [it, inserted] = max_score.emplace(t, s);
            if (!inserted) it->second = std::max(it->second, s);
        }
    }

    struct Ranked {
        std::string token;
        double score;
        std::size_t freq;
    };
    std::vector<Ranked> ranked;
    for (const auto& [tok, score] : max_score)
        if (score >= tfidf_floor) ranked.push_back({tok, score, frequency[tok]});
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.freq != b.freq) return a.freq > b.freq;
        return a.token < b.token;
    });

    std::size_t keep = std::min(ranked.size(),
                                max_size - std::size_t(Vocabulary::kNumSpecials));
    std::vector<std::string> tokens;
    tokens.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].token);
    return Vocabulary(tokens);
}

Encoded encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
               std::size_t max_len) {
    if (max_len < 3) throw std::invalid_argument("encode: max_len must be >= 3");
    std::size_t content = std::min(tokens.size(), max_len - 2);
    Encoded e;
    e.ids.reserve(max_len);
    e.ids.push_back(Vocabulary::kCls);
    for (std::size_t i = 0; i < content; ++i) e.ids.push_back(vocab.id_of(tokens[i]));
    e.ids.push_back(Vocabulary::kSep);
    e.attention_mask.assign(e.ids.size(), 1);
    while (e.ids.size() < max_len) {
        e.ids.push_back(Vocabulary::kPad);
        e.attention_mask.push_back(0);
    }
    return e;
}

std::vector<int> align_tags(const std::vector<LangTag>& tags, std::size_t max_len) {
    if (max_len < 3) throw std::invalid_argument("align_tags: max_len must be >= 3");
    std::size_t content = std::min(tags.size(), max_len - 2);
    std::vector<int> out(max_len, kIgnoreIndex);
    for (std::size_t i = 0; i < content; ++i) out[i + 1] = int(tags[i]);
    return out;
}

}  // namespace cmt
