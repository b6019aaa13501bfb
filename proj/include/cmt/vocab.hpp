#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cmt/corpus.hpp"

namespace cmt {

/// Label used for unsupervised positions in MLM and language-ID targets.
constexpr int kIgnoreIndex = -100;

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecials = 5;

    /// Builds the id<->token bijection from corpus tokens (specials first).
    /// Token order defines ids.
    explicit Vocabulary(const std::vector<std::string>& corpus_tokens);

    int id_of(const std::string& token) const;  // kUnk for unseen
    const std::string& token_of(int id) const;
    std::size_t size() const { return id_to_token_.size(); }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

struct TfidfStats {
    std::size_t num_documents = 0;
    std::unordered_map<std::string, std::size_t> document_frequency;
};

TfidfStats compute_tfidf_stats(const std::vector<TweetRecord>& corpus);

/// tf(t,d) * ln(N / df(t)) with tf = count(t,d)/|d|. Throws if the token
/// never occurs in the corpus (df undefined).
double tfidf_score(const std::string& token, const std::vector<std::string>& doc,
                   const TfidfStats& stats);

/// Ranks tokens by max tf-idf over documents (ties: higher raw frequency,
/// then lexicographic), drops scores below tfidf_floor, keeps the top
/// (max_size - specials).
Vocabulary build_vocabulary(const std::vector<TweetRecord>& corpus,
                            std::size_t max_size, double tfidf_floor);

struct Encoded {
    std::vector<int> ids;             // length max_len
    std::vector<int> attention_mask;  // 1 on CLS/content/SEP, 0 on PAD
};

/// [CLS] tokens [SEP], truncated to max_len (CLS/SEP kept), PAD-filled.
Encoded encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
               std::size_t max_len);

/// Language-tag targets aligned with encode()'s layout; specials and padding
/// carry kIgnoreIndex.
std::vector<int> align_tags(const std::vector<LangTag>& tags, std::size_t max_len);

}  // namespace cmt
