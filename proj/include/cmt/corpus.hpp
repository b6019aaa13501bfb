#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace cmt {

enum class LangTag { En = 0, Spa = 1, Hi = 2, Mixed = 3, Univ = 4 };
enum class Sentiment { Positive = 0, Negative = 1, Neutral = 2 };

constexpr int kNumLangTags = 5;
constexpr int kNumSentiments = 3;

std::string to_string(LangTag tag);
std::string to_string(Sentiment s);
LangTag parse_lang_tag(const std::string& s);        // throws on unknown tag
Sentiment parse_sentiment(const std::string& s);     // accepts "pertinent" as neutral

struct TweetRecord {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<LangTag> tags;
    std::optional<Sentiment> sentiment;

    bool operator==(const TweetRecord&) const = default;
};

/// Parse failure with a 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Blocks separated by blank lines. First line of a block:
/// `meta<TAB><id>[<TAB><sentiment>]`, then one `<token><TAB><langtag>` per line.
std::vector<TweetRecord> parse_conll(std::istream& in);
void write_conll(const std::vector<TweetRecord>& records, std::ostream& out);

std::vector<TweetRecord> load_conll_file(const std::string& path);
void save_conll_file(const std::vector<TweetRecord>& records, const std::string& path);

struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::size_t num_records = 0;
    /// Word lists keyed by (language, sentiment); disjoint across sentiments
    /// so the generated corpus is label-separable.
    std::map<std::pair<LangTag, Sentiment>, std::vector<std::string>> lexicons;
    std::size_t min_len = 4;
    std::size_t max_len = 12;
    /// Probability that a content word is drawn from the record's non-English
    /// lexicon instead of English.
    double code_mix_ratio = 0.5;
    /// Probability of a univ token (hashtag-like) at each position.
    double univ_prob = 0.15;
};

/// Built-in disjoint lexicons for En/Spa/Hi/Univ x sentiment.
SyntheticSpec default_synthetic_spec();

std::vector<TweetRecord> generate_synthetic(const SyntheticSpec& spec);

struct SplitResult {
    std::vector<TweetRecord> train, dev, test;
};

/// Deterministic seeded shuffle, then partition by fractions (largest
/// remainder rounding; fractions must sum to 1).
SplitResult split(const std::vector<TweetRecord>& records,
                  const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace cmt
