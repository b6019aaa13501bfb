#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cmt {

/// Immutable emoji -> replacement-phrase table. Keys are code point
/// sequences; values are lowercase space-delimited phrases.
class EmojiTable {
public:
    /// Loads the tab-separated resource format: `<emoji>\t<phrase>` per
    /// line, `#` comments. Throws std::runtime_error on malformed lines.
    static EmojiTable load(std::istream& in);
    static EmojiTable load_file(const std::string& path);

    /// Longest-match lookup at position i of a decoded string. Returns the
    /// number of code points consumed (0 if no entry starts here).
    std::size_t match(const std::vector<char32_t>& text, std::size_t i,
                      const std::string** phrase) const;

    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::u32string, std::string> entries_;
    std::size_t max_key_len_ = 0;
};

struct FilterPolicy {
    bool lowercase = true;
    std::string url_token_replacement = "http";
    std::set<std::string> delete_tokens = {"https"};
    std::set<char> delete_chars = {'@'};
    // Characters retained after filtering, besides ASCII letters/digits.
    std::string allowed_punct = ".,!?'#";
};

/// True for code points with the Emoji property (approximated by block
/// ranges), including ZWJ, variation selectors, and skin-tone modifiers.
bool is_emoji_codepoint(char32_t cp);

std::vector<char32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<char32_t>& cps);

/// Replaces known emoji with " phrase ", deletes unknown emoji, leaves
/// everything else untouched.
std::string substitute_emoji(const std::string& text, const EmojiTable& table);

/// Lowercases, applies token-level URL replacement and deletions, strips
/// disallowed characters, and normalizes whitespace.
std::string filter_characters(const std::string& text, const FilterPolicy& policy);

/// filter_characters(substitute_emoji(text)). Idempotent.
std::string preprocess_text(const std::string& text, const EmojiTable& table,
                            const FilterPolicy& policy = {});

}  // namespace cmt

#include "cmt/corpus.hpp"

namespace cmt {

/// Applies preprocess_text to every token of every record. A token that
/// expands into several words copies its language tag onto each word;
/// records whose tokens all vanish are dropped (ids returned in `dropped`
/// when non-null).
std::vector<TweetRecord> preprocess_records(const std::vector<TweetRecord>& records,
                                            const EmojiTable& table,
                                            const FilterPolicy& policy = {},
                                            std::vector<std::string>* dropped = nullptr);

}  // namespace cmt
