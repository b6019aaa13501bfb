#include "cmt/preprocess.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmt {

std::vector<char32_t> utf8_decode(const std::string& s) {
    std::vector<char32_t> out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        char32_t cp;
        std::size_t len;
        if (c < 0x80) { cp = c; len = 1; }
        else if ((c & 0xE0) == 0xC0) { cp = c & 0x1F; len = 2; }
        else if ((c & 0xF0) == 0xE0) { cp = c & 0x0F; len = 3; }
        else if ((c & 0xF8) == 0xF0) { cp = c & 0x07; len = 4; }
        else throw std::runtime_error("invalid UTF-8 lead byte");
        if (i + len > s.size()) throw std::runtime_error("truncated UTF-8 sequence");
        for (std::size_t k = 1; k < len; ++k) {
            unsigned char cc = s[i + k];
            if ((cc & 0xC0) != 0x80) throw std::runtime_error("invalid UTF-8 continuation");
            cp = (cp << 6) | (cc & 0x3F);
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
    std::string out;
    for (char32_t cp : cps) {
        if (cp < 0x80) out += char(cp);
        else if (cp < 0x800) {
            out += char(0xC0 | (cp >> 6));
            out += char(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += char(0xE0 | (cp >> 12));
            out += char(0x80 | ((cp >> 6) & 0x3F));
            out += char(0x80 | (cp & 0x3F));
        } else {
            out += char(0xF0 | (cp >> 18));
            out += char(0x80 | ((cp >> 12) & 0x3F));
            out += char(0x80 | ((cp >> 6) & 0x3F));
            out += char(0x80 | (cp & 0x3F));
        }
    }
    return out;
}

bool is_emoji_codepoint(char32_t cp) {
    return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, symbols
           (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
           (cp >= 0x2B00 && cp <= 0x2BFF) ||    // stars, arrows
           (cp >= 0x1F3FB && cp <= 0x1F3FF) ||  // skin tone modifiers (in range above)
           cp == 0x200D || cp == 0xFE0F || cp == 0xFE0E || cp == 0x20E3 ||
           cp == 0x2122 || cp == 0x2139 ||
           (cp >= 0x2190 && cp <= 0x21FF && (cp == 0x2194 || cp == 0x2195 ||
                                             (cp >= 0x2196 && cp <= 0x2199)));
}

EmojiTable EmojiTable::load(std::istream& in) {
    EmojiTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("emoji table line " + std::to_string(lineno) +
                                     ": missing tab separator");
        std::string key = line.substr(0, tab);
        std::string phrase = line.substr(tab + 1);
        for (char c : phrase)
            if (!(c == ' ' || (c >= 'a' && c <= 'z')))
                throw std::runtime_error("emoji table line " + std::to_string(lineno) +
                                         ": phrase must be lowercase words");
        auto cps = utf8_decode(key);
        std::u32string ukey(cps.begin(), cps.end());
        table.max_key_len_ = std::max(table.max_key_len_, ukey.size());
        table.entries_[ukey] = phrase;
    }
    return table;
}

EmojiTable EmojiTable::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open emoji table: " + path);
    return load(in);
}

std::size_t EmojiTable::match(const std::vector<char32_t>& text, std::size_t i,
                              const std::string** phrase) const {
    std::size_t max_len = std::min(max_key_len_, text.size() - i);
    for (std::size_t len = max_len; len >= 1; --len) {
        std::u32string key(text.begin() + i, text.begin() + i + len);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            *phrase = &it->second;
            return len;
        }
    }
    return 0;
}

std::string substitute_emoji(const std::string& text, const EmojiTable& table) {
    auto cps = utf8_decode(text);
    std::vector<char32_t> out;
    std::size_t i = 0;
    while (i < cps.size()) {
        const std::string* phrase = nullptr;
        std::size_t consumed = table.match(cps, i, &phrase);
        if (consumed > 0) {
            out.push_back(U' ');
            for (char c : *phrase) out.push_back(char32_t(c));
            out.push_back(U' ');
            i += consumed;
        } else if (is_emoji_codepoint(cps[i])) {
            ++i;  // unknown emoji are dropped
        } else {
            out.push_back(cps[i]);
            ++i;
        }
    }
    return utf8_encode(out);
}

std::string filter_characters(const std::string& text, const FilterPolicy& policy) {
    auto cps = utf8_decode(text);
    if (policy.lowercase)
        for (char32_t& cp : cps)
            if (cp >= U'A' && cp <= U'Z') cp += 32;

    // Character stripping runs before the whole-token rules; this keeps the
    // pipeline idempotent (a token that only becomes "url" after stripping is
    // still replaced on the first pass).
    std::vector<std::string> out_tokens;
    std::vector<char32_t> token;
    auto flush = [&] {
        if (token.empty()) return;
        std::string kept;
        for (char32_t cp : token) {
            if (cp > 0x7F) continue;
            char c = char(cp);
            if (policy.delete_chars.count(c)) continue;
            bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') ||
                      policy.allowed_punct.find(c) != std::string::npos;
            if (ok) kept += c;
        }
        token.clear();
        if (kept.empty()) return;
        if (kept == "url") out_tokens.push_back(policy.url_token_replacement);
        else if (!policy.delete_tokens.count(kept)) out_tokens.push_back(kept);
    };
    for (char32_t cp : cps) {
        if (cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r') flush();
        else token.push_back(cp);
    }
    flush();

    std::string result;
    for (std::size_t i = 0; i < out_tokens.size(); ++i) {
        if (i) result += ' ';
        result += out_tokens[i];
    }
    return result;
}

std::string preprocess_text(const std::string& text, const EmojiTable& table,
                            const FilterPolicy& policy) {
    return filter_characters(substitute_emoji(text, table), policy);
}

std::vector<TweetRecord> preprocess_records(const std::vector<TweetRecord>& records,
                                            const EmojiTable& table,
                                            const FilterPolicy& policy,
                                            std::vector<std::string>* dropped) {
    std::vector<TweetRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        TweetRecord cleaned;
        cleaned.id = r.id;
        cleaned.sentiment = r.sentiment;
        for (std::size_t i = 0; i < r.tokens.size(); ++i) {
            std::istringstream words(preprocess_text(r.tokens[i], table, policy));
            std::string word;
            while (words >> word) {
                cleaned.tokens.push_back(word);
                cleaned.tags.push_back(r.tags[i]);
            }
        }
        if (cleaned.tokens.empty()) {
            if (dropped) dropped->push_back(r.id);
            continue;
        }
        out.push_back(std::move(cleaned));
    }
    return out;
}

}  // namespace cmt
