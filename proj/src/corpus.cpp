#include "cmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cmt {

std::string to_string(LangTag tag) {
    switch (tag) {
        case LangTag::En: return "en";
        case LangTag::Spa: return "spa";
        case LangTag::Hi: return "hi";
        case LangTag::Mixed: return "mixed";
        case LangTag::Univ: return "univ";
    }
    throw std::logic_error("invalid LangTag");
}

std::string to_string(Sentiment s) {
    switch (s) {
        case Sentiment::Positive: return "positive";
        case Sentiment::Negative: return "negative";
        case Sentiment::Neutral: return "neutral";
    }
    throw std::logic_error("invalid Sentiment");
}

LangTag parse_lang_tag(const std::string& s) {
    if (s == "en") return LangTag::En;
    if (s == "spa") return LangTag::Spa;
    if (s == "hi") return LangTag::Hi;
    if (s == "mixed") return LangTag::Mixed;
    if (s == "univ") return LangTag::Univ;
    throw std::runtime_error("unknown language tag '" + s + "'");
}

Sentiment parse_sentiment(const std::string& s) {
    if (s == "positive") return Sentiment::Positive;
    if (s == "negative") return Sentiment::Negative;
    // "pertinent" appears in some annotations as a variant of neutral.
    if (s == "neutral" || s == "pertinent") return Sentiment::Neutral;
    throw std::runtime_error("unknown sentiment '" + s + "'");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

void validate_record(const TweetRecord& r, std::size_t meta_line) {
    if (r.tokens.empty())
        throw ParseError(meta_line, "record '" + r.id + "' has no tokens");
    for (const auto& t : r.tokens) {
        if (t.empty())
            throw ParseError(meta_line, "record '" + r.id + "' has an empty token");
        if (t.find_first_of(" \t") != std::string::npos)
            throw ParseError(meta_line,
                             "record '" + r.id + "' token contains whitespace");
    }
}

}  // namespace

std::vector<TweetRecord> parse_conll(std::istream& in) {
    std::vector<TweetRecord> records;
    std::string line;
    std::size_t lineno = 0;
    bool in_block = false;
    TweetRecord cur;
    std::size_t meta_line = 0;
    auto finish = [&] {
        if (!in_block) return;
        validate_record(cur, meta_line);
        records.push_back(std::move(cur));
        cur = {};
        in_block = false;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            finish();
            continue;
        }
        auto fields = split_tabs(line);
        if (!in_block) {
            if (fields[0] != "meta")
                throw ParseError(lineno, "expected meta line, got '" + fields[0] + "'");
            if (fields.size() < 2 || fields.size() > 3 || fields[1].empty())
                throw ParseError(lineno, "meta line must be 'meta<TAB>id[<TAB>sentiment]'");
            cur.id = fields[1];
            if (fields.size() == 3) {
                try {
                    cur.sentiment = parse_sentiment(fields[2]);
                } catch (const std::runtime_error& e) {
                    throw ParseError(lineno, e.what());
                }
            }
            in_block = true;
            meta_line = lineno;
        } else {
            if (fields.size() != 2)
                throw ParseError(lineno, "expected '<token><TAB><langtag>'");
            if (fields[0].empty())
                throw ParseError(lineno, "empty token");
            try {
                cur.tags.push_back(parse_lang_tag(fields[1]));
            } catch (const std::runtime_error& e) {
                throw ParseError(lineno, e.what());
            }
            cur.tokens.push_back(fields[0]);
        }
    }
    finish();
    return records;
}

void write_conll(const std::vector<TweetRecord>& records, std::ostream& out) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        out << "meta\t" << r.id;
        if (r.sentiment) out << '\t' << to_string(*r.sentiment);
        out << '\n';
        for (std::size_t k = 0; k < r.tokens.size(); ++k)
            out << r.tokens[k] << '\t' << to_string(r.tags[k]) << '\n';
        if (i + 1 < records.size()) out << '\n';
    }
}

std::vector<TweetRecord> load_conll_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    return parse_conll(in);
}

void save_conll_file(const std::vector<TweetRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    write_conll(records, out);
}

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    using L = LangTag;
    using S = Sentiment;
    spec.lexicons[{L::En, S::Positive}] = {"love", "great", "happy", "awesome",
                                           "wonderful", "best", "amazing", "joy"};
    spec.lexicons[{L::En, S::Negative}] = {"hate", "awful", "sad", "terrible",
                                           "worst", "angry", "horrible", "pain"};
    spec.lexicons[{L::En, S::Neutral}] = {"today", "people", "city", "phone",
                                          "weather", "train", "office", "coffee"};
    spec.lexicons[{L::Spa, S::Positive}] = {"feliz", "bueno", "genial", "bonito",
                                            "alegria", "excelente", "bien", "gracias"};
    spec.lexicons[{L::Spa, S::Negative}] = {"triste", "malo", "horrible", "feo",
                                            "enojado", "odio", "peor", "dolor"};
    spec.lexicons[{L::Spa, S::Neutral}] = {"hoy", "gente", "ciudad", "telefono",
                                           "tiempo", "tren", "oficina", "cafe"};
    spec.lexicons[{L::Hi, S::Positive}] = {"khushi", "accha", "badhiya", "mast",
                                           "pyaar", "shandar", "shukriya", "umda"};
    spec.lexicons[{L::Hi, S::Negative}] = {"dukh", "bura", "ganda", "gussa",
                                           "nafrat", "bekar", "dard", "kharab"};
    spec.lexicons[{L::Hi, S::Neutral}] = {"aaj", "log", "shahar", "mausam",
                                          "gaadi", "daftar", "chai", "kal"};
    spec.lexicons[{L::Univ, S::Positive}] = {"#blessed", "#win", "#smile"};
    spec.lexicons[{L::Univ, S::Negative}] = {"#fail", "#ugh", "#nope"};
    spec.lexicons[{L::Univ, S::Neutral}] = {"#news", "#daily", "#misc"};
    return spec;
}

namespace {

std::size_t bounded(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

double unit(std::mt19937_64& rng) {
    return double(rng() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[bounded(rng, i)]);
}

}  // namespace

std::vector<TweetRecord> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.code_mix_ratio < 0.0 || spec.code_mix_ratio > 1.0)
        throw std::invalid_argument("code_mix_ratio must be in [0,1]");
    if (spec.min_len == 0 || spec.max_len < spec.min_len)
        throw std::invalid_argument("invalid length bounds");
    for (const auto& [key, words] : spec.lexicons)
        if (words.empty())
            throw std::invalid_argument("empty lexicon for " + to_string(key.first) +
                                        "/" + to_string(key.second));

    std::mt19937_64 rng(spec.seed);
    std::vector<TweetRecord> records;
    records.reserve(spec.num_records);
    for (std::size_t i = 0; i < spec.num_records; ++i) {
        auto sentiment = Sentiment(bounded(rng, kNumSentiments));
        // Each tweet mixes English with one other language, as in real
        // En-Spa / En-Hi streams.
        LangTag mix_lang = bounded(rng, 2) ? LangTag::Spa : LangTag::Hi;
        std::size_t len =
            spec.min_len + bounded(rng, spec.max_len - spec.min_len + 1);
        TweetRecord r;
        r.id = "syn" + std::to_string(i);
        r.sentiment = sentiment;
        for (std::size_t k = 0; k < len; ++k) {
            LangTag lang;
            if (unit(rng) < spec.univ_prob) lang = LangTag::Univ;
            else if (unit(rng) < spec.code_mix_ratio) lang = mix_lang;
            else lang = LangTag::En;
            auto it = spec.lexicons.find({lang, sentiment});
            if (it == spec.lexicons.end())
                throw std::invalid_argument("missing lexicon for " + to_string(lang) +
                                            "/" + to_string(sentiment));
            r.tokens.push_back(it->second[bounded(rng, it->second.size())]);
            r.tags.push_back(lang);
        }
        records.push_back(std::move(r));
    }
    return records;
}

SplitResult split(const std::vector<TweetRecord>& records,
                  const std::array<double, 3>& fractions, std::uint64_t seed) {
    double total = fractions[0] + fractions[1] + fractions[2];
    for (double f : fractions)
        if (f <= 0.0) throw std::invalid_argument("split fractions must be positive");
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
    if (records.size() < 3)
        throw std::invalid_argument("fewer records than splits");

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    seeded_shuffle(order, rng);

    std::size_t n = records.size();
    // Largest-remainder apportionment of block sizes.
    std::array<std::size_t, 3> sizes;
    std::array<double, 3> rem;
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double exact = fractions[i] * double(n);
        sizes[i] = std::size_t(std::floor(exact + 1e-12));
        rem[i] = exact - double(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        ++sizes[best];
        rem[best] = -1.0;
        ++assigned;
    }

    SplitResult out;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < sizes[0]; ++i) out.train.push_back(records[order[pos++]]);
    for (std::size_t i = 0; i < sizes[1]; ++i) out.dev.push_back(records[order[pos++]]);
    for (std::size_t i = 0; i < sizes[2]; ++i) out.test.push_back(records[order[pos++]]);
    return out;
}

}  // namespace cmt
