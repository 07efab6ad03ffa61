#include "duwak/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "duwak/rand.hpp"

namespace duwak {

const char* to_string(Errc code) {
    switch (code) {
        case Errc::invalid_logits: return "invalid-logits";
        case Errc::invalid_distribution: return "invalid-distribution";
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::invalid_configuration: return "invalid-configuration";
        case Errc::undefined_test: return "undefined-test";
        case Errc::missing_map: return "missing-map";
        case Errc::attack_unavailable: return "attack-unavailable";
        case Errc::io_error: return "io-error";
    }
    return "unknown";
}

Vocabulary::Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    if (entries_.empty() || entries_[0] != unk_token) {
        throw Error(Errc::invalid_argument, "vocabulary entry 0 must be \"<unk>\"");
    }
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.empty()) {
            throw Error(Errc::invalid_argument, "empty vocabulary entry at id " + std::to_string(i));
        }
        if (!index_.emplace(e, static_cast<TokenId>(i)).second) {
            throw Error(Errc::invalid_argument, "duplicate vocabulary entry '" + e + "'");
        }
    }
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open vocabulary file " + path);
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        entries.push_back(line);
    }
    return Vocabulary(std::move(entries));
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io_error, "cannot write vocabulary file " + path);
    for (const auto& e : entries_) out << e << '\n';
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= entries_.size()) {
        throw Error(Errc::invalid_argument, "token id " + std::to_string(id) + " out of range");
    }
    return entries_[id];
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk_id : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return index_.count(std::string(token)) > 0;
}

namespace {

const std::vector<std::string>& function_words() {
    static const std::vector<std::string> words = {
        "the", "of", "and", "to", "a", "in", "is", "it", "that", "for", "on", "with", "as",
        "was", "he", "she", "they", "we", "you", "I", "be", "at", "by", "this", "had", "not",
        "are", "but", "from", "or", "have", "an", "which", "one", "were", "her", "all", "there",
        "been", "his", "if", "has", "will", "more", "can", "do", "would", "so", "what", "out",
        "up", "about", "who", "them", "some", "into", "does", "did", "could", "am", "when",
        "then", "than", "its", "our", "their", "my", "your", "no", "yes", "new", "time",
        "people", "year", "way", "day", "man", "world", "life", "hand", "part", "child",
        "eye", "woman", "place", "work", "week", "case", "point", "number", "group",
        "problem", "fact", "good", "small", "large", "great", "old", "long", "little",
        "own", "other", "right", "big", "high", "different", "next", "early", "young",
        "important", "few", "public", "bad", "same", "able", "say", "get", "make", "go",
        "know", "take", "see", "come", "think", "look", "want", "give", "use", "find",
        "tell", "ask", "seem", "feel", "try", "leave", "call",
    };
    return words;
}

}  // namespace

const std::vector<ContractionRule>& builtin_contractions() {
    static const std::vector<ContractionRule> rules = {
        {"do", "not", "don't"},      {"does", "not", "doesn't"},  {"did", "not", "didn't"},
        {"is", "not", "isn't"},      {"are", "not", "aren't"},    {"was", "not", "wasn't"},
        {"were", "not", "weren't"},  {"will", "not", "won't"},    {"would", "not", "wouldn't"},
        {"could", "not", "couldn't"}, {"has", "not", "hasn't"},   {"have", "not", "haven't"},
        {"it", "is", "it's"},        {"I", "am", "I'm"},          {"you", "are", "you're"},
        {"they", "are", "they're"},  {"we", "are", "we're"},      {"I", "will", "I'll"},
        {"he", "is", "he's"},        {"she", "is", "she's"},      {"that", "is", "that's"},
        {"there", "is", "there's"},  {"I", "have", "I've"},       {"you", "will", "you'll"},
    };
    return rules;
}

namespace {

std::string capitalise(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

std::string synthetic_word(std::uint64_t n) {
    static constexpr std::string_view onsets[] = {
        "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z",
        "br", "dr", "gr", "kr", "pl", "st", "tr", "sh", "th", "ch",
    };
    static constexpr std::string_view vowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
    static constexpr std::string_view codas[] = {"", "", "", "n", "r", "s", "l", "m", "t", "k"};
    std::uint64_t bits = mix64(0x5DEECE66DULL ^ n);
    const int syllables = 2 + static_cast<int>(bits % 2);
    bits /= 2;
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += onsets[bits % std::size(onsets)];
        bits /= std::size(onsets);
        w += vowels[bits % std::size(vowels)];
        bits /= std::size(vowels);
        if (s + 1 == syllables) w += codas[bits % std::size(codas)];
        bits /= std::size(codas);
    }
    return w;
}

bool is_word_char(unsigned char c) {
    return std::isalnum(c) || c == '\'' || c == '-' || c >= 0x80;
}

}  // namespace

Vocabulary Vocabulary::builtin(std::size_t size) {
    if (size < 2) throw Error(Errc::invalid_argument, "builtin vocabulary needs size >= 2");
    std::vector<std::string> entries{std::string(unk_token)};
    std::unordered_set<std::string> seen{entries[0]};
    auto add = [&](const std::string& w) {
        if (entries.size() < size && seen.insert(w).second) entries.push_back(w);
    };
    for (const char* p : {".", ",", "!", "?", ";", ":"}) add(p);
    for (const auto& w : function_words()) add(w);
    for (const auto& r : builtin_contractions()) add(r.merged);
    // Sentence-initial forms so that case folding has something to act on.
    for (std::size_t i = 0; i < 40 && i < function_words().size(); ++i) {
        add(capitalise(function_words()[i]));
    }
    for (std::uint64_t n = 0; entries.size() < size; ++n) {
        std::string w = synthetic_word(n);
        add(w);
        if (n % 8 == 0) add(capitalise(w));
    }
    return Vocabulary(std::move(entries));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (text.substr(i, Vocabulary::unk_token.size()) == Vocabulary::unk_token) {
            out.emplace_back(Vocabulary::unk_token);
            i += Vocabulary::unk_token.size();
        } else if (is_word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, text[i]);
            ++i;
        }
    }
    return out;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab) {
    TokenSeq seq;
    for (const auto& w : split_words(text)) seq.tokens.push_back(vocab.id(w));
    return seq;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(tokens[i]);
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw Error(Errc::invalid_logits, "softmax of an empty logit vector");
    double hi = -INFINITY;
    for (double l : logits) {
        if (!std::isfinite(l)) throw Error(Errc::invalid_logits, "non-finite logit");
        hi = std::max(hi, l);
    }
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - hi);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

void DuwakConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(Errc::invalid_configuration, msg); };
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0,1)");
    if (!(delta >= 0.0) || !std::isfinite(delta)) fail("delta must be finite and >= 0");
    if (!(eta >= 0.0 && eta <= 1.0)) fail("eta must lie in [0,1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0,1]");
    if (k < 1) fail("k must be >= 1");
    if (L < 1) fail("L must be >= 1");
    if (h < 1) fail("h must be >= 1");
    if (M < 49) fail("M must be >= 49");
    if (!(p_threshold > 0.0 && p_threshold < 1.0)) fail("p_threshold must lie in (0,1)");
    if (p_threshold < 1.0 / static_cast<double>(M + 1)) {
        fail("p_threshold below 1/(M+1): the contrastive p-value can never reach it");
    }
    if (max_inspect < 1) fail("max_inspect must be >= 1");
}

}  // namespace duwak
