#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace duwak {

using TokenId = std::uint32_t;

enum class Errc {
    invalid_logits,
    invalid_distribution,
    invalid_argument,
    invalid_configuration,
    undefined_test,
    missing_map,
    attack_unavailable,
    io_error,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Ids are dense 0..size()-1. Id 0 is always the "<unk>" sentinel.
class Vocabulary {
public:
    static constexpr TokenId unk_id = 0;
    static constexpr std::string_view unk_token = "<unk>";

    // `entries[0]` must be "<unk>"; remaining entries must be unique and non-empty.
    explicit Vocabulary(std::vector<std::string> entries);

    // One token per line, line number = id.
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    // Deterministic English-like vocabulary of exactly `size` entries: punctuation,
    // common function words (some with capitalised forms), contraction pairs and
    // synthetic syllable words.
    static Vocabulary builtin(std::size_t size);

    std::size_t size() const noexcept { return entries_.size(); }
    const std::string& token(TokenId id) const;
    // Returns unk_id for out-of-vocabulary strings.
    TokenId id(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::vector<std::string>& entries() const noexcept { return entries_; }

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, TokenId> index_;
};

struct ContractionRule {
    std::string first;
    std::string second;
    std::string merged;
};

// English contractions whose three forms all appear in Vocabulary::builtin.
const std::vector<ContractionRule>& builtin_contractions();

enum class Origin { prompt, generated, attacked };

struct TokenSeq {
    std::vector<TokenId> tokens;
    Origin origin = Origin::generated;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
};

// Splits on whitespace; punctuation characters become their own tokens. Letters,
// digits, apostrophes and hyphens are word characters.
std::vector<std::string> split_words(std::string_view text);
TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);
// Joins tokens with single spaces; UNK renders as "<unk>".
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

// Max-subtracted softmax. Throws Errc::invalid_logits on non-finite input.
std::vector<double> softmax(std::span<const double> logits);

std::size_t argmax(std::span<const double> values);

struct DuwakConfig {
    double gamma = 0.5;          // green fraction
    double delta = 2.5;          // logit bias
    double eta = 0.5;            // probability of the contrastive branch
    double alpha = 0.5;          // similarity weight in contrastive search
    std::size_t k = 20;          // contrastive candidate width
    std::size_t L = 50;          // similarity window
    std::size_t h = 1;           // hash context window
    std::size_t M = 99;          // decoy keys for the contrastive p-value
    std::uint64_t detector_seed = 0x4455574B2D444554ULL;  // decoy key derivation
    double p_threshold = 0.02;
    std::size_t max_inspect = 1024;
    std::size_t max_context = 4096;

    // Throws Errc::invalid_configuration.
    void validate() const;
};

}  // namespace duwak
