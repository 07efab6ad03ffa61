#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "duwak/core.hpp"

namespace duwak {

// Logits plus unit-norm hidden states. Implementations must be pure functions of
// their arguments and safe to call concurrently.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual const Vocabulary& vocab() const = 0;
    virtual std::vector<double> next_logits(std::span<const TokenId> context) const = 0;
    // Unit Euclidean norm, length hidden_dim().
    virtual std::span<const double> hidden(TokenId token) const = 0;
    virtual std::size_t hidden_dim() const = 0;

    std::size_t vocab_size() const { return vocab().size(); }
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;

inline double cosine(const LanguageModel& model, TokenId a, TokenId b) {
    return dot(model.hidden(a), model.hidden(b));
}

// Deterministic stand-in for a transformer:
//   logits[n] = (emb(n)·ctx + 0.5 * noise(context_seed(context, 3), n)) / temperature
// where ctx is the mean embedding of the last three tokens (sentinel-padded) and
// noise is a keyed standard normal. Hidden states are the static embeddings.
class MockLM final : public LanguageModel {
public:
    static constexpr std::size_t context_window = 3;
    static constexpr double noise_scale = 0.5;

    MockLM(std::uint64_t model_seed, std::shared_ptr<const Vocabulary> vocab, std::size_t dim,
           double temperature);

    const Vocabulary& vocab() const override { return *vocab_; }
    std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
    std::vector<double> next_logits(std::span<const TokenId> context) const override;
    std::span<const double> hidden(TokenId token) const override;
    std::size_t hidden_dim() const override { return dim_; }

    std::uint64_t model_seed() const noexcept { return model_seed_; }
    double temperature() const noexcept { return temperature_; }

private:
    std::uint64_t model_seed_;
    std::uint64_t noise_key_;
    std::shared_ptr<const Vocabulary> vocab_;
    std::size_t dim_;
    double temperature_;
    std::vector<double> embeddings_;  // row-major |V| x dim
};

// Flat logits over the base model's vocabulary; hidden states delegate to the base.
class UniformModel final : public LanguageModel {
public:
    explicit UniformModel(std::shared_ptr<const LanguageModel> base) : base_(std::move(base)) {}

    const Vocabulary& vocab() const override { return base_->vocab(); }
    std::vector<double> next_logits(std::span<const TokenId>) const override {
        return std::vector<double>(base_->vocab_size(), 0.0);
    }
    std::span<const double> hidden(TokenId t) const override { return base_->hidden(t); }
    std::size_t hidden_dim() const override { return base_->hidden_dim(); }

private:
    std::shared_ptr<const LanguageModel> base_;
};

// One token per context (chosen by hashing the last token) receives `height`, all
// others 0. With a large height the next-token law is effectively one-hot.
class PeakedModel final : public LanguageModel {
public:
    PeakedModel(std::shared_ptr<const LanguageModel> base, double height)
        : base_(std::move(base)), height_(height) {}

    const Vocabulary& vocab() const override { return base_->vocab(); }
    std::vector<double> next_logits(std::span<const TokenId> context) const override;
    std::span<const double> hidden(TokenId t) const override { return base_->hidden(t); }
    std::size_t hidden_dim() const override { return base_->hidden_dim(); }

private:
    std::shared_ptr<const LanguageModel> base_;
    double height_;
};

// Client side of the logit-provider adapter (docs/ADAPTER.md). Logits are fetched
// per call; hidden states are cached after first use.
class HttpModel final : public LanguageModel {
public:
    HttpModel(std::string base_url, std::shared_ptr<const Vocabulary> vocab, std::size_t dim,
              double timeout_seconds = 30.0);
    ~HttpModel() override;

    const Vocabulary& vocab() const override { return *vocab_; }
    std::vector<double> next_logits(std::span<const TokenId> context) const override;
    std::span<const double> hidden(TokenId token) const override;
    std::size_t hidden_dim() const override { return dim_; }

private:
    std::string post(const std::string& path, const std::string& body) const;

    std::string base_url_;
    std::shared_ptr<const Vocabulary> vocab_;
    std::size_t dim_;
    double timeout_seconds_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<TokenId, std::unique_ptr<std::vector<double>>> hidden_cache_;
};

// S(p, z) = sum_n p_n / (1 + z p_n).
double spike_entropy(std::span<const double> p, double z);

double shannon_entropy(std::span<const double> p);

}  // namespace duwak
