#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "duwak/bench.hpp"
#include "duwak/core.hpp"
#include "duwak/lm.hpp"

namespace testing_support {

using duwak::TokenId;

// Random inputs for property tests. Every generator is seeded explicitly so a
// failing case can be replayed from the printed seed.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    std::uint64_t u64() { return rng_(); }
    bool coin(double p = 0.5) { return uniform() < p; }

    std::vector<double> logits(std::size_t n, double scale = 5.0) {
        std::vector<double> v(n);
        std::normal_distribution<double> d(0.0, scale);
        for (auto& x : v) x = d(rng_);
        return v;
    }

    // Random probability vector; sometimes sparse, sometimes peaked.
    std::vector<double> probs(std::size_t n) {
        std::vector<double> v(n);
        const int shape = static_cast<int>(index(3));
        double sum = 0;
        for (auto& x : v) {
            x = uniform();
            if (shape == 1 && coin(0.5)) x = 0.0;
            if (shape == 2) x = std::pow(x, 8.0);
            sum += x;
        }
        if (sum == 0.0) {
            v[index(n)] = 1.0;
            return v;
        }
        for (auto& x : v) x /= sum;
        return v;
    }

    std::vector<TokenId> tokens(std::size_t n, std::size_t vocab) {
        std::vector<TokenId> v(n);
        for (auto& t : v) t = static_cast<TokenId>(index(vocab));
        return v;
    }

private:
    std::mt19937_64 rng_;
};

inline std::shared_ptr<const duwak::Vocabulary> letters_vocab(std::size_t n) {
    std::vector<std::string> entries{"<unk>"};
    for (std::size_t i = 1; i < n; ++i) entries.push_back("w" + std::to_string(i));
    return std::make_shared<duwak::Vocabulary>(std::move(entries));
}

// Hand-built model: fixed embeddings (normalised here) and a logit function.
class FixtureLM final : public duwak::LanguageModel {
public:
    using LogitFn = std::function<std::vector<double>(std::span<const TokenId>)>;

    FixtureLM(std::vector<std::vector<double>> embeddings, LogitFn logits)
        : vocab_(letters_vocab(embeddings.size())), logits_(std::move(logits)) {
        dim_ = embeddings.front().size();
        for (auto& row : embeddings) {
            double n = 0;
            for (double x : row) n += x * x;
            n = std::sqrt(n);
            for (double x : row) table_.push_back(n > 0 ? x / n : 0.0);
        }
    }

    const duwak::Vocabulary& vocab() const override { return *vocab_; }
    std::vector<double> next_logits(std::span<const TokenId> ctx) const override { return logits_(ctx); }
    std::span<const double> hidden(TokenId t) const override { return {table_.data() + t * dim_, dim_}; }
    std::size_t hidden_dim() const override { return dim_; }

private:
    std::shared_ptr<const duwak::Vocabulary> vocab_;
    LogitFn logits_;
    std::size_t dim_ = 0;
    std::vector<double> table_;
};

// Embedding in 2-D at angle theta, so cos between tokens = cos of the angle gap.
inline std::vector<double> at_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

inline const duwak::ModelHandle& default_mock() {
    static const duwak::ModelHandle h = duwak::make_model(duwak::ModelConfig{});
    return h;
}

// Kolmogorov-Smirnov test against U(0,1); returns the asymptotic p-value.
inline double ks_uniform_p(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        d = std::max(d, std::max(static_cast<double>(i + 1) / n - xs[i], xs[i] - static_cast<double>(i) / n));
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0;
    for (int k = 1; k <= 100; ++k) {
        p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    }
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace testing_support
