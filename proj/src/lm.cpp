#include "duwak/lm.hpp"

#include <cmath>

#include "duwak/rand.hpp"

namespace duwak {

namespace {
constexpr std::uint64_t kTagEmbedding = 0x454D4245442D5441ULL;
constexpr std::uint64_t kTagNoise = 0x4E4F4953452D4C4DULL;
constexpr std::uint64_t kTagPeak = 0x5045414B2D544F4BULL;
}  // namespace

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    // Four independent accumulators so the loop vectorises without -ffast-math.
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

MockLM::MockLM(std::uint64_t model_seed, std::shared_ptr<const Vocabulary> vocab, std::size_t dim,
               double temperature)
    : model_seed_(model_seed),
      noise_key_(derive_subkey(model_seed, kTagNoise)),
      vocab_(std::move(vocab)),
      dim_(dim),
      temperature_(temperature) {
    if (!vocab_) throw Error(Errc::invalid_argument, "mock model needs a vocabulary");
    if (dim_ < 8) throw Error(Errc::invalid_argument, "mock embedding dim must be >= 8");
    if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
        throw Error(Errc::invalid_argument, "mock temperature must be finite and > 0");
    }
    const std::uint64_t emb_key = derive_subkey(model_seed, kTagEmbedding);
    embeddings_.resize(vocab_->size() * dim_);
    for (std::size_t n = 0; n < vocab_->size(); ++n) {
        double* row = embeddings_.data() + n * dim_;
        // Token id is mixed before use: u01 XORs seed and index, so a raw id would
        // alias (token, coordinate) pairs across rows.
        const std::uint64_t row_seed = mix64(n);
        for (std::size_t j = 0; j < dim_; j += 2) {
            const auto z = normal_pair(emb_key, row_seed, j / 2);
            row[j] = z.first;
            if (j + 1 < dim_) row[j + 1] = z.second;
        }
        const double norm = std::sqrt(dot({row, dim_}, {row, dim_}));
        for (std::size_t j = 0; j < dim_; ++j) row[j] /= norm;
    }
}

std::span<const double> MockLM::hidden(TokenId token) const {
    if (token >= vocab_->size()) throw Error(Errc::invalid_argument, "token id out of range");
    return {embeddings_.data() + static_cast<std::size_t>(token) * dim_, dim_};
}

std::vector<double> MockLM::next_logits(std::span<const TokenId> context) const {
    std::vector<double> ctx(dim_, 0.0);
    for (std::size_t i = 0; i < context_window; ++i) {
        const TokenId t = i < context.size() ? context[context.size() - 1 - i] : kSentinelToken;
        const auto e = hidden(t);
        for (std::size_t j = 0; j < dim_; ++j) ctx[j] += e[j];
    }
    // Temperature scales both terms, so the law flattens to uniform as it grows.
    const double scale = 1.0 / (static_cast<double>(context_window) * temperature_);
    for (double& c : ctx) c *= scale;
    const double noise = noise_scale / temperature_;

    const std::uint64_t seed = context_seed(context, context_window);
    const std::size_t V = vocab_->size();
    std::vector<double> logits(V);
    for (std::size_t n = 0; n < V; n += 2) {
        const auto z = normal_pair(noise_key_, seed, n / 2);
        logits[n] = dot(hidden(static_cast<TokenId>(n)), ctx) + noise * z.first;
        if (n + 1 < V) {
            logits[n + 1] = dot(hidden(static_cast<TokenId>(n + 1)), ctx) + noise * z.second;
        }
    }
    return logits;
}

std::vector<double> PeakedModel::next_logits(std::span<const TokenId> context) const {
    std::vector<double> logits(base_->vocab_size(), 0.0);
    const std::uint64_t s = context_seed(context, 1);
    logits[mix64(s ^ kTagPeak) % logits.size()] = height_;
    return logits;
}

double spike_entropy(std::span<const double> p, double z) {
    double s = 0.0;
    for (double v : p) s += v / (1.0 + z * v);
    return s;
}

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

}  // namespace duwak
