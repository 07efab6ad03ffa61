#include "duwak/rand.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace duwak {

void WatermarkKeys::validate() const {
    if (tp.value == cs.value) {
        throw Error(Errc::invalid_configuration, "token-probability and contrastive keys must differ");
    }
}

std::uint64_t context_seed(std::span<const TokenId> prior, std::size_t h) noexcept {
    std::uint64_t s = mix64(kContextInit ^ static_cast<std::uint64_t>(h));
    const std::size_t have = std::min(prior.size(), h);
    for (std::size_t i = have; i < h; ++i) s = mix64(s ^ kSentinelToken);
    for (std::size_t i = prior.size() - have; i < prior.size(); ++i) s = mix64(s ^ prior[i]);
    return s;
}

std::vector<double> r_vector(const WatermarkKey& key, std::uint64_t seed, std::size_t size) {
    std::vector<double> r(size);
    for (std::size_t n = 0; n < size; ++n) r[n] = u01(key, seed, n);
    return r;
}

WatermarkKey exp_key(const WatermarkKeys& keys) noexcept {
    return {derive_subkey(keys.cs.value, kTagExp), KeyRole::derived};
}

std::vector<WatermarkKey> derive_decoy_keys(std::uint64_t detector_seed, std::size_t count,
                                            std::span<const WatermarkKey> exclude) {
    std::vector<WatermarkKey> out;
    out.reserve(count);
    for (std::uint64_t m = 0; out.size() < count; ++m) {
        WatermarkKey k{derive_subkey(detector_seed ^ mix64(m), kTagDecoy), KeyRole::decoy};
        const bool clash = std::find(exclude.begin(), exclude.end(), k) != exclude.end() ||
                           std::find(out.begin(), out.end(), k) != out.end();
        if (!clash) out.push_back(k);
    }
    return out;
}

NormalPair normal_pair(std::uint64_t key, std::uint64_t seed, std::uint64_t pair_index) noexcept {
    const double u1 = u01(key, seed, 2 * pair_index);
    const double u2 = u01(key, seed, 2 * pair_index + 1);
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace duwak
