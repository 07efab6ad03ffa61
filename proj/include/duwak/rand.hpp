#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "duwak/core.hpp"

// Keyed, stateless pseudo-randomness. Every draw is a pure function of
// (key, seed, index); constants are pinned in docs/RNG.md.
namespace duwak {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kContextInit = 0x243F6A8885A308D3ULL;
inline constexpr TokenId kSentinelToken = 0;

// SplitMix64 step: golden-ratio increment followed by the Stafford variant 13 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    std::uint64_t z = x + kGoldenGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class KeyRole { token_probability, contrastive_search, decoy, derived };

struct WatermarkKey {
    std::uint64_t value = 0;
    KeyRole role = KeyRole::derived;

    friend bool operator==(const WatermarkKey& a, const WatermarkKey& b) noexcept {
        return a.value == b.value;
    }
};

struct WatermarkKeys {
    WatermarkKey tp{0x6B61707061207470ULL, KeyRole::token_probability};
    WatermarkKey cs{0x6B61707061206373ULL, KeyRole::contrastive_search};

    // Throws Errc::invalid_configuration when the two keys coincide.
    void validate() const;
};

// Domain tags for subkeys that must never share a stream with a parent key.
inline constexpr std::uint64_t kTagExp = 0x4558502D53414D50ULL;      // "EXP-SAMP"
inline constexpr std::uint64_t kTagSampler = 0x4D554C54494E4F4DULL;  // "MULTINOM"
inline constexpr std::uint64_t kTagDecoy = 0x4445434F592D4B59ULL;    // "DECOY-KY"

constexpr std::uint64_t derive_subkey(std::uint64_t parent, std::uint64_t tag) noexcept {
    return mix64(parent ^ mix64(tag));
}

// Digest of the last `h` ids of `prior`; missing slots (at the start of a text)
// are filled with kSentinelToken. Bit-exact across platforms.
std::uint64_t context_seed(std::span<const TokenId> prior, std::size_t h) noexcept;

// Uniform on [0,1) from the top 53 bits of mix64(key ^ seed ^ index).
inline double u01(std::uint64_t key, std::uint64_t seed, std::uint64_t index) noexcept {
    return static_cast<double>(mix64(key ^ seed ^ index) >> 11) * 0x1.0p-53;
}
inline double u01(const WatermarkKey& key, std::uint64_t seed, std::uint64_t index) noexcept {
    return u01(key.value, seed, index);
}

inline bool is_green(const WatermarkKey& key, std::uint64_t seed, TokenId token, double gamma) noexcept {
    return u01(key, seed, token) < gamma;
}

std::vector<double> r_vector(const WatermarkKey& key, std::uint64_t seed, std::size_t size);

// Key used by the EXP sampler/detector; role-separated from the contrastive split draw.
WatermarkKey exp_key(const WatermarkKeys& keys) noexcept;

// `count` distinct decoy keys derived from `detector_seed`, none equal to any key in `exclude`.
std::vector<WatermarkKey> derive_decoy_keys(std::uint64_t detector_seed, std::size_t count,
                                            std::span<const WatermarkKey> exclude);

// Standard normal from a Box-Muller pair of keyed uniforms; returns both variates.
struct NormalPair {
    double first;
    double second;
};
NormalPair normal_pair(std::uint64_t key, std::uint64_t seed, std::uint64_t pair_index) noexcept;

}  // namespace duwak
