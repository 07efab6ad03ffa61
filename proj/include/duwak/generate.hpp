#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duwak/core.hpp"
#include "duwak/lm.hpp"
#include "duwak/rand.hpp"

namespace duwak {

enum class Scheme { NoWatermark, KGW, EXP, CS, KGW_EXP, EXP_CS, DUWAK };

const char* to_string(Scheme s);
// Accepts the canonical names above plus the dashed forms ("KGW-EXP", "EXP-CS").
Scheme parse_scheme(std::string_view name);
const std::vector<Scheme>& all_schemes();

enum class Sampler { multinomial, exponential, contrastive_or_multinomial, contrastive_or_exponential };

// Probability modification and sampler of each scheme.
struct SchemeParts {
    bool kgw_bias;
    Sampler sampler;
};
SchemeParts scheme_parts(Scheme s);

struct TraceStep {
    std::uint64_t seed = 0;
    double r = 0.0;             // contrastive split draw u01(kappa_cs, seed, 0)
    bool contrastive = false;   // r < eta
    bool green = false;         // chosen token green under kappa_tp
    TokenId token = 0;
    double prob = 0.0;          // probability of the chosen token under the sampled law
    double exp_r = 0.0;         // EXP stream value of the chosen token

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct GenerationTrace {
    Scheme scheme = Scheme::NoWatermark;
    TokenSeq prompt{{}, Origin::prompt};
    TokenSeq tokens;
    std::vector<TraceStep> steps;
};

// Green-list reweighting: softmax of logits with +delta on green tokens.
std::vector<double> kgw_adjust(std::span<const double> logits, std::uint64_t seed, const WatermarkKey& key_tp,
                               double gamma, double delta);

// Inverse-CDF draw in id order.
TokenId multinomial_sample(std::span<const double> p, double u);

// argmax_n ln(r_n)/p_n over tokens with p_n > 0; lowest id wins ties.
TokenId exp_sample(std::span<const double> p, std::span<const double> r);

// max_j cos(h_candidate, h_window[j]); -1 for an empty window.
double self_similarity(const LanguageModel& model, std::span<const TokenId> window, TokenId candidate);

// The k most probable ids, ordered by (probability desc, id asc).
std::vector<TokenId> top_k(std::span<const double> p, std::size_t k);

// argmax over top_k(p_hat) of (1-alpha) p_hat - alpha s_L; lowest id wins ties.
TokenId contrastive_pick(std::span<const double> p_hat, std::size_t k, double alpha, const LanguageModel& model,
                         std::span<const TokenId> window);

// Duwak generation and the other scheme combinations. `sampling_seed` drives the multinomial
// stream only; watermark streams depend on keys and context alone.
// `observer`, when set, sees the unmodified logits of every step.
using LogitsObserver = std::function<void(std::size_t step, std::span<const double> logits)>;
GenerationTrace generate(const LanguageModel& model, std::span<const TokenId> prompt, Scheme scheme,
                         const WatermarkKeys& keys, const DuwakConfig& config, std::size_t length,
                         std::uint64_t sampling_seed, const LogitsObserver& observer = {});

// Uniform draw used by the multinomial sampler at generation step `step`.
double sampler_uniform(std::uint64_t sampling_seed, std::size_t step) noexcept;

// Line-delimited trace file; see docs/FORMATS.md.
void write_trace(std::ostream& out, const GenerationTrace& trace);
GenerationTrace read_trace(std::istream& in);

}  // namespace duwak
