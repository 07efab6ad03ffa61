#include "duwak/generate.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace duwak {

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::NoWatermark: return "NoWatermark";
        case Scheme::KGW: return "KGW";
        case Scheme::EXP: return "EXP";
        case Scheme::CS: return "CS";
        case Scheme::KGW_EXP: return "KGW_EXP";
        case Scheme::EXP_CS: return "EXP_CS";
        case Scheme::DUWAK: return "DUWAK";
    }
    return "?";
}

const std::vector<Scheme>& all_schemes() {
    static const std::vector<Scheme> v = {Scheme::NoWatermark, Scheme::KGW,    Scheme::EXP,  Scheme::CS,
                                          Scheme::KGW_EXP,     Scheme::EXP_CS, Scheme::DUWAK};
    return v;
}

Scheme parse_scheme(std::string_view name) {
    std::string norm(name);
    std::replace(norm.begin(), norm.end(), '-', '_');
    for (auto& c : norm) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (norm == "NONE" || norm == "NOWATERMARK" || norm == "NO_WATERMARK") return Scheme::NoWatermark;
    for (Scheme s : all_schemes()) {
        std::string canon = to_string(s);
        for (auto& c : canon) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (canon == norm) return s;
    }
    throw Error(Errc::invalid_argument, "unknown scheme '" + std::string(name) + "'");
}

SchemeParts scheme_parts(Scheme s) {
    switch (s) {
        case Scheme::NoWatermark: return {false, Sampler::multinomial};
        case Scheme::KGW: return {true, Sampler::multinomial};
        case Scheme::EXP: return {false, Sampler::exponential};
        case Scheme::CS: return {false, Sampler::contrastive_or_multinomial};
        case Scheme::KGW_EXP: return {true, Sampler::exponential};
        case Scheme::EXP_CS: return {false, Sampler::contrastive_or_exponential};
        case Scheme::DUWAK: return {true, Sampler::contrastive_or_multinomial};
    }
    throw Error(Errc::invalid_argument, "unknown scheme");
}

std::vector<double> kgw_adjust(std::span<const double> logits, std::uint64_t seed, const WatermarkKey& key_tp,
                               double gamma, double delta) {
    if (!(delta >= 0.0)) throw Error(Errc::invalid_argument, "delta must be >= 0");
    std::vector<double> biased(logits.begin(), logits.end());
    if (delta > 0.0) {
        for (std::size_t n = 0; n < biased.size(); ++n) {
            if (is_green(key_tp, seed, static_cast<TokenId>(n), gamma)) biased[n] += delta;
        }
    }
    return softmax(biased);
}

TokenId multinomial_sample(std::span<const double> p, double u) {
    double cum = 0.0;
    std::size_t last_supported = p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        cum += p[i];
        last_supported = i;
        if (u < cum) return static_cast<TokenId>(i);
    }
    if (last_supported == p.size()) throw Error(Errc::invalid_distribution, "distribution has no support");
    return static_cast<TokenId>(last_supported);
}

TokenId exp_sample(std::span<const double> p, std::span<const double> r) {
    if (p.size() != r.size()) throw Error(Errc::invalid_argument, "p and r differ in length");
    std::size_t best = p.size();
    double best_score = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (!(p[n] > 0.0)) continue;
        const double score = std::log(r[n]) / p[n];
        if (best == p.size() || score > best_score) {
            best = n;
            best_score = score;
        }
    }
    if (best == p.size()) throw Error(Errc::invalid_distribution, "all probabilities are zero");
    return static_cast<TokenId>(best);
}

double self_similarity(const LanguageModel& model, std::span<const TokenId> window, TokenId candidate) {
    if (window.empty()) return -1.0;
    const auto hc = model.hidden(candidate);
    double best = -1.0;
    for (TokenId t : window) best = std::max(best, dot(hc, model.hidden(t)));
    return std::clamp(best, -1.0, 1.0);
}

std::vector<TokenId> top_k(std::span<const double> p, std::size_t k) {
    k = std::min(k, p.size());
    std::vector<TokenId> ids(p.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i);
    auto before = [&](TokenId a, TokenId b) { return p[a] > p[b] || (p[a] == p[b] && a < b); };
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), before);
    ids.resize(k);
    return ids;
}

TokenId contrastive_pick(std::span<const double> p_hat, std::size_t k, double alpha, const LanguageModel& model,
                         std::span<const TokenId> window) {
    if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");
    const auto candidates = top_k(p_hat, k);
    TokenId best = candidates.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (TokenId v : candidates) {
        const double score = (1.0 - alpha) * p_hat[v] - alpha * self_similarity(model, window, v);
        if (score > best_score || (score == best_score && v < best)) {
            best = v;
            best_score = score;
        }
    }
    return best;
}

double sampler_uniform(std::uint64_t sampling_seed, std::size_t step) noexcept {
    return u01(derive_subkey(sampling_seed, kTagSampler), 0, step);
}

GenerationTrace generate(const LanguageModel& model, std::span<const TokenId> prompt, Scheme scheme,
                         const WatermarkKeys& keys, const DuwakConfig& config, std::size_t length,
                         std::uint64_t sampling_seed, const LogitsObserver& observer) {
    if (length < 1) throw Error(Errc::invalid_argument, "generation length must be >= 1");
    if (prompt.size() > config.max_context) {
        throw Error(Errc::invalid_argument, "prompt longer than the context cap");
    }
    keys.validate();
    const auto parts = scheme_parts(scheme);
    const WatermarkKey key_exp = exp_key(keys);
    const std::size_t V = model.vocab_size();

    GenerationTrace trace;
    trace.scheme = scheme;
    trace.prompt.tokens.assign(prompt.begin(), prompt.end());
    std::vector<TokenId> context(prompt.begin(), prompt.end());
    context.reserve(prompt.size() + length);

    for (std::size_t t = 0; t < length; ++t) {
        const std::span<const TokenId> ctx(context);
        const auto logits = model.next_logits(ctx);
        if (observer) observer(t, logits);
        TraceStep step;
        step.seed = context_seed(ctx, config.h);
        step.r = u01(keys.cs, step.seed, 0);
        step.contrastive = step.r < config.eta;
        const double u = sampler_uniform(sampling_seed, t);

        const auto dist = parts.kgw_bias ? kgw_adjust(logits, step.seed, keys.tp, config.gamma, config.delta)
                                         : softmax(logits);
        const auto window = ctx.subspan(ctx.size() - std::min(ctx.size(), config.L));
        auto exp_draw = [&] { return exp_sample(dist, r_vector(key_exp, step.seed, V)); };

        TokenId x = 0;
        switch (parts.sampler) {
            case Sampler::multinomial: x = multinomial_sample(dist, u); break;
            case Sampler::exponential: x = exp_draw(); break;
            case Sampler::contrastive_or_multinomial:
                x = step.contrastive ? contrastive_pick(dist, config.k, config.alpha, model, window)
                                     : multinomial_sample(dist, u);
                break;
            case Sampler::contrastive_or_exponential:
                x = step.contrastive ? contrastive_pick(dist, config.k, config.alpha, model, window) : exp_draw();
                break;
        }
        step.token = x;
        step.prob = dist[x];
        step.green = is_green(keys.tp, step.seed, x, config.gamma);
        step.exp_r = u01(key_exp, step.seed, x);
        trace.steps.push_back(step);
        trace.tokens.tokens.push_back(x);
        context.push_back(x);
    }
    return trace;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_trace(std::ostream& out, const GenerationTrace& trace) {
    out << "#duwak-trace\tv1\t" << to_string(trace.scheme) << '\n';
    out << "#prompt";
    for (TokenId t : trace.prompt.tokens) out << '\t' << t;
    out << '\n';
    char seed[24];
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& s = trace.steps[i];
        std::snprintf(seed, sizeof seed, "%016" PRIx64, s.seed);
        out << i << '\t' << seed << '\t' << fmt_double(s.r) << '\t' << (s.contrastive ? 1 : 0) << '\t'
            << (s.green ? 1 : 0) << '\t' << s.token << '\t' << fmt_double(s.prob) << '\t' << fmt_double(s.exp_r)
            << '\n';
    }
}

GenerationTrace read_trace(std::istream& in) {
    GenerationTrace trace;
    std::string line;
    auto bad = [](const std::string& why) { return Error(Errc::io_error, "malformed trace: " + why); };
    if (!std::getline(in, line) || line.rfind("#duwak-trace\tv1\t", 0) != 0) throw bad("missing header");
    trace.scheme = parse_scheme(line.substr(std::string("#duwak-trace\tv1\t").size()));
    if (!std::getline(in, line) || line.rfind("#prompt", 0) != 0) throw bad("missing prompt line");
    {
        std::istringstream ps(line.substr(7));
        TokenId t;
        while (ps >> t) trace.prompt.tokens.push_back(t);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t index;
        std::string seed_hex;
        int contrastive, green;
        TraceStep s;
        if (!(ls >> index >> seed_hex >> s.r >> contrastive >> green >> s.token >> s.prob >> s.exp_r)) {
            throw bad("step line '" + line + "'");
        }
        if (index != trace.steps.size()) throw bad("steps out of order");
        s.seed = std::stoull(seed_hex, nullptr, 16);
        s.contrastive = contrastive != 0;
        s.green = green != 0;
        trace.steps.push_back(s);
        trace.tokens.tokens.push_back(s.token);
    }
    return trace;
}

}  // namespace duwak
