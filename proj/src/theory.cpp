#include "duwak/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "duwak/generate.hpp"
#include "duwak/parallel.hpp"
#include "duwak/rand.hpp"

namespace duwak {

namespace {

constexpr std::uint64_t kTagTheoryKey = 0x5448454F52592D4BULL;     // "THEORY-K"
constexpr std::uint64_t kTagTheoryPick = 0x5448454F52592D50ULL;    // "THEORY-P"
constexpr std::uint64_t kTagTheoryPrompt = 0x5448454F52592D51ULL;  // "THEORY-Q"

std::vector<TokenId> trial_prompt(const LanguageModel& model, std::uint64_t seed, std::size_t trial,
                                  std::size_t length) {
    const std::uint64_t key = derive_subkey(seed, kTagTheoryPrompt);
    const std::size_t V = model.vocab_size();
    std::vector<TokenId> prompt(length);
    for (std::size_t j = 0; j < length; ++j) {
        // Skip id 0 (UNK) so prompts look like text.
        const double u = u01(key, mix64(trial), j);
        prompt[j] = static_cast<TokenId>(1 + std::min(V - 2, static_cast<std::size_t>(u * static_cast<double>(V - 1))));
    }
    return prompt;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double se_mean = 0.0;
    double se_variance = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) return m;
    for (double v : x) m.mean += v;
    m.mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = (v - m.mean) * (v - m.mean);
        m2 += d;
        m4 += d * d;
    }
    m.variance = m2 / (n - 1.0);
    m2 /= n;
    m4 /= n;
    m.se_mean = std::sqrt(m.variance / n);
    m.se_variance = std::sqrt(std::max(0.0, (m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n));
    return m;
}

void check_k(const LanguageModel& model, std::size_t k) {
    if (k < 1 || k > model.vocab_size()) throw Error(Errc::invalid_argument, "k must lie in [1, |V|]");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

double spike_z(double gamma, double delta) {
    const double bm1 = std::expm1(delta);
    return (1.0 - gamma) * bm1 / (1.0 + bm1 * gamma);
}

double duwak_A(double gamma, double delta, double s_star) {
    const double beta = std::exp(delta);
    return gamma * beta * s_star / (1.0 + (beta - 1.0) * gamma);
}

void EntropyProfile::add(double s) {
    spike.push_back(s);
    s_star = std::min(s_star, s);
}

double EntropyProfile::mean() const {
    if (spike.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (double s : spike) sum += s;
    return sum / static_cast<double>(spike.size());
}

BoundCheckResult verify_topk_bound(const LanguageModel& model, double gamma, double delta, std::size_t k,
                                   std::size_t T, std::size_t trials, const TheoryOptions& opt) {
    check_k(model, k);
    if (T < 1 || trials < 2) throw Error(Errc::invalid_argument, "need T >= 1 and at least two trials");
    const WatermarkKey key{derive_subkey(opt.seed, kTagTheoryKey), KeyRole::token_probability};
    std::vector<double> greens(trials), nu_sum(trials), nu_sq(trials);

    parallel_for(trials, opt.workers, [&](std::size_t trial) {
        const std::uint64_t trial_key = derive_subkey(opt.seed ^ mix64(trial), kTagTheoryPick);
        std::vector<TokenId> ctx = trial_prompt(model, opt.seed, trial, opt.prompt_length);
        double g = 0.0, ns = 0.0, nq = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const auto logits = model.next_logits(ctx);
            // Fresh partition per step: the theorem takes expectations over partitions.
            const std::uint64_t part = mix64(trial_key ^ mix64(t));
            const auto p_hat = kgw_adjust(logits, part, key, gamma, delta);
            const auto top = top_k(p_hat, k);
            double nu = 0.0;
            for (TokenId v : top) nu += is_green(key, part, v, gamma) ? 1.0 : 0.0;
            const double u = u01(trial_key, 0, t);
            const TokenId x = top[std::min(k - 1, static_cast<std::size_t>(u * static_cast<double>(k)))];
            g += is_green(key, part, x, gamma) ? 1.0 : 0.0;
            ns += nu;
            nq += nu * nu;
            ctx.push_back(x);
        }
        greens[trial] = g;
        nu_sum[trial] = ns;
        nu_sq[trial] = nq;
    });

    BoundCheckResult r;
    r.name = "topk";
    r.gamma = gamma;
    r.delta = delta;
    r.k = k;
    r.T = T;
    r.trials = trials;
    const auto m = moments(greens);
    r.mean = m.mean;
    r.variance = m.variance;
    r.se_mean = m.se_mean;
    r.se_variance = m.se_variance;

    double s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < trials; ++i) {
        s += nu_sum[i];
        sq += nu_sq[i];
    }
    const double n = static_cast<double>(trials * T);
    const double kd = static_cast<double>(k);
    const double Td = static_cast<double>(T);
    r.nu = s / n;
    r.nu_se = std::sqrt(std::max(0.0, sq / n - r.nu * r.nu) / n);
    r.mean_bound = r.nu / kd * Td;
    r.se_mean_bound = Td / kd * r.nu_se;
    r.variance_bound = Td * r.nu * (kd - r.nu) / (kd * kd);
    r.se_variance_bound = std::fabs(Td * (kd - 2.0 * r.nu) / (kd * kd)) * r.nu_se;
    r.mean_pass = r.mean >= r.mean_bound - 3.0 * std::hypot(r.se_mean, r.se_mean_bound);
    r.variance_pass = r.variance <= r.variance_bound + 3.0 * std::hypot(r.se_variance, r.se_variance_bound);
    return r;
}

BoundCheckResult verify_duwak_bound(const LanguageModel& model, double gamma, double delta, std::size_t k,
                                    std::size_t T, std::size_t trials, const TheoryOptions& opt,
                                    EntropyProfile* profile_out) {
    check_k(model, k);
    if (T < 1 || trials < 2) throw Error(Errc::invalid_argument, "need T >= 1 and at least two trials");
    DuwakConfig config;
    config.gamma = gamma;
    config.delta = delta;
    config.k = k;
    const double z = spike_z(gamma, delta);
    std::vector<double> greens(trials);
    std::vector<std::vector<double>> spikes(trials);

    parallel_for(trials, opt.workers, [&](std::size_t trial) {
        WatermarkKeys keys;
        keys.tp.value = derive_subkey(opt.seed ^ mix64(2 * trial), kTagTheoryKey);
        keys.cs.value = derive_subkey(opt.seed ^ mix64(2 * trial + 1), kTagTheoryKey);
        const auto prompt = trial_prompt(model, opt.seed, trial, opt.prompt_length);
        auto& sp = spikes[trial];
        sp.reserve(T);
        const auto trace =
            generate(model, prompt, Scheme::DUWAK, keys, config, T, derive_subkey(opt.seed ^ mix64(trial), kTagTheoryPick),
                     [&](std::size_t, std::span<const double> logits) { sp.push_back(spike_entropy(softmax(logits), z)); });
        double g = 0.0;
        for (const auto& st : trace.steps) g += st.green ? 1.0 : 0.0;
        greens[trial] = g;
    });

    EntropyProfile profile;
    profile.z = z;
    for (const auto& sp : spikes) {
        for (double s : sp) profile.add(s);
    }

    BoundCheckResult r;
    r.name = "duwak";
    r.gamma = gamma;
    r.delta = delta;
    r.k = k;
    r.T = T;
    r.trials = trials;
    const auto m = moments(greens);
    r.mean = m.mean;
    r.variance = m.variance;
    r.se_mean = m.se_mean;
    r.se_variance = m.se_variance;
    r.s_star = profile.s_star;
    r.A = duwak_A(gamma, delta, profile.s_star);
    const double Td = static_cast<double>(T);
    const double kd = static_cast<double>(k);
    r.vacuous = r.s_star <= 0.0;
    r.mean_bound = r.A * Td;
    r.variance_bound = r.A * Td * (1.0 - r.A) * (kd + Td - 1.0) / kd;
    r.mean_pass = r.vacuous || r.mean >= r.mean_bound - 3.0 * r.se_mean;
    r.variance_pass = r.vacuous || r.variance <= r.variance_bound + 3.0 * r.se_variance;
    if (profile_out) *profile_out = std::move(profile);
    return r;
}

PerplexityCheckResult verify_perplexity_bound(const LanguageModel& model, double gamma, double delta, std::size_t k,
                                              std::size_t steps, std::size_t trials, const TheoryOptions& opt) {
    check_k(model, k);
    if (steps < 1 || trials < 2) throw Error(Errc::invalid_argument, "need steps >= 1 and at least two trials");
    // Contexts from one unwatermarked generation.
    std::vector<std::vector<double>> logits(steps);
    const auto prompt = trial_prompt(model, opt.seed, 0, opt.prompt_length);
    generate(model, prompt, Scheme::NoWatermark, WatermarkKeys{}, DuwakConfig{}, steps,
             derive_subkey(opt.seed, kTagTheoryPick),
             [&](std::size_t t, std::span<const double> l) { logits[t].assign(l.begin(), l.end()); });

    const WatermarkKey key{derive_subkey(opt.seed, kTagTheoryKey), KeyRole::token_probability};
    const double beta = std::exp(delta);
    PerplexityCheckResult out;
    out.gamma = gamma;
    out.delta = delta;
    out.k = k;
    out.trials = trials;
    out.steps.resize(steps);

    parallel_for(steps, opt.workers, [&](std::size_t s) {
        const auto p = softmax(logits[s]);
        PerplexityStep& st = out.steps[s];
        st.p_star = shannon_entropy(p);
        st.bound = beta * st.p_star;
        std::vector<double> ce(trials);
        for (std::size_t j = 0; j < trials; ++j) {
            const std::uint64_t part = mix64(derive_subkey(opt.seed ^ mix64(s), kTagTheoryPick) ^ mix64(j));
            const auto p_hat = kgw_adjust(logits[s], part, key, gamma, delta);
            const auto top = top_k(p_hat, k);
            double z = 0.0;
            for (TokenId v : top) z += p_hat[v];
            double c = 0.0;
            for (TokenId v : top) {
                const double w = p_hat[v] / z;
                if (w > 0.0) c -= w * std::log(p[v]);
            }
            ce[j] = c;
        }
        const auto m = moments(ce);
        st.mean = m.mean;
        st.se = m.se_mean;
        st.margin = st.bound - st.mean;
        st.degenerate = st.p_star == 0.0;
        st.pass = st.mean - 3.0 * st.se <= st.bound;
    });

    out.pass = true;
    out.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& st : out.steps) {
        if (st.degenerate) ++out.degenerate_steps;
        out.pass = out.pass && st.pass;
        out.min_margin = std::min(out.min_margin, st.margin);
    }
    return out;
}

bool TheoryGridResult::pass() const {
    return std::all_of(bounds.begin(), bounds.end(), [](const auto& b) { return b.pass(); }) &&
           std::all_of(perplexity.begin(), perplexity.end(), [](const auto& p) { return p.pass; });
}

TheoryGridResult verify_theory_grid(const LanguageModel& model, const TheoryGrid& grid, const TheoryOptions& opt) {
    TheoryGridResult out;
    for (double g : grid.gammas) {
        for (double d : grid.deltas) {
            for (std::size_t k : grid.ks) {
                out.bounds.push_back(verify_topk_bound(model, g, d, k, grid.T, grid.trials, opt));
                out.bounds.push_back(verify_duwak_bound(model, g, d, k, grid.T, grid.trials, opt));
                out.perplexity.push_back(
                    verify_perplexity_bound(model, g, d, k, grid.perplexity_steps, grid.trials, opt));
            }
        }
    }
    return out;
}

std::string bounds_csv(const std::vector<BoundCheckResult>& rows) {
    std::string out =
        "check,gamma,delta,k,T,trials,mean,se_mean,mean_bound,se_mean_bound,variance,se_variance,variance_bound,"
        "se_variance_bound,nu,nu_se,s_star,A,vacuous,mean_pass,variance_pass\n";
    for (const auto& r : rows) {
        out += r.name + "," + fmt(r.gamma) + "," + fmt(r.delta) + "," + std::to_string(r.k) + "," +
               std::to_string(r.T) + "," + std::to_string(r.trials) + "," + fmt(r.mean) + "," + fmt(r.se_mean) + "," +
               fmt(r.mean_bound) + "," + fmt(r.se_mean_bound) + "," + fmt(r.variance) + "," + fmt(r.se_variance) +
               "," + fmt(r.variance_bound) + "," + fmt(r.se_variance_bound) + "," + fmt(r.nu) + "," + fmt(r.nu_se) +
               "," + fmt(r.s_star) + "," + fmt(r.A) + "," + (r.vacuous ? "1" : "0") + "," +
               (r.mean_pass ? "1" : "0") + "," + (r.variance_pass ? "1" : "0") + "\n";
    }
    return out;
}

std::string perplexity_csv(const std::vector<PerplexityCheckResult>& rows) {
    std::string out = "gamma,delta,k,trials,step,p_star,bound,mean,se,margin,degenerate,pass\n";
    for (const auto& r : rows) {
        for (std::size_t s = 0; s < r.steps.size(); ++s) {
            const auto& st = r.steps[s];
            out += fmt(r.gamma) + "," + fmt(r.delta) + "," + std::to_string(r.k) + "," + std::to_string(r.trials) +
                   "," + std::to_string(s) + "," + fmt(st.p_star) + "," + fmt(st.bound) + "," + fmt(st.mean) + "," +
                   fmt(st.se) + "," + fmt(st.margin) + "," + (st.degenerate ? "1" : "0") + "," +
                   (st.pass ? "1" : "0") + "\n";
        }
    }
    return out;
}

std::string theory_summary(const TheoryGridResult& result) {
    std::string out;
    char line[256];
    for (const auto& b : result.bounds) {
        std::snprintf(line, sizeof line, "%-5s %s gamma=%.2f delta=%.1f k=%-2zu  E=%.3f >= %.3f  Var=%.3f <= %.3f\n",
                      b.pass() ? "PASS" : "FAIL", b.name.c_str(), b.gamma, b.delta, b.k, b.mean, b.mean_bound,
                      b.variance, b.variance_bound);
        out += line;
    }
    for (const auto& p : result.perplexity) {
        std::snprintf(line, sizeof line, "%-5s perplexity gamma=%.2f delta=%.1f k=%-2zu  min margin=%.4f%s\n",
                      p.pass ? "PASS" : "FAIL", p.gamma, p.delta, p.k, p.min_margin,
                      p.degenerate_steps ? " (degenerate steps present)" : "");
        out += line;
    }
    out += result.pass() ? "theory: all bounds hold\n" : "theory: bound violation\n";
    return out;
}

}  // namespace duwak
