#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "duwak/core.hpp"
#include "duwak/lm.hpp"

namespace duwak {

// z = (1-gamma)(beta-1) / (1 + (beta-1) gamma), beta = e^delta.
double spike_z(double gamma, double delta);
// A = gamma beta S* / (1 + (beta-1) gamma).
double duwak_A(double gamma, double delta, double s_star);

struct EntropyProfile {
    double z = 0.0;
    std::vector<double> spike;  // S(p_t, z) per recorded step
    double s_star = 1.0;        // running minimum

    void add(double s);
    double mean() const;
};

struct BoundCheckResult {
    std::string name;
    double gamma = 0.0;
    double delta = 0.0;
    std::size_t k = 0;
    std::size_t T = 0;
    std::size_t trials = 0;

    double mean = 0.0;  // of |x|_G
    double variance = 0.0;
    double se_mean = 0.0;
    double se_variance = 0.0;

    double mean_bound = 0.0;      // lower bound on the mean
    double variance_bound = 0.0;  // upper bound on the variance
    double se_mean_bound = 0.0;   // MC error of the bound itself (nu estimate), 0 when exact
    double se_variance_bound = 0.0;

    double nu = 0.0;     // top-k: estimated green count in the top-k set
    double nu_se = 0.0;
    double s_star = 0.0;  // Duwak: minimum spike entropy
    double A = 0.0;       // Duwak: green probability factor
    bool vacuous = false;

    bool mean_pass = false;
    bool variance_pass = false;
    bool pass() const { return mean_pass && variance_pass; }
};

struct TheoryOptions {
    std::uint64_t seed = 7;
    std::size_t workers = 1;
    std::size_t prompt_length = 4;
};

// Green count when x_t is drawn uniformly from the top-k of the reweighted law,
// with a fresh partition every step. Checks E >= (nu/k) T and Var <= T nu (k-nu)/k^2.
BoundCheckResult verify_topk_bound(const LanguageModel& model, double gamma, double delta, std::size_t k,
                                   std::size_t T, std::size_t trials, const TheoryOptions& options = {});

// Full Duwak generation with fresh keys per trial. Checks E >= A T and
// Var <= A T (1-A)(k+T-1)/k with S* from the run's own entropy profile.
BoundCheckResult verify_duwak_bound(const LanguageModel& model, double gamma, double delta, std::size_t k,
                                    std::size_t T, std::size_t trials, const TheoryOptions& options = {},
                                    EntropyProfile* profile = nullptr);

struct PerplexityStep {
    double p_star = 0.0;  // Shannon entropy of the base law
    double bound = 0.0;   // beta P*
    double mean = 0.0;    // E over partitions of -sum p'_hat ln p
    double se = 0.0;
    double margin = 0.0;  // bound - mean
    bool degenerate = false;
    bool pass = false;
};

struct PerplexityCheckResult {
    double gamma = 0.0;
    double delta = 0.0;
    std::size_t k = 0;
    std::size_t trials = 0;
    std::vector<PerplexityStep> steps;
    std::size_t degenerate_steps = 0;
    double min_margin = 0.0;
    bool pass = false;
};

// Base laws come from `steps` contexts of one unwatermarked generation; the
// expectation is over `trials` random partitions per step.
PerplexityCheckResult verify_perplexity_bound(const LanguageModel& model, double gamma, double delta, std::size_t k,
                                              std::size_t steps, std::size_t trials,
                                              const TheoryOptions& options = {});

struct TheoryGrid {
    std::vector<double> gammas = {0.25, 0.5};
    std::vector<double> deltas = {0.0, 2.5, 3.5};
    std::vector<std::size_t> ks = {1, 10, 20};
    std::size_t T = 50;
    std::size_t trials = 1000;
    std::size_t perplexity_steps = 20;
};

struct TheoryGridResult {
    std::vector<BoundCheckResult> bounds;  // top-k and Duwak checks, grid order
    std::vector<PerplexityCheckResult> perplexity;
    bool pass() const;
};

TheoryGridResult verify_theory_grid(const LanguageModel& model, const TheoryGrid& grid,
                                    const TheoryOptions& options = {});

std::string bounds_csv(const std::vector<BoundCheckResult>& rows);
std::string perplexity_csv(const std::vector<PerplexityCheckResult>& rows);
std::string theory_summary(const TheoryGridResult& result);

}  // namespace duwak
