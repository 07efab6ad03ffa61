#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duwak/core.hpp"
#include "duwak/generate.hpp"
#include "duwak/lm.hpp"
#include "duwak/rand.hpp"

namespace duwak {

struct TpResult {
    std::size_t phi = 0;  // green count
    double z = 0.0;
    double p = 1.0;
    std::size_t T = 0;
};

struct CsResult {
    double phi = 0.0;
    std::size_t c_count = 0;  // |C| among scored positions
    std::size_t scored = 0;   // positions with a non-empty similarity window
    bool degenerate = false;
};

struct ExpResult {
    double score = 0.0;
    double p = 1.0;
    std::size_t T = 0;
};

struct DetectionReport {
    std::size_t T = 0;
    std::size_t phi_tp = 0;
    double z_tp = 0.0;
    double p_tp = 1.0;
    double phi_cs = 0.0;
    std::size_t c_count = 0;
    double p_cs = 1.0;
    bool degenerate_cs = false;
    double p_combined = 1.0;
    double exp_score = 0.0;
    double p_exp = 1.0;
};

enum class DetectorKind { tp, cs, exp, duwak, kgw_exp, exp_cs };

const char* to_string(DetectorKind d);
DetectorKind parse_detector(std::string_view name);
// The detector matching a scheme's watermark(s); NoWatermark maps to duwak.
DetectorKind detector_for(Scheme s);
bool needs_model(DetectorKind d);

// Detectors take the inspected tokens plus an optional `prefix` (typically the
// prompt) that seeds the first positions and the first similarity windows.
// Without a prefix, missing context is sentinel-padded as in generation.

TpResult p_tp(std::span<const TokenId> tokens, const WatermarkKey& key_tp, double gamma, std::size_t h,
              std::span<const TokenId> prefix = {});

// z-test of a green count: z = (phi - gamma T)/sqrt(T gamma (1-gamma)), p = 1 - Phi(z).
TpResult z_test(std::size_t phi, std::size_t T, double gamma);

// Positions whose similarity window is empty (the very first token of an
// unprefixed text) are left out of both sets.
CsResult phi_cs(std::span<const TokenId> tokens, const WatermarkKey& key, const LanguageModel& model, double eta,
                std::size_t L, std::size_t h, std::span<const TokenId> prefix = {});

// (1 + #{m : phi_m >= phi_0}) / (M + 1).
double permutation_p(double phi_true, std::span<const double> phi_decoys);

double p_cs(std::span<const TokenId> tokens, const WatermarkKey& key_cs, std::span<const WatermarkKey> decoys,
            const LanguageModel& model, double eta, std::size_t L, std::size_t h,
            std::span<const TokenId> prefix = {});

ExpResult exp_detect(std::span<const TokenId> tokens, const WatermarkKey& key, std::size_t h,
                     std::span<const TokenId> prefix = {});

DetectionReport duwak_detect(std::span<const TokenId> tokens, const WatermarkKeys& keys, const DuwakConfig& config,
                             const LanguageModel& model, std::span<const TokenId> prefix = {});

// Per-position detector state for one text, with cumulative sums so that every
// prefix statistic costs O(M) instead of O(M T).
class TextScan {
public:
    // `model` may be null when `want_cs` is false.
    TextScan(std::span<const TokenId> tokens, std::span<const TokenId> prefix, const WatermarkKeys& keys,
             const DuwakConfig& config, const LanguageModel* model, bool want_cs);

    std::size_t size() const noexcept { return seeds_.size(); }
    const std::vector<std::uint64_t>& seeds() const noexcept { return seeds_; }
    const std::vector<bool>& green() const noexcept { return green_; }
    // r = u01(kappa_cs, seed, 0) per position; C membership is r < eta.
    const std::vector<double>& r() const noexcept { return r_; }
    const std::vector<double>& exp_r() const noexcept { return exp_r_; }
    // Self-similarity per position; NaN where the window is empty.
    const std::vector<double>& s_L() const noexcept { return s_; }

    TpResult tp(std::size_t t) const;
    // Key 0 is kappa_cs, keys 1..M the decoys.
    CsResult cs(std::size_t t, std::size_t key_index = 0) const;
    double p_cs(std::size_t t) const;
    ExpResult exp(std::size_t t) const;
    DetectionReport report(std::size_t t) const;
    double p_value(DetectorKind d, std::size_t t) const;

private:
    DuwakConfig config_;
    bool want_cs_;
    std::vector<std::uint64_t> seeds_;
    std::vector<bool> green_;
    std::vector<double> r_;
    std::vector<double> exp_r_;
    std::vector<double> s_;
    std::vector<std::size_t> green_cum_;    // T + 1
    std::vector<double> exp_cum_;           // T + 1
    std::vector<std::size_t> scored_cum_;   // T + 1
    std::vector<double> s_cum_;             // T + 1
    // Row-major (M + 1) x (T + 1) cumulative C-count and C-sum per key.
    std::vector<std::uint32_t> c_count_cum_;
    std::vector<double> c_sum_cum_;
};

struct EfficiencyResult {
    std::optional<std::size_t> t_star;  // nullopt: no prefix up to max_inspect reached the threshold
    std::vector<double> trace;          // p-value of prefixes 1..inspected
    std::size_t max_inspect = 0;

    // "123" or ">1024".
    std::string render() const;
};

std::string render_sentinel(std::size_t max_inspect);

EfficiencyResult detection_efficiency(const TextScan& scan, DetectorKind detector, double threshold,
                                      std::size_t max_inspect);
EfficiencyResult detection_efficiency(std::span<const TokenId> tokens, DetectorKind detector,
                                      const WatermarkKeys& keys, const DuwakConfig& config,
                                      const LanguageModel* model, double threshold, std::size_t max_inspect,
                                      std::span<const TokenId> prefix = {});

// Line-delimited JSON, one report per line, with an optional text id.
void write_report_jsonl(std::ostream& out, const DetectionReport& report, const std::string& id = {});
DetectionReport parse_report_json(const std::string& line);
// Columns: id,T,phi_tp,z_tp,p_tp,phi_cs,c_count,p_cs,degenerate_cs,p_combined,exp_score,p_exp
std::string report_csv_header();
std::string report_csv_row(const DetectionReport& report, const std::string& id);

}  // namespace duwak
