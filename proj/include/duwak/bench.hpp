#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "duwak/attack.hpp"
#include "duwak/client.hpp"
#include "duwak/core.hpp"
#include "duwak/detect.hpp"
#include "duwak/generate.hpp"
#include "duwak/lm.hpp"

namespace duwak {

// Product over n = 2, 3, 4 of (unique n-grams / total n-grams). Needs >= 4 tokens.
double diversity(std::span<const TokenId> tokens);

struct ModelConfig {
    std::uint64_t seed = 42;
    std::size_t dim = 64;
    double temperature = 1.0;
    std::size_t vocab_size = 1000;
    std::string vocab_file;   // overrides vocab_size when set
    std::string logits_url;   // HTTP logit provider instead of the mock when set
};

// A model plus the vocabulary it speaks.
struct ModelHandle {
    std::shared_ptr<const Vocabulary> vocab;
    std::shared_ptr<const LanguageModel> model;
};
ModelHandle make_model(const ModelConfig& config);

struct MapFiles {
    std::string synonym;
    std::string contraction;
    std::string casefold;
};

struct BenchConfig {
    ModelConfig model;
    WatermarkKeys keys;
    DuwakConfig duwak;
    std::vector<Scheme> schemes = {Scheme::KGW, Scheme::EXP, Scheme::DUWAK};
    std::vector<AttackSpec> attacks;  // empty: the default attack grid
    bool include_external = false;
    std::string corpus_file;  // JSONL texts (see docs/CONFIG.md); empty: generate with the mock
    std::size_t texts_per_cell = 100;
    std::size_t length = 260;
    std::size_t prompt_length = 8;
    std::vector<double> thresholds = {0.02, 0.05};
    std::string out_dir = "bench-out";
    std::size_t workers = 1;
    std::uint64_t master_seed = 1;
    bool record_timings = false;
    MapFiles maps;

    void validate() const;
};

BenchConfig load_bench_config(const std::string& path);
BenchConfig bench_config_from_json(const std::string& json_text);
std::string bench_config_to_json(const BenchConfig& config);

struct TextSample {
    std::size_t id = 0;
    Scheme scheme = Scheme::NoWatermark;
    std::vector<TokenId> prompt;
    std::vector<TokenId> tokens;
};

// Per-text prompts drawn from word tokens; shared by every scheme of a run.
std::vector<TokenId> bench_prompt(const Vocabulary& vocab, std::uint64_t master_seed, std::size_t text_id,
                                  std::size_t prompt_length);
std::uint64_t bench_sampling_seed(std::uint64_t master_seed, Scheme scheme, std::size_t text_id);

std::vector<TextSample> generate_corpus(const LanguageModel& model, Scheme scheme, const WatermarkKeys& keys,
                                        const DuwakConfig& config, std::size_t n_texts, std::size_t length,
                                        std::size_t prompt_length, std::uint64_t master_seed, std::size_t workers);

void write_texts_jsonl(const std::string& path, const std::vector<TextSample>& texts);
std::vector<TextSample> read_texts_jsonl(const std::string& path);

struct TextRecord {
    std::size_t id = 0;
    std::size_t T = 0;                      // attacked length
    double green_fraction = 0.0;
    double diversity = 0.0;                 // NaN when T < 4
    double p_value = 1.0;                   // cell detector at full length
    DetectionReport report;
    std::vector<std::optional<std::size_t>> t_star;  // one per threshold
    std::string error;                      // non-empty: the text failed
};

struct CellSummary {
    Scheme scheme = Scheme::NoWatermark;
    std::string attack;
    DetectorKind detector = DetectorKind::duwak;
    std::size_t n_texts = 0;
    std::size_t failures = 0;
    // Infinity encodes the sentinel.
    std::vector<double> median_t_star;
    double mean_p = 1.0;
    double p_ci_lo = 1.0;
    double p_ci_hi = 1.0;
    double mean_diversity = 0.0;
    double mean_green = 0.0;
    double seconds = 0.0;
    std::string status = "ok";
};

struct BenchReport {
    std::vector<double> thresholds;
    std::size_t max_inspect = 0;
    std::vector<CellSummary> cells;
};

// generate -> attack -> detect -> aggregate, writing under config.out_dir:
//   run.json, texts/<scheme>.jsonl, records/<scheme>__<attack>.jsonl, summary.csv
// Cells whose record file already exists are loaded instead of recomputed.
BenchReport run_bench(const BenchConfig& config);

// Summary from raw per-text records; this is also how run_bench aggregates.
CellSummary summarize_cell(Scheme scheme, const std::string& attack, DetectorKind detector,
                           const std::vector<TextRecord>& records, std::size_t n_thresholds);
std::string render_t_star(double median, std::size_t max_inspect);
std::string summary_csv(const BenchReport& report, bool with_timings);

std::string record_to_json(const TextRecord& r);
TextRecord record_from_json(const std::string& line);
std::vector<TextRecord> read_records(const std::string& path);

struct FprRow {
    DetectorKind detector = DetectorKind::duwak;
    double threshold = 0.0;
    std::size_t n = 0;
    std::size_t positives = 0;
    double rate = 0.0;
    double sigma = 0.0;   // binomial sd at the nominal rate
    double limit = 0.0;   // threshold + 3 sigma
    bool pass = false;
};

// Every text is scanned once; all requested detectors read the same scan.
std::vector<FprRow> fpr_experiment(const LanguageModel& model, const std::vector<TextSample>& texts,
                                   const WatermarkKeys& keys, const DuwakConfig& config,
                                   const std::vector<DetectorKind>& detectors, const std::vector<double>& thresholds,
                                   std::size_t workers);
// Generates `n_texts` unwatermarked texts first.
std::vector<FprRow> fpr_experiment(const LanguageModel& model, std::size_t n_texts, std::size_t length,
                                   const WatermarkKeys& keys, const DuwakConfig& config,
                                   const std::vector<DetectorKind>& detectors, const std::vector<double>& thresholds,
                                   std::size_t workers, std::uint64_t master_seed, std::size_t prompt_length = 8);
std::string fpr_csv(const std::vector<FprRow>& rows);

// The rating prompt with both placeholders filled.
std::string rating_prompt(const std::string& prompt, const std::string& response);
// Leading integer of a reply, after an optional "Grade out of 100:" prefix.
std::optional<int> parse_grade(const std::string& reply);
// One entry per text; failed calls and unparseable replies are nullopt.
std::vector<std::optional<int>> rate_texts(const std::vector<std::string>& prompts,
                                           const std::vector<std::string>& texts, const ChatClient& client,
                                           std::size_t workers = 1);

// Writes via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace duwak
