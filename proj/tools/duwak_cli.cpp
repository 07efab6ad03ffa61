#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "duwak/attack.hpp"
#include "duwak/bench.hpp"
#include "duwak/detect.hpp"
#include "duwak/generate.hpp"
#include "duwak/parallel.hpp"
#include "duwak/theory.hpp"

namespace fs = std::filesystem;
using namespace duwak;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
    std::size_t workers = 1;
};

void add_common(CLI::App* app, Common& c, const std::string& default_out) {
    c.out = default_out;
    app->add_option("--config", c.config, "JSON config (docs/CONFIG.md)")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--out", c.out, "output directory")->capture_default_str();
    app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

BenchConfig base_config(const Common& c, CLI::App* app) {
    BenchConfig cfg = c.config.empty() ? BenchConfig{} : load_bench_config(c.config);
    if (app->count("--seed")) {
        cfg.master_seed = c.seed;
        for (auto& a : cfg.attacks) a.attack_seed = c.seed;
    }
    cfg.workers = c.workers;
    return cfg;
}

void write_text(const fs::path& path, const std::string& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path.string(), body);
}

std::vector<double> parse_doubles(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

int cmd_generate(const Common& c, CLI::App* app, const std::string& scheme_name, std::size_t count,
                 std::size_t length, std::size_t prompt_length, bool traces) {
    const BenchConfig cfg = base_config(c, app);
    const Scheme scheme = parse_scheme(scheme_name);
    const ModelHandle mh = make_model(cfg.model);
    std::vector<TextSample> texts(count);
    std::vector<GenerationTrace> trace_out(traces ? count : 0);
    parallel_for(count, cfg.workers, [&](std::size_t i) {
        TextSample& t = texts[i];
        t.id = i;
        t.scheme = scheme;
        t.prompt = bench_prompt(*mh.vocab, cfg.master_seed, i, prompt_length);
        auto tr = generate(*mh.model, t.prompt, scheme, cfg.keys, cfg.duwak, length,
                           bench_sampling_seed(cfg.master_seed, scheme, i));
        t.tokens = tr.tokens.tokens;
        if (traces) trace_out[i] = std::move(tr);
    });
    const fs::path out(c.out);
    fs::create_directories(out);
    write_texts_jsonl((out / "texts.jsonl").string(), texts);
    if (traces) {
        fs::create_directories(out / "traces");
        for (std::size_t i = 0; i < count; ++i) {
            std::ostringstream os;
            write_trace(os, trace_out[i]);
            write_text(out / "traces" / (std::string(to_string(scheme)) + "_" + std::to_string(i) + ".tsv"), os.str());
        }
    }
    std::printf("%zu %s texts -> %s\n", count, to_string(scheme), (out / "texts.jsonl").c_str());
    return 0;
}

int cmd_detect(const Common& c, CLI::App* app, const std::string& texts_path, const std::string& detector_name,
               const std::string& thresholds) {
    BenchConfig cfg = base_config(c, app);
    if (app->count("--seed")) cfg.duwak.detector_seed = c.seed;
    const ModelHandle mh = make_model(cfg.model);
    const auto texts = read_texts_jsonl(texts_path);
    const auto ths = thresholds.empty() ? cfg.thresholds : parse_doubles(thresholds);

    std::vector<DetectionReport> reports(texts.size());
    std::vector<std::string> eff(texts.size());
    parallel_for(texts.size(), cfg.workers, [&](std::size_t i) {
        const auto& t = texts[i];
        const DetectorKind d = detector_name.empty() ? detector_for(t.scheme) : parse_detector(detector_name);
        TextScan scan(t.tokens, t.prompt, cfg.keys, cfg.duwak, mh.model.get(), true);
        reports[i] = scan.report(scan.size());
        for (double th : ths) {
            const auto r = detection_efficiency(scan, d, th, cfg.duwak.max_inspect);
            char line[160];
            std::snprintf(line, sizeof line, "%zu,%s,%s,%g,%s\n", t.id, to_string(t.scheme), to_string(d), th,
                          r.render().c_str());
            eff[i] += line;
        }
    });

    const fs::path out(c.out);
    fs::create_directories(out);
    std::ostringstream jsonl;
    std::string csv = report_csv_header() + "\n";
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const std::string id = std::to_string(texts[i].id);
        write_report_jsonl(jsonl, reports[i], id);
        csv += report_csv_row(reports[i], id) + "\n";
    }
    std::string eff_csv = "id,scheme,detector,threshold,t_star\n";
    for (const auto& e : eff) eff_csv += e;
    write_text(out / "reports.jsonl", jsonl.str());
    write_text(out / "reports.csv", csv);
    write_text(out / "efficiency.csv", eff_csv);
    std::printf("%zu reports -> %s\n", texts.size(), out.c_str());
    return 0;
}

int cmd_attack(const Common& c, CLI::App* app, const std::string& texts_path, const std::string& label) {
    const BenchConfig cfg = base_config(c, app);
    const ModelHandle mh = make_model(cfg.model);
    const Vocabulary& vocab = *mh.vocab;
    const SynonymMap syn =
        cfg.maps.synonym.empty() ? nearest_neighbour_synonyms(*mh.model) : load_synonym_map(cfg.maps.synonym, vocab);
    const ContractionMap con = cfg.maps.contraction.empty() ? builtin_contraction_map(vocab)
                                                            : load_contraction_map(cfg.maps.contraction, vocab);
    const CaseFoldMap cf =
        cfg.maps.casefold.empty() ? builtin_casefold_map(vocab) : load_casefold_map(cfg.maps.casefold, vocab);
    std::unique_ptr<ChatClient> rewriter;
    if (auto cc = ChatClientConfig::from_env()) rewriter = std::make_unique<HttpChatClient>(*cc);
    const AttackMaps maps{&vocab, &syn, &con, &cf, rewriter.get()};

    const AttackSpec spec = AttackSpec::parse(label, cfg.master_seed);
    spec.validate();
    auto texts = read_texts_jsonl(texts_path);
    parallel_for(texts.size(), cfg.workers, [&](std::size_t i) {
        AttackSpec s = spec;
        s.attack_seed = mix64(spec.attack_seed ^ mix64(texts[i].id));
        texts[i].tokens = apply_attack(TokenSeq{texts[i].tokens, Origin::generated}, s, maps).tokens;
    });
    const fs::path out(c.out);
    fs::create_directories(out);
    write_texts_jsonl((out / "attacked.jsonl").string(), texts);
    std::printf("%zu texts attacked with %s -> %s\n", texts.size(), spec.label().c_str(),
                (out / "attacked.jsonl").c_str());
    return 0;
}

int cmd_bench(const Common& c, CLI::App* app, bool timings) {
    BenchConfig cfg = base_config(c, app);
    if (app->count("--out")) cfg.out_dir = c.out;
    if (timings) cfg.record_timings = true;
    const BenchReport report = run_bench(cfg);
    std::fputs(summary_csv(report, cfg.record_timings).c_str(), stdout);
    return 0;
}

int cmd_fpr(const Common& c, CLI::App* app, std::size_t n, std::size_t length, const std::string& detectors,
            const std::string& thresholds, const std::string& texts_path) {
    const BenchConfig cfg = base_config(c, app);
    const ModelHandle mh = make_model(cfg.model);
    std::vector<DetectorKind> ds;
    std::stringstream ss(detectors);
    for (std::string item; std::getline(ss, item, ',');) ds.push_back(parse_detector(item));
    const auto ths = parse_doubles(thresholds);
    const auto rows = texts_path.empty()
                          ? fpr_experiment(*mh.model, n, length, cfg.keys, cfg.duwak, ds, ths, cfg.workers,
                                           cfg.master_seed, cfg.prompt_length)
                          : fpr_experiment(*mh.model, read_texts_jsonl(texts_path), cfg.keys, cfg.duwak, ds, ths,
                                           cfg.workers);
    const std::string csv = fpr_csv(rows);
    write_text(fs::path(c.out) / "fpr.csv", csv);
    std::fputs(csv.c_str(), stdout);
    bool ok = true;
    for (const auto& r : rows) ok = ok && r.pass;
    return ok ? 0 : 1;
}

int cmd_theory(const Common& c, CLI::App* app, std::size_t trials, std::size_t T, bool skip_defaults) {
    const BenchConfig cfg = base_config(c, app);
    const ModelHandle mh = make_model(cfg.model);
    TheoryOptions opt;
    if (app->count("--seed")) opt.seed = c.seed;
    opt.workers = cfg.workers;
    TheoryGrid grid;
    grid.trials = trials;
    grid.T = T;

    TheoryGridResult result;
    if (!skip_defaults) {
        // The default operating point at full length.
        const auto& d = cfg.duwak;
        result.bounds.push_back(verify_topk_bound(*mh.model, d.gamma, d.delta, d.k, 200, trials, opt));
        result.bounds.push_back(verify_duwak_bound(*mh.model, d.gamma, d.delta, d.k, 200, trials, opt));
        result.perplexity.push_back(verify_perplexity_bound(*mh.model, d.gamma, d.delta, d.k, 20, trials, opt));
    }
    auto g = verify_theory_grid(*mh.model, grid, opt);
    result.bounds.insert(result.bounds.end(), g.bounds.begin(), g.bounds.end());
    result.perplexity.insert(result.perplexity.end(), g.perplexity.begin(), g.perplexity.end());

    const fs::path out(c.out);
    const std::string summary = theory_summary(result);
    write_text(out / "bounds.csv", bounds_csv(result.bounds));
    write_text(out / "perplexity.csv", perplexity_csv(result.perplexity));
    write_text(out / "summary.txt", summary);
    std::fputs(summary.c_str(), stdout);
    return result.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual watermark generation, detection, attacks and benchmarks on a mock language model"};
    app.require_subcommand(1);

    Common gen_c, det_c, att_c, bench_c, fpr_c, th_c;

    auto* gen = app.add_subcommand("generate", "generate texts (JSONL) and optional per-text traces");
    add_common(gen, gen_c, "gen-out");
    std::string scheme = "DUWAK";
    std::size_t count = 10, length = 260, prompt_length = 8;
    bool traces = false;
    gen->add_option("--scheme", scheme, "NoWatermark, KGW, EXP, CS, KGW_EXP, EXP_CS or DUWAK")->capture_default_str();
    gen->add_option("-n,--count", count)->capture_default_str();
    gen->add_option("--length", length)->capture_default_str();
    gen->add_option("--prompt-length", prompt_length)->capture_default_str();
    gen->add_flag("--traces", traces, "also write traces/<scheme>_<id>.tsv");

    auto* det = app.add_subcommand("detect", "score texts; writes reports.jsonl, reports.csv, efficiency.csv");
    add_common(det, det_c, "detect-out");
    std::string det_texts, detector, det_thresholds;
    det->add_option("--texts", det_texts, "texts JSONL")->required()->check(CLI::ExistingFile);
    det->add_option("--detector", detector, "tp, cs, exp, duwak, kgw_exp, exp_cs (default: the text's scheme)");
    det->add_option("--thresholds", det_thresholds, "comma-separated; default from config");

    auto* att = app.add_subcommand("attack", "apply one post-editing attack to a texts JSONL");
    add_common(att, att_c, "attack-out");
    std::string att_texts, attack_label;
    att->add_option("--texts", att_texts, "texts JSONL")->required()->check(CLI::ExistingFile);
    att->add_option("--attack", attack_label, "label such as Synonym@0.25 or Contraction")->required();

    auto* bench = app.add_subcommand("bench", "run the benchmark grid of a config");
    add_common(bench, bench_c, "bench-out");
    bool timings = false;
    bench->add_flag("--timings", timings, "add a seconds column to summary.csv");

    auto* fpr = app.add_subcommand("fpr", "empirical false positive rates on unwatermarked text");
    add_common(fpr, fpr_c, "fpr-out");
    std::size_t fpr_n = 10000, fpr_length = 260;
    std::string detectors = "tp,cs,exp,duwak", fpr_thresholds = "0.01,0.02,0.05,0.1", fpr_texts;
    fpr->add_option("-n,--count", fpr_n)->capture_default_str();
    fpr->add_option("--length", fpr_length)->capture_default_str();
    fpr->add_option("--detectors", detectors)->capture_default_str();
    fpr->add_option("--thresholds", fpr_thresholds)->capture_default_str();
    fpr->add_option("--texts", fpr_texts, "score these texts instead of generating")->check(CLI::ExistingFile);

    auto* th = app.add_subcommand("verify-theory", "Monte-Carlo check of the green-count and perplexity bounds");
    add_common(th, th_c, "theory-out");
    std::size_t trials = 1000, grid_T = 50;
    bool skip_defaults = false;
    th->add_option("--trials", trials)->capture_default_str();
    th->add_option("--T", grid_T, "generation length of the grid cells")->capture_default_str();
    th->add_flag("--grid-only", skip_defaults, "skip the T=200 checks at the configured parameters");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(gen_c, gen, scheme, count, length, prompt_length, traces);
        if (*det) return cmd_detect(det_c, det, det_texts, detector, det_thresholds);
        if (*att) return cmd_attack(att_c, att, att_texts, attack_label);
        if (*bench) return cmd_bench(bench_c, bench, timings);
        if (*fpr) return cmd_fpr(fpr_c, fpr, fpr_n, fpr_length, detectors, fpr_thresholds, fpr_texts);
        if (*th) return cmd_theory(th_c, th, trials, grid_T, skip_defaults);
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
