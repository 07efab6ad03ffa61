#include "duwak/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>
#include <sstream>

#include "duwak/parallel.hpp"
#include "duwak/rand.hpp"
#include "duwak/stats.hpp"

namespace duwak {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTagPrompt = 0x50524F4D50542D54ULL;  // "PROMPT-T"
constexpr std::uint64_t kTagText = 0x544558542D534545ULL;    // "TEXT-SEE"

std::string fmt6(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t get_u64(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        return std::stoull(s, nullptr, s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0 ? 16 : 10);
    }
    return j.get<std::uint64_t>();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_safe(std::string s) {
    for (char& c : s) {
        if (c == ':' || c == '/' || c == '\\' || c == ' ') c = '_';
    }
    return s;
}

json text_to_json(const TextSample& t) {
    return {{"id", t.id}, {"scheme", to_string(t.scheme)}, {"prompt", t.prompt}, {"tokens", t.tokens}};
}

}  // namespace

double diversity(std::span<const TokenId> tokens) {
    if (tokens.size() < 4) throw Error(Errc::invalid_argument, "diversity needs at least 4 tokens");
    double product = 1.0;
    for (std::size_t n = 2; n <= 4; ++n) {
        std::set<std::vector<TokenId>> unique;
        const std::size_t total = tokens.size() - n + 1;
        for (std::size_t i = 0; i < total; ++i) unique.emplace(tokens.begin() + i, tokens.begin() + i + n);
        product *= static_cast<double>(unique.size()) / static_cast<double>(total);
    }
    return product;
}

ModelHandle make_model(const ModelConfig& c) {
    ModelHandle h;
    h.vocab = std::make_shared<const Vocabulary>(c.vocab_file.empty() ? Vocabulary::builtin(c.vocab_size)
                                                                      : Vocabulary::load(c.vocab_file));
    if (c.logits_url.empty()) {
        h.model = std::make_shared<const MockLM>(c.seed, h.vocab, c.dim, c.temperature);
    } else {
        h.model = std::make_shared<const HttpModel>(c.logits_url, h.vocab, c.dim);
    }
    return h;
}

void BenchConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(Errc::invalid_configuration, m); };
    duwak.validate();
    keys.validate();
    if (schemes.empty()) fail("no schemes configured");
    if (texts_per_cell < 2) fail("texts_per_cell must be >= 2 (medians need two texts)");
    if (corpus_file.empty() && length < 4) fail("length must be >= 4");
    if (thresholds.empty()) fail("no thresholds configured");
    for (double t : thresholds) {
        if (!(t > 0.0 && t < 1.0)) fail("thresholds must lie in (0,1)");
    }
    if (workers < 1) fail("workers must be >= 1");
    if (out_dir.empty()) fail("out_dir is empty");
    for (const auto& a : attacks) a.validate();
}

BenchConfig bench_config_from_json(const std::string& text) {
    BenchConfig c;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_configuration, std::string("config is not valid JSON: ") + e.what());
    }
    try {
        if (j.contains("model")) {
            const auto& m = j["model"];
            if (m.contains("seed")) c.model.seed = get_u64(m["seed"]);
            c.model.dim = m.value("dim", c.model.dim);
            c.model.temperature = m.value("temperature", c.model.temperature);
            c.model.vocab_size = m.value("vocab_size", c.model.vocab_size);
            c.model.vocab_file = m.value("vocab_file", c.model.vocab_file);
            c.model.logits_url = m.value("logits_url", c.model.logits_url);
        }
        if (j.contains("keys")) {
            if (j["keys"].contains("tp")) c.keys.tp.value = get_u64(j["keys"]["tp"]);
            if (j["keys"].contains("cs")) c.keys.cs.value = get_u64(j["keys"]["cs"]);
        }
        if (j.contains("duwak")) {
            const auto& d = j["duwak"];
            c.duwak.gamma = d.value("gamma", c.duwak.gamma);
            c.duwak.delta = d.value("delta", c.duwak.delta);
            c.duwak.eta = d.value("eta", c.duwak.eta);
            c.duwak.alpha = d.value("alpha", c.duwak.alpha);
            c.duwak.k = d.value("k", c.duwak.k);
            c.duwak.L = d.value("L", c.duwak.L);
            c.duwak.h = d.value("h", c.duwak.h);
            c.duwak.M = d.value("M", c.duwak.M);
            c.duwak.p_threshold = d.value("p_threshold", c.duwak.p_threshold);
            c.duwak.max_inspect = d.value("max_inspect", c.duwak.max_inspect);
            c.duwak.max_context = d.value("max_context", c.duwak.max_context);
            if (d.contains("detector_seed")) c.duwak.detector_seed = get_u64(d["detector_seed"]);
        }
        if (j.contains("schemes")) {
            c.schemes.clear();
            for (const auto& s : j["schemes"]) c.schemes.push_back(parse_scheme(s.get<std::string>()));
        }
        c.master_seed = j.contains("master_seed") ? get_u64(j["master_seed"]) : c.master_seed;
        if (j.contains("attacks")) {
            const auto& a = j["attacks"];
            if (a.is_string() && a.get<std::string>() == "default") {
                c.attacks.clear();
            } else {
                for (const auto& label : a) c.attacks.push_back(AttackSpec::parse(label.get<std::string>(), c.master_seed));
            }
        }
        c.include_external = j.value("include_external", c.include_external);
        c.corpus_file = j.value("corpus_file", c.corpus_file);
        c.texts_per_cell = j.value("texts_per_cell", c.texts_per_cell);
        c.length = j.value("length", c.length);
        c.prompt_length = j.value("prompt_length", c.prompt_length);
        if (j.contains("thresholds")) c.thresholds = j["thresholds"].get<std::vector<double>>();
        c.out_dir = j.value("out_dir", c.out_dir);
        c.workers = j.value("workers", c.workers);
        c.record_timings = j.value("record_timings", c.record_timings);
        if (j.contains("maps")) {
            c.maps.synonym = j["maps"].value("synonym", std::string());
            c.maps.contraction = j["maps"].value("contraction", std::string());
            c.maps.casefold = j["maps"].value("casefold", std::string());
        }
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_configuration, std::string("bad config field: ") + e.what());
    }
    // Attack seeds follow the master seed.
    for (auto& a : c.attacks) a.attack_seed = c.master_seed;
    c.validate();
    return c;
}

BenchConfig load_bench_config(const std::string& path) { return bench_config_from_json(read_file(path)); }

std::string bench_config_to_json(const BenchConfig& c) {
    json j;
    j["model"] = {{"seed", hex64(c.model.seed)},        {"dim", c.model.dim},
                  {"temperature", c.model.temperature}, {"vocab_size", c.model.vocab_size},
                  {"vocab_file", c.model.vocab_file},   {"logits_url", c.model.logits_url}};
    j["keys"] = {{"tp", hex64(c.keys.tp.value)}, {"cs", hex64(c.keys.cs.value)}};
    j["duwak"] = {{"gamma", c.duwak.gamma},
                  {"delta", c.duwak.delta},
                  {"eta", c.duwak.eta},
                  {"alpha", c.duwak.alpha},
                  {"k", c.duwak.k},
                  {"L", c.duwak.L},
                  {"h", c.duwak.h},
                  {"M", c.duwak.M},
                  {"p_threshold", c.duwak.p_threshold},
                  {"max_inspect", c.duwak.max_inspect},
                  {"max_context", c.duwak.max_context},
                  {"detector_seed", hex64(c.duwak.detector_seed)}};
    json schemes = json::array();
    for (auto s : c.schemes) schemes.push_back(to_string(s));
    j["schemes"] = schemes;
    if (c.attacks.empty()) {
        j["attacks"] = "default";
    } else {
        json attacks = json::array();
        for (const auto& a : c.attacks) attacks.push_back(a.label());
        j["attacks"] = attacks;
    }
    j["include_external"] = c.include_external;
    j["corpus_file"] = c.corpus_file;
    j["texts_per_cell"] = c.texts_per_cell;
    j["length"] = c.length;
    j["prompt_length"] = c.prompt_length;
    j["thresholds"] = c.thresholds;
    j["out_dir"] = c.out_dir;
    j["workers"] = c.workers;
    j["master_seed"] = hex64(c.master_seed);
    j["record_timings"] = c.record_timings;
    j["maps"] = {{"synonym", c.maps.synonym}, {"contraction", c.maps.contraction}, {"casefold", c.maps.casefold}};
    return j.dump(2) + "\n";
}

std::vector<TokenId> bench_prompt(const Vocabulary& vocab, std::uint64_t master_seed, std::size_t text_id,
                                  std::size_t prompt_length) {
    std::vector<TokenId> words;
    for (TokenId n = 1; n < vocab.size(); ++n) {
        if (is_editable_word(vocab.token(n))) words.push_back(n);
    }
    if (words.empty()) throw Error(Errc::invalid_argument, "vocabulary has no word tokens for prompts");
    const std::uint64_t key = derive_subkey(master_seed, kTagPrompt);
    std::vector<TokenId> prompt(prompt_length);
    for (std::size_t j = 0; j < prompt_length; ++j) {
        const double u = u01(key, mix64(text_id), j);
        prompt[j] = words[std::min(words.size() - 1, static_cast<std::size_t>(u * static_cast<double>(words.size())))];
    }
    return prompt;
}

std::uint64_t bench_sampling_seed(std::uint64_t master_seed, Scheme scheme, std::size_t text_id) {
    return derive_subkey(master_seed ^ mix64(static_cast<std::uint64_t>(scheme) + 1), kTagText ^ mix64(text_id));
}

std::vector<TextSample> generate_corpus(const LanguageModel& model, Scheme scheme, const WatermarkKeys& keys,
                                        const DuwakConfig& config, std::size_t n_texts, std::size_t length,
                                        std::size_t prompt_length, std::uint64_t master_seed, std::size_t workers) {
    std::vector<TextSample> out(n_texts);
    parallel_for(n_texts, workers, [&](std::size_t i) {
        TextSample& t = out[i];
        t.id = i;
        t.scheme = scheme;
        t.prompt = bench_prompt(model.vocab(), master_seed, i, prompt_length);
        t.tokens = generate(model, t.prompt, scheme, keys, config, length, bench_sampling_seed(master_seed, scheme, i))
                       .tokens.tokens;
    });
    return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_error, "cannot write " + tmp);
        out << contents;
        out.flush();
        if (!out) throw Error(Errc::io_error, "write failed for " + tmp);
    }
    fs::rename(tmp, target);
}

void write_texts_jsonl(const std::string& path, const std::vector<TextSample>& texts) {
    std::string body;
    for (const auto& t : texts) body += text_to_json(t).dump() + "\n";
    write_file_atomic(path, body);
}

std::vector<TextSample> read_texts_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot read " + path);
    std::vector<TextSample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            TextSample t;
            t.id = j.value("id", out.size());
            t.scheme = j.contains("scheme") ? parse_scheme(j["scheme"].get<std::string>()) : Scheme::NoWatermark;
            if (j.contains("prompt")) t.prompt = j["prompt"].get<std::vector<TokenId>>();
            t.tokens = j.at("tokens").get<std::vector<TokenId>>();
            out.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw Error(Errc::io_error, path + ": bad text record: " + e.what());
        }
    }
    return out;
}

std::string record_to_json(const TextRecord& r) {
    json j;
    j["id"] = r.id;
    j["T"] = r.T;
    j["green_fraction"] = r.green_fraction;
    j["diversity"] = std::isnan(r.diversity) ? json(nullptr) : json(r.diversity);
    j["p_value"] = r.p_value;
    json ts = json::array();
    for (const auto& t : r.t_star) ts.push_back(t ? json(*t) : json(nullptr));
    j["t_star"] = ts;
    std::ostringstream rep;
    write_report_jsonl(rep, r.report);
    std::string rep_line = rep.str();
    rep_line.pop_back();
    j["report"] = json::parse(rep_line);
    if (!r.error.empty()) j["error"] = r.error;
    return j.dump();
}

TextRecord record_from_json(const std::string& line) {
    const auto j = json::parse(line);
    TextRecord r;
    r.id = j.at("id").get<std::size_t>();
    r.error = j.value("error", std::string());
    r.T = j.at("T").get<std::size_t>();
    r.green_fraction = j.at("green_fraction").get<double>();
    r.diversity = j.at("diversity").is_null() ? std::numeric_limits<double>::quiet_NaN() : j["diversity"].get<double>();
    r.p_value = j.at("p_value").get<double>();
    for (const auto& t : j.at("t_star")) {
        r.t_star.push_back(t.is_null() ? std::nullopt : std::optional<std::size_t>(t.get<std::size_t>()));
    }
    r.report = parse_report_json(j.at("report").dump());
    return r;
}

std::vector<TextRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot read " + path);
    std::vector<TextRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(record_from_json(line));
    }
    return out;
}

CellSummary summarize_cell(Scheme scheme, const std::string& attack, DetectorKind detector,
                           const std::vector<TextRecord>& records, std::size_t n_thresholds) {
    CellSummary s;
    s.scheme = scheme;
    s.attack = attack;
    s.detector = detector;
    std::vector<const TextRecord*> ok;
    for (const auto& r : records) {
        if (r.error.empty()) {
            ok.push_back(&r);
        } else {
            ++s.failures;
        }
    }
    s.n_texts = ok.size();
    s.median_t_star.assign(n_thresholds, std::numeric_limits<double>::quiet_NaN());
    if (ok.size() < 2) {
        s.status = records.empty() ? "empty" : (ok.empty() ? "failed: " + records.front().error : "insufficient texts");
        return s;
    }
    for (std::size_t k = 0; k < n_thresholds; ++k) {
        std::vector<double> v;
        for (const auto* r : ok) {
            v.push_back(r->t_star.at(k) ? static_cast<double>(*r->t_star[k])
                                        : std::numeric_limits<double>::infinity());
        }
        s.median_t_star[k] = median(std::move(v));
    }
    const double n = static_cast<double>(ok.size());
    double sum = 0.0, green = 0.0, div = 0.0;
    std::size_t div_n = 0;
    for (const auto* r : ok) {
        sum += r->p_value;
        green += r->green_fraction;
        if (!std::isnan(r->diversity)) {
            div += r->diversity;
            ++div_n;
        }
    }
    s.mean_p = sum / n;
    double ss = 0.0;
    for (const auto* r : ok) ss += (r->p_value - s.mean_p) * (r->p_value - s.mean_p);
    const double half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    s.p_ci_lo = std::max(0.0, s.mean_p - half);
    s.p_ci_hi = std::min(1.0, s.mean_p + half);
    s.mean_green = green / n;
    s.mean_diversity = div_n ? div / static_cast<double>(div_n) : std::numeric_limits<double>::quiet_NaN();
    if (s.failures) s.status = "partial";
    return s;
}

std::string render_t_star(double median_value, std::size_t max_inspect) {
    if (std::isnan(median_value)) return "";
    if (std::isinf(median_value)) return render_sentinel(max_inspect);
    return fmt6(median_value);
}

std::string summary_csv(const BenchReport& report, bool with_timings) {
    std::string out = "scheme,attack,detector,n_texts,failures";
    for (double t : report.thresholds) out += ",median_t_star_p" + fmt6(t);
    out += ",mean_p,p_ci_lo,p_ci_hi,diversity_pct,green_fraction,status";
    if (with_timings) out += ",seconds";
    out += "\n";
    for (const auto& c : report.cells) {
        out += std::string(to_string(c.scheme)) + "," + c.attack + "," + to_string(c.detector) + "," +
               std::to_string(c.n_texts) + "," + std::to_string(c.failures);
        for (double m : c.median_t_star) out += "," + render_t_star(m, report.max_inspect);
        out += "," + fmt6(c.mean_p) + "," + fmt6(c.p_ci_lo) + "," + fmt6(c.p_ci_hi) + "," +
               fmt6(100.0 * c.mean_diversity) + "," + fmt6(c.mean_green) + "," + c.status;
        if (with_timings) out += "," + fmt6(c.seconds);
        out += "\n";
    }
    return out;
}

BenchReport run_bench(const BenchConfig& config) {
    config.validate();
    const fs::path out(config.out_dir);
    fs::create_directories(out / "texts");
    fs::create_directories(out / "records");
    {
        // Where and how wide a run executes does not change its results, so run.json omits both.
        json meta = json::parse(bench_config_to_json(config));
        meta.erase("out_dir");
        meta.erase("workers");
        write_file_atomic((out / "run.json").string(), meta.dump(2) + "\n");
    }

    const ModelHandle mh = make_model(config.model);
    const LanguageModel& model = *mh.model;
    const Vocabulary& vocab = *mh.vocab;

    const SynonymMap synonyms =
        config.maps.synonym.empty() ? nearest_neighbour_synonyms(model) : load_synonym_map(config.maps.synonym, vocab);
    const ContractionMap contractions = config.maps.contraction.empty()
                                            ? builtin_contraction_map(vocab)
                                            : load_contraction_map(config.maps.contraction, vocab);
    const CaseFoldMap casefold =
        config.maps.casefold.empty() ? builtin_casefold_map(vocab) : load_casefold_map(config.maps.casefold, vocab);
    std::unique_ptr<ChatClient> rewriter;
    if (config.include_external) {
        if (auto cc = ChatClientConfig::from_env()) rewriter = std::make_unique<HttpChatClient>(*cc);
    }
    AttackMaps maps{&vocab, &synonyms, &contractions, &casefold, rewriter.get()};

    const auto attacks = config.attacks.empty() ? attack_grid(config.master_seed, config.include_external)
                                                : config.attacks;
    std::vector<TextSample> file_corpus;
    if (!config.corpus_file.empty()) file_corpus = read_texts_jsonl(config.corpus_file);

    BenchReport report;
    report.thresholds = config.thresholds;
    report.max_inspect = config.duwak.max_inspect;

    for (Scheme scheme : config.schemes) {
        const std::string texts_path = (out / "texts" / (std::string(to_string(scheme)) + ".jsonl")).string();
        std::vector<TextSample> texts;
        if (fs::exists(texts_path)) {
            texts = read_texts_jsonl(texts_path);
        } else {
            if (config.corpus_file.empty()) {
                texts = generate_corpus(model, scheme, config.keys, config.duwak, config.texts_per_cell,
                                        config.length, config.prompt_length, config.master_seed, config.workers);
            } else {
                for (const auto& t : file_corpus) {
                    if (t.scheme == scheme && texts.size() < config.texts_per_cell) texts.push_back(t);
                }
            }
            write_texts_jsonl(texts_path, texts);
        }
        const DetectorKind detector = detector_for(scheme);

        for (const auto& attack : attacks) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::string label = attack.label();
            const std::string rec_path =
                (out / "records" / (std::string(to_string(scheme)) + "__" + file_safe(label) + ".jsonl")).string();
            std::vector<TextRecord> records;
            if (fs::exists(rec_path)) {
                records = read_records(rec_path);
            } else {
                records.resize(texts.size());
                parallel_for(texts.size(), config.workers, [&](std::size_t i) {
                    const TextSample& text = texts[i];
                    TextRecord& rec = records[i];
                    rec.id = text.id;
                    try {
                        AttackSpec spec = attack;
                        spec.attack_seed = mix64(attack.attack_seed ^ mix64(text.id));
                        const auto attacked = apply_attack(TokenSeq{text.tokens, Origin::generated}, spec, maps);
                        if (attacked.empty()) throw Error(Errc::undefined_test, "attack left no tokens");
                        TextScan scan(attacked.tokens, text.prompt, config.keys, config.duwak, &model, true);
                        rec.T = scan.size();
                        rec.report = scan.report(scan.size());
                        rec.green_fraction = static_cast<double>(rec.report.phi_tp) / static_cast<double>(rec.T);
                        rec.diversity = rec.T >= 4 ? diversity(attacked.tokens)
                                                   : std::numeric_limits<double>::quiet_NaN();
                        rec.p_value = scan.p_value(detector, scan.size());
                        for (double th : config.thresholds) {
                            rec.t_star.push_back(
                                detection_efficiency(scan, detector, th, config.duwak.max_inspect).t_star);
                        }
                    } catch (const std::exception& e) {
                        rec = TextRecord{};
                        rec.id = text.id;
                        rec.error = e.what();
                        rec.t_star.assign(config.thresholds.size(), std::nullopt);
                    }
                });
                const bool any_ok =
                    std::any_of(records.begin(), records.end(), [](const TextRecord& r) { return r.error.empty(); });
                if (any_ok) {
                    std::string body;
                    for (const auto& r : records) body += record_to_json(r) + "\n";
                    write_file_atomic(rec_path, body);
                }
            }
            CellSummary cell = summarize_cell(scheme, label, detector, records, config.thresholds.size());
            cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report.cells.push_back(std::move(cell));
        }
    }
    write_file_atomic((out / "summary.csv").string(), summary_csv(report, config.record_timings));
    return report;
}

std::vector<FprRow> fpr_experiment(const LanguageModel& model, const std::vector<TextSample>& texts,
                                   const WatermarkKeys& keys, const DuwakConfig& config,
                                   const std::vector<DetectorKind>& detectors, const std::vector<double>& thresholds,
                                   std::size_t workers) {
    const bool want_cs = std::any_of(detectors.begin(), detectors.end(), needs_model);
    std::vector<std::vector<double>> p(texts.size(), std::vector<double>(detectors.size()));
    parallel_for(texts.size(), workers, [&](std::size_t i) {
        const auto& t = texts[i];
        TextScan scan(t.tokens, t.prompt, keys, config, &model, want_cs);
        for (std::size_t d = 0; d < detectors.size(); ++d) p[i][d] = scan.p_value(detectors[d], scan.size());
    });
    std::vector<FprRow> rows;
    for (std::size_t d = 0; d < detectors.size(); ++d) {
        for (double q : thresholds) {
            FprRow row;
            row.detector = detectors[d];
            row.threshold = q;
            row.n = texts.size();
            for (const auto& pi : p) row.positives += pi[d] <= q ? 1 : 0;
            const double n = static_cast<double>(row.n);
            row.rate = n > 0 ? static_cast<double>(row.positives) / n : 0.0;
            row.sigma = n > 0 ? std::sqrt(q * (1.0 - q) / n) : 0.0;
            row.limit = q + 3.0 * row.sigma;
            row.pass = row.rate <= row.limit;
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<FprRow> fpr_experiment(const LanguageModel& model, std::size_t n_texts, std::size_t length,
                                   const WatermarkKeys& keys, const DuwakConfig& config,
                                   const std::vector<DetectorKind>& detectors, const std::vector<double>& thresholds,
                                   std::size_t workers, std::uint64_t master_seed, std::size_t prompt_length) {
    const auto texts = generate_corpus(model, Scheme::NoWatermark, keys, config, n_texts, length, prompt_length,
                                       master_seed, workers);
    return fpr_experiment(model, texts, keys, config, detectors, thresholds, workers);
}

std::string fpr_csv(const std::vector<FprRow>& rows) {
    std::string out = "detector,threshold,n,positives,rate,sigma,limit,pass\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.detector)) + "," + fmt6(r.threshold) + "," + std::to_string(r.n) + "," +
               std::to_string(r.positives) + "," + fmt6(r.rate) + "," + fmt6(r.sigma) + "," + fmt6(r.limit) + "," +
               (r.pass ? "true" : "false") + "\n";
    }
    return out;
}

std::string rating_prompt(const std::string& prompt, const std::string& response) {
    return "[INST] <<SYS>> You are given a prompt and a response,\n"
           "and you need to grade the response out of 100 based on: \n"
           "Accuracy (20 points) - correctness and relevance to the prompt; \n"
           "Detail (20 points) - comprehensiveness and depth; \n"
           "Grammar and Typing (30 points) - grammatical and typographical accuracy;\n"
           "Vocabulary (30 points) - appropriateness and richness. \n"
           "Deduct points for shortcomings in each category. \n"
           "Give a total grade at the first line of the response. <</SYS>> \n"
           "Prompt: " +
           prompt + "\nResponse: " + response + "\n[/INST] Grade out of 100: ";
}

std::optional<int> parse_grade(const std::string& reply) {
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < reply.size() && std::isspace(static_cast<unsigned char>(reply[i]))) ++i;
    };
    skip_ws();
    static const std::string prefix = "grade out of 100:";
    if (reply.size() - i >= prefix.size()) {
        bool match = true;
        for (std::size_t k = 0; k < prefix.size() && match; ++k) {
            match = std::tolower(static_cast<unsigned char>(reply[i + k])) == prefix[k];
        }
        if (match) {
            i += prefix.size();
            skip_ws();
        }
    }
    std::size_t digits = 0;
    int value = 0;
    while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i])) && digits < 4) {
        value = value * 10 + (reply[i] - '0');
        ++i;
        ++digits;
    }
    if (digits == 0 || digits > 3 || value > 100) return std::nullopt;
    if (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i]))) return std::nullopt;
    return value;
}

std::vector<std::optional<int>> rate_texts(const std::vector<std::string>& prompts,
                                           const std::vector<std::string>& texts, const ChatClient& client,
                                           std::size_t workers) {
    if (prompts.size() != texts.size()) throw Error(Errc::invalid_argument, "prompts and texts differ in count");
    std::vector<std::optional<int>> out(texts.size());
    parallel_for(texts.size(), workers, [&](std::size_t i) {
        try {
            out[i] = parse_grade(client.complete(rating_prompt(prompts[i], texts[i])));
        } catch (const Error&) {
            out[i] = std::nullopt;
        }
    });
    return out;
}

}  // namespace duwak
