#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "duwak/bench.hpp"
#include "support.hpp"

using namespace duwak;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every file under `dir`, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("duwak_bench_" + name);
    fs::remove_all(p);
    return p;
}

BenchConfig small_config(const fs::path& out, std::size_t workers) {
    BenchConfig c;
    c.schemes = {Scheme::KGW, Scheme::DUWAK};
    c.attacks = {AttackSpec::parse("None", 5), AttackSpec::parse("Synonym@0.5", 5), AttackSpec::parse("Swap@0.1", 5)};
    c.texts_per_cell = 6;
    c.length = 80;
    c.thresholds = {0.02, 0.05};
    c.master_seed = 5;
    c.out_dir = out.string();
    c.workers = workers;
    return c;
}

TextRecord record(std::size_t id, double p, std::optional<std::size_t> t) {
    TextRecord r;
    r.id = id;
    r.T = 100;
    r.p_value = p;
    r.green_fraction = 0.5;
    r.diversity = 0.9;
    r.t_star = {t};
    return r;
}

}  // namespace

TEST(Diversity, Examples) {
    std::vector<TokenId> distinct(100);
    for (TokenId i = 0; i < 100; ++i) distinct[i] = i;
    EXPECT_EQ(diversity(distinct), 1.0);
    const std::vector<TokenId> same(100, 7);
    EXPECT_NEAR(diversity(same), 1.0 / (99.0 * 98.0 * 97.0), 1e-20);
    EXPECT_NEAR(diversity(same), 1.06e-6, 0.01e-6);
    std::vector<TokenId> abab(100);
    for (std::size_t i = 0; i < 100; ++i) abab[i] = static_cast<TokenId>(i % 2);
    EXPECT_NEAR(diversity(abab), 8.0 / (99.0 * 98.0 * 97.0), 1e-20);
    const std::vector<TokenId> three{1, 2, 3};
    EXPECT_THROW(diversity(three), Error);
}

TEST(DiversityProperty, UnitInterval) {
    testing_support::Gen g(4);
    for (int i = 0; i < 500; ++i) {
        const auto t = g.tokens(4 + g.index(200), 1 + g.index(20));
        const double d = diversity(t);
        ASSERT_GT(d, 0.0);
        ASSERT_LE(d, 1.0);
    }
}

TEST(BenchConfig, JsonRoundTrip) {
    BenchConfig c = small_config("x", 3);
    c.model.seed = 0xFFFFFFFFFFFFFFFFULL;
    c.keys.tp.value = 11;
    c.keys.cs.value = 12;
    c.duwak.delta = 3.5;
    c.record_timings = true;
    c.maps.synonym = "syn.tsv";
    const auto text = bench_config_to_json(c);
    const auto back = bench_config_from_json(text);
    EXPECT_EQ(bench_config_to_json(back), text);
    EXPECT_EQ(back.model.seed, c.model.seed);
    EXPECT_EQ(back.attacks, c.attacks);
    EXPECT_EQ(back.schemes, c.schemes);
}

TEST(BenchConfig, Errors) {
    auto code = [](const std::string& j) {
        try {
            bench_config_from_json(j);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::io_error;
    };
    EXPECT_EQ(code("{"), Errc::invalid_configuration);
    EXPECT_EQ(code(R"({"texts_per_cell": 1})"), Errc::invalid_configuration);
    EXPECT_EQ(code(R"({"thresholds": [0]})"), Errc::invalid_configuration);
    EXPECT_EQ(code(R"({"duwak": {"M": 10}})"), Errc::invalid_configuration);
    EXPECT_EQ(code(R"({"length": "long"})"), Errc::invalid_configuration);
    EXPECT_THROW(bench_config_from_json(R"({"attacks": ["Synonym"]})"), Error);
    EXPECT_EQ(bench_config_from_json("{}").attacks.size(), 0u);
}

TEST(Texts, JsonlRoundTrip) {
    const auto& h = testing_support::default_mock();
    const auto texts = generate_corpus(*h.model, Scheme::DUWAK, WatermarkKeys{}, DuwakConfig{}, 3, 20, 4, 1, 1);
    const auto p = (fs::temp_directory_path() / "duwak_texts.jsonl").string();
    write_texts_jsonl(p, texts);
    const auto back = read_texts_jsonl(p);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].id, i);
        EXPECT_EQ(back[i].scheme, Scheme::DUWAK);
        EXPECT_EQ(back[i].prompt, texts[i].prompt);
        EXPECT_EQ(back[i].tokens, texts[i].tokens);
    }
    fs::remove(p);
}

TEST(Corpus, WorkerCountDoesNotMatter) {
    const auto& h = testing_support::default_mock();
    const auto a = generate_corpus(*h.model, Scheme::CS, WatermarkKeys{}, DuwakConfig{}, 5, 30, 4, 2, 1);
    const auto b = generate_corpus(*h.model, Scheme::CS, WatermarkKeys{}, DuwakConfig{}, 5, 30, 4, 2, 4);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a[i].tokens, b[i].tokens);
}

TEST(Summaries, SentinelRendering) {
    EXPECT_EQ(render_t_star(std::numeric_limits<double>::infinity(), 1024), ">1024");
    EXPECT_EQ(render_t_star(37.0, 1024), "37");
    EXPECT_EQ(render_t_star(37.5, 1024), "37.5");
    EXPECT_EQ(render_t_star(std::numeric_limits<double>::quiet_NaN(), 1024), "");
}

TEST(Summaries, CellStatistics) {
    std::vector<TextRecord> rs = {record(0, 0.01, 10), record(1, 0.03, std::nullopt), record(2, 0.02, 30)};
    auto s = summarize_cell(Scheme::DUWAK, "None", DetectorKind::duwak, rs, 1);
    EXPECT_EQ(s.n_texts, 3u);
    EXPECT_EQ(s.median_t_star[0], 30.0);
    EXPECT_NEAR(s.mean_p, 0.02, 1e-15);
    const double half = 1.96 * 0.01 / std::sqrt(3.0);
    EXPECT_NEAR(s.p_ci_lo, 0.02 - half, 1e-15);
    EXPECT_NEAR(s.p_ci_hi, 0.02 + half, 1e-15);
    EXPECT_EQ(s.status, "ok");

    rs.push_back(record(3, 1.0, std::nullopt));
    rs.back().error = "attack left no tokens";
    s = summarize_cell(Scheme::DUWAK, "None", DetectorKind::duwak, rs, 1);
    EXPECT_EQ(s.failures, 1u);
    EXPECT_EQ(s.n_texts, 3u);
    EXPECT_EQ(s.status, "partial");

    rs = {record(0, 0.5, std::nullopt), record(1, 0.5, std::nullopt)};
    EXPECT_TRUE(std::isinf(summarize_cell(Scheme::KGW, "None", DetectorKind::tp, rs, 1).median_t_star[0]));
    rs.resize(1);
    EXPECT_EQ(summarize_cell(Scheme::KGW, "None", DetectorKind::tp, rs, 1).status, "insufficient texts");
}

TEST(Records, JsonRoundTrip) {
    TextRecord r = record(4, 0.125, 17);
    r.t_star.push_back(std::nullopt);
    r.diversity = std::numeric_limits<double>::quiet_NaN();
    r.report.T = 100;
    r.report.p_combined = 0.25;
    const auto back = record_from_json(record_to_json(r));
    EXPECT_EQ(back.id, 4u);
    EXPECT_EQ(back.t_star, r.t_star);
    EXPECT_TRUE(std::isnan(back.diversity));
    EXPECT_EQ(back.report.p_combined, 0.25);
    EXPECT_EQ(record_to_json(back), record_to_json(r));
}

TEST(RunBench, DeterministicAcrossRunsAndWorkers) {
    const auto a = fresh_dir("a"), b = fresh_dir("b"), c = fresh_dir("c");
    run_bench(small_config(a, 1));
    run_bench(small_config(b, 1));
    run_bench(small_config(c, 3));
    const auto ta = tree(a);
    EXPECT_TRUE(ta.count("run.json"));
    EXPECT_TRUE(ta.count("summary.csv"));
    EXPECT_TRUE(ta.count("texts/DUWAK.jsonl"));
    EXPECT_TRUE(ta.count("records/DUWAK__Synonym@0.5.jsonl"));
    EXPECT_EQ(ta, tree(b));
    EXPECT_EQ(ta, tree(c));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(RunBench, AggregatesFromRecordFiles) {
    const auto dir = fresh_dir("agg");
    const auto cfg = small_config(dir, 2);
    const auto report = run_bench(cfg);
    ASSERT_EQ(report.cells.size(), 6u);
    for (const auto& cell : report.cells) {
        const auto rs = read_records(
            (dir / "records" / (std::string(to_string(cell.scheme)) + "__" + cell.attack + ".jsonl")).string());
        ASSERT_EQ(rs.size(), cfg.texts_per_cell);
        const auto s = summarize_cell(cell.scheme, cell.attack, cell.detector, rs, cfg.thresholds.size());
        EXPECT_EQ(s.median_t_star, cell.median_t_star);
        EXPECT_EQ(s.mean_p, cell.mean_p);
        EXPECT_EQ(s.mean_green, cell.mean_green);
        EXPECT_EQ(s.mean_diversity, cell.mean_diversity);
        EXPECT_EQ(cell.detector, detector_for(cell.scheme));
        // A stricter threshold is never reached earlier.
        for (const auto& r : rs) {
            const double strict = r.t_star[0] ? double(*r.t_star[0]) : INFINITY;
            const double loose = r.t_star[1] ? double(*r.t_star[1]) : INFINITY;
            EXPECT_GE(strict, loose);
        }
    }
    const auto csv = slurp(dir / "summary.csv");
    EXPECT_EQ(csv, summary_csv(report, false));
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "scheme,attack,detector,n_texts,failures,median_t_star_p0.02,median_t_star_p0.05,mean_p,p_ci_lo,"
              "p_ci_hi,diversity_pct,green_fraction,status");
    fs::remove_all(dir);
}

TEST(RunBench, Resumes) {
    const auto dir = fresh_dir("resume");
    const auto cfg = small_config(dir, 1);
    run_bench(cfg);
    const auto before = tree(dir);

    // A missing cell is recomputed to the same bytes.
    fs::remove(dir / "records" / "KGW__Swap@0.1.jsonl");
    fs::remove(dir / "summary.csv");
    run_bench(cfg);
    EXPECT_EQ(tree(dir), before);

    // A present cell is loaded, not recomputed.
    const auto path = (dir / "records" / "DUWAK__None.jsonl").string();
    auto rs = read_records(path);
    for (auto& r : rs) r.p_value = 0.5;
    std::string body;
    for (const auto& r : rs) body += record_to_json(r) + "\n";
    write_file_atomic(path, body);
    const auto report = run_bench(cfg);
    for (const auto& cell : report.cells) {
        if (cell.scheme == Scheme::DUWAK && cell.attack == "None") EXPECT_EQ(cell.mean_p, 0.5);
    }
    fs::remove_all(dir);
}

TEST(RunBench, WatermarkIsDetectedUnattacked) {
    const auto dir = fresh_dir("power");
    auto cfg = small_config(dir, 1);
    cfg.length = 200;
    cfg.attacks = {AttackSpec{}};
    const auto report = run_bench(cfg);
    for (const auto& cell : report.cells) {
        EXPECT_LT(cell.mean_p, 0.02) << to_string(cell.scheme);
        EXPECT_FALSE(std::isinf(cell.median_t_star[0]));
    }
    fs::remove_all(dir);
}

TEST(Fpr, NullTextsStayNearNominal) {
    const auto& h = testing_support::default_mock();
    const std::vector<DetectorKind> dets = {DetectorKind::tp, DetectorKind::exp, DetectorKind::duwak};
    const auto rows =
        fpr_experiment(*h.model, 300, 100, WatermarkKeys{}, DuwakConfig{}, dets, {0.01, 0.05}, 2, 77);
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].detector, dets[i / 2]);
        EXPECT_EQ(rows[i].threshold, i % 2 ? 0.05 : 0.01);
        EXPECT_EQ(rows[i].n, 300u);
        EXPECT_NEAR(rows[i].limit, rows[i].threshold + 3 * std::sqrt(rows[i].threshold * (1 - rows[i].threshold) / 300),
                    1e-15);
        EXPECT_TRUE(rows[i].pass) << to_string(rows[i].detector) << " " << rows[i].rate;
    }
    const auto csv = fpr_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "detector,threshold,n,positives,rate,sigma,limit,pass");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Fpr, WatermarkedInputFails) {
    const auto& h = testing_support::default_mock();
    const DuwakConfig cfg;
    const auto texts = generate_corpus(*h.model, Scheme::DUWAK, WatermarkKeys{}, cfg, 40, 150, 8, 3, 1);
    const auto rows = fpr_experiment(*h.model, texts, WatermarkKeys{}, cfg, {DetectorKind::duwak}, {0.01, 0.05}, 1);
    for (const auto& r : rows) {
        EXPECT_FALSE(r.pass);
        EXPECT_GT(r.rate, 0.5);
    }
}

TEST(Rating, PromptTemplate) {
    const auto p = rating_prompt("Tell me a story", "Once upon a time");
    EXPECT_EQ(p.rfind("[INST] <<SYS>> You are given a prompt and a response,", 0), 0u);
    EXPECT_NE(p.find("Prompt: Tell me a story\nResponse: Once upon a time\n[/INST] Grade out of 100: "),
              std::string::npos);
    EXPECT_NE(p.find("Grammar and Typing (30 points)"), std::string::npos);
}

TEST(Rating, ParseGrade) {
    EXPECT_EQ(parse_grade("87"), 87);
    EXPECT_EQ(parse_grade("Grade out of 100: 87"), 87);
    EXPECT_EQ(parse_grade("  grade out of 100:92\nDetails..."), 92);
    EXPECT_EQ(parse_grade("100/100"), 100);
    EXPECT_EQ(parse_grade("0"), 0);
    EXPECT_EQ(parse_grade("The response is fine"), std::nullopt);
    EXPECT_EQ(parse_grade("101"), std::nullopt);
    EXPECT_EQ(parse_grade("1234"), std::nullopt);
    EXPECT_EQ(parse_grade(""), std::nullopt);
}

TEST(Rating, BatchWithOneFailure) {
    StubChatClient client([](const std::string& prompt) -> std::string {
        if (prompt.find("BRAVO") != std::string::npos) throw Error(Errc::attack_unavailable, "down");
        if (prompt.find("ALPHA") != std::string::npos) return "Grade out of 100: 70";
        return "55\nGood vocabulary.";
    });
    const auto grades = rate_texts({"p", "p", "p"}, {"ALPHA", "BRAVO", "CHARLIE"}, client, 2);
    ASSERT_EQ(grades.size(), 3u);
    EXPECT_EQ(grades[0], 70);
    EXPECT_EQ(grades[1], std::nullopt);
    EXPECT_EQ(grades[2], 55);
    EXPECT_EQ(client.prompts().size(), 3u);
    EXPECT_THROW(rate_texts({"p"}, {"a", "b"}, client), Error);
}
