#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "duwak/core.hpp"
#include "support.hpp"

using namespace duwak;
using testing_support::Gen;

TEST(Softmax, AllZeroIsUniform) {
    const std::vector<double> l(4, 0.0);
    for (double p : softmax(l)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, ConstantIsUniform) {
    for (double c : {-700.0, -3.5, 0.0, 12.0, 900.0}) {
        const std::vector<double> l(7, c);
        for (double p : softmax(l)) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
    }
}

TEST(Softmax, LogsOfOneToFour) {
    const std::vector<double> l{std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0)};
    const auto p = softmax(l);
    const double want[] = {0.1, 0.2, 0.3, 0.4};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(p[i], want[i], 1e-15);
}

TEST(Softmax, NonFiniteThrows) {
    for (double bad : {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::quiet_NaN()}) {
        const std::vector<double> l{0.0, bad};
        try {
            softmax(l);
            FAIL() << "expected invalid_logits";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::invalid_logits);
        }
    }
}

TEST(SoftmaxProperty, SumsToOneAndKeepsArgmax) {
    Gen g(101);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto l = g.logits(1 + g.index(64), g.uniform(0.1, 50.0));
        const auto p = softmax(l);
        double s = 0;
        for (double x : p) s += x;
        ASSERT_NEAR(s, 1.0, 1e-9) << "trial " << trial;
        ASSERT_EQ(argmax(p), argmax(l)) << "trial " << trial;
    }
}

TEST(SoftmaxProperty, ShiftInvariant) {
    Gen g(202);
    for (int trial = 0; trial < 2000; ++trial) {
        auto l = g.logits(2 + g.index(40));
        const double c = g.uniform(-300, 300);
        auto shifted = l;
        for (double& x : shifted) x += c;
        const auto a = softmax(l), b = softmax(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12) << "trial " << trial;
    }
}

TEST(Tokenize, EmptyText) { EXPECT_TRUE(tokenize("", Vocabulary::builtin(300)).empty()); }

TEST(Tokenize, InVocabRoundTrip) {
    const auto v = Vocabulary::builtin(300);
    const std::string text = "the man had that it is not a good day , they know .";
    const auto seq = tokenize(text, v);
    for (TokenId t : seq.tokens) EXPECT_NE(t, Vocabulary::unk_id);
    EXPECT_EQ(detokenize(seq.tokens, v), text);
}

TEST(Tokenize, PunctuationIsItsOwnToken) {
    const auto v = Vocabulary::builtin(300);
    const auto seq = tokenize("the day, the year.", v);
    ASSERT_EQ(seq.size(), 6u);
    EXPECT_EQ(v.token(seq.tokens[2]), ",");
    EXPECT_EQ(v.token(seq.tokens[5]), ".");
}

TEST(Tokenize, OovBecomesUnk) {
    const auto v = Vocabulary::builtin(300);
    const auto seq = tokenize("the zzyzx day", v);
    ASSERT_EQ(seq.size(), 3u);
    EXPECT_EQ(seq.tokens[1], Vocabulary::unk_id);
    EXPECT_NE(seq.tokens[0], Vocabulary::unk_id);
    EXPECT_EQ(detokenize(seq.tokens, v), "the <unk> day");
}

TEST(Tokenize, MockCorpusRoundTrip) {
    const auto& h = testing_support::default_mock();
    const Vocabulary& v = *h.vocab;
    Gen g(7);
    for (int line = 0; line < 200; ++line) {
        std::vector<TokenId> ids = g.tokens(1 + g.index(60), v.size());
        for (auto& t : ids) {
            if (t == Vocabulary::unk_id) t = 1;
        }
        const auto text = detokenize(ids, v);
        ASSERT_EQ(tokenize(text, v).tokens, ids) << text;
        ASSERT_EQ(detokenize(tokenize(text, v).tokens, v), text);
    }
}

TEST(Vocabulary, BuiltinShape) {
    const auto v = Vocabulary::builtin(1000);
    EXPECT_EQ(v.size(), 1000u);
    EXPECT_EQ(v.token(0), "<unk>");
    EXPECT_EQ(v.id("<unk>"), Vocabulary::unk_id);
    for (const auto& r : builtin_contractions()) {
        EXPECT_TRUE(v.contains(r.first) && v.contains(r.second) && v.contains(r.merged)) << r.merged;
    }
    EXPECT_EQ(Vocabulary::builtin(1000).entries(), v.entries());
}

TEST(Vocabulary, RejectsBadEntries) {
    EXPECT_THROW(Vocabulary({"a", "b"}), Error);
    EXPECT_THROW(Vocabulary({"<unk>", "a", "a"}), Error);
    EXPECT_THROW(Vocabulary({"<unk>", ""}), Error);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
    const auto v = Vocabulary::builtin(250);
    const auto path = (std::filesystem::temp_directory_path() / "duwak_vocab_test.txt").string();
    v.save(path);
    EXPECT_EQ(Vocabulary::load(path).entries(), v.entries());
    std::filesystem::remove(path);
}

TEST(Vocabulary, OutOfRangeIdThrows) {
    const auto v = Vocabulary::builtin(10);
    EXPECT_THROW(v.token(10), Error);
}

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(DuwakConfig{}.validate()); }

TEST(Config, RejectsOutOfRange) {
    auto bad = [](auto mutate) {
        DuwakConfig c;
        mutate(c);
        try {
            c.validate();
        } catch (const Error& e) {
            return e.code() == Errc::invalid_configuration;
        }
        return false;
    };
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.gamma = 0.0; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.gamma = 1.0; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.delta = -0.1; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.eta = 1.5; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.alpha = -1; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.k = 0; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.L = 0; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.h = 0; }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.M = 0; }));
    // 1/(M+1) must not exceed the operating threshold.
    EXPECT_TRUE(bad([](DuwakConfig& c) {
        c.M = 49;
        c.p_threshold = 0.01;
    }));
    EXPECT_TRUE(bad([](DuwakConfig& c) { c.max_inspect = 0; }));
}
