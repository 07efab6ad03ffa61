#include <gtest/gtest.h>

#include <httplib.h>

#include <cmath>
#include <json.hpp>
#include <thread>

#include "duwak/bench.hpp"
#include "duwak/lm.hpp"
#include "support.hpp"

using namespace duwak;
using testing_support::Gen;

namespace {

std::shared_ptr<MockLM> mock(double temperature = 1.0, std::size_t dim = 64) {
    return std::make_shared<MockLM>(42, std::make_shared<Vocabulary>(Vocabulary::builtin(1000)), dim, temperature);
}

}  // namespace

TEST(MockLM, PureFunctionOfContext) {
    const auto m = mock();
    const std::vector<TokenId> ctx{5, 17, 300};
    const auto first = m->next_logits(ctx);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(m->next_logits(ctx), first);
    // A second instance with the same seed agrees bit for bit.
    EXPECT_EQ(mock()->next_logits(ctx), first);
    for (TokenId t = 0; t < 1000; t += 37) {
        const auto a = m->hidden(t), b = mock()->hidden(t);
        EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    }
}

TEST(MockLM, UnitNorms) {
    const auto m = mock();
    for (TokenId t = 0; t < m->vocab_size(); ++t) ASSERT_NEAR(dot(m->hidden(t), m->hidden(t)), 1.0, 1e-9);
}

TEST(MockLM, EntropyFloorAtTemperatureOne) {
    const auto m = mock();
    Gen g(3);
    double total = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto ctx = g.tokens(1 + g.index(10), m->vocab_size());
        total += shannon_entropy(softmax(m->next_logits(ctx)));
    }
    EXPECT_GE(total / 1000, 2.0);
}

TEST(MockLM, HighTemperatureApproachesUniform) {
    const auto m = mock(1e6);
    const std::vector<TokenId> ctx{1, 2, 3};
    const auto p = softmax(m->next_logits(ctx));
    double tv = 0;
    for (double x : p) tv += std::abs(x - 1.0 / p.size());
    EXPECT_LT(tv / 2, 0.01);
}

TEST(MockLM, LastTokenChangesLogits) {
    const auto m = mock();
    const std::vector<TokenId> a{10, 20, 30}, b{10, 20, 31};
    const auto la = m->next_logits(a), lb = m->next_logits(b);
    double linf = 0;
    for (std::size_t i = 0; i < la.size(); ++i) linf = std::max(linf, std::abs(la[i] - lb[i]));
    EXPECT_GT(linf, 0.0);
}

TEST(MockLM, NearIsotropic) {
    for (std::size_t dim : {32u, 64u}) {
        const auto m = mock(1.0, dim);
        double sum = 0;
        std::size_t n = 0;
        for (TokenId a = 0; a < 400; ++a) {
            for (TokenId b = a + 1; b < 400; ++b, ++n) sum += cosine(*m, a, b);
        }
        EXPECT_LT(std::abs(sum / n), 0.05) << "dim " << dim;
    }
}

TEST(MockLM, RejectsBadParameters) {
    auto v = std::make_shared<Vocabulary>(Vocabulary::builtin(50));
    EXPECT_THROW(MockLM(1, v, 4, 1.0), Error);
    EXPECT_THROW(MockLM(1, v, 16, 0.0), Error);
    EXPECT_THROW(MockLM(1, v, 16, -1.0), Error);
    EXPECT_THROW(MockLM(1, nullptr, 16, 1.0), Error);
}

TEST(MockLM, SeedsDiffer) {
    auto v = std::make_shared<Vocabulary>(Vocabulary::builtin(200));
    const MockLM a(1, v, 16, 1.0), b(2, v, 16, 1.0);
    const std::vector<TokenId> ctx{4};
    EXPECT_NE(a.next_logits(ctx), b.next_logits(ctx));
}

TEST(UniformAndPeaked, Shapes) {
    const auto base = mock();
    const UniformModel u(base);
    const std::vector<TokenId> ctx{3};
    for (double l : u.next_logits(ctx)) EXPECT_EQ(l, 0.0);
    const PeakedModel p(base, 60.0);
    const auto probs = softmax(p.next_logits(ctx));
    std::vector<double> sorted = probs;
    std::sort(sorted.rbegin(), sorted.rend());
    EXPECT_EQ(sorted[0], 1.0);
    EXPECT_LT(sorted[1], 1e-20);
}

TEST(SpikeEntropy, ZeroZIsOne) {
    Gen g(8);
    for (int i = 0; i < 200; ++i) EXPECT_NEAR(spike_entropy(g.probs(1 + g.index(50)), 0.0), 1.0, 1e-12);
}

TEST(SpikeEntropy, UniformClosedForm) {
    for (std::size_t N : {1u, 2u, 10u, 1000u}) {
        const std::vector<double> p(N, 1.0 / N);
        for (double z : {0.5, 1.0, 4.0, 30.0}) EXPECT_NEAR(spike_entropy(p, z), 1.0 / (1.0 + z / N), 1e-12);
    }
}

TEST(SpikeEntropy, OneHotClosedForm) {
    std::vector<double> p(20, 0.0);
    p[7] = 1.0;
    for (double z : {0.0, 0.3, 2.0, 11.0}) EXPECT_NEAR(spike_entropy(p, z), 1.0 / (1.0 + z), 1e-15);
}

TEST(SpikeEntropyProperty, InUnitIntervalAndMonotoneInZ) {
    Gen g(21);
    for (int i = 0; i < 1000; ++i) {
        const auto p = g.probs(1 + g.index(100));
        double prev = 2.0;
        for (double z = 0; z <= 50; z += 0.5) {
            const double s = spike_entropy(p, z);
            ASSERT_GT(s, 0.0);
            ASSERT_LE(s, 1.0 + 1e-12);
            ASSERT_LE(s, prev + 1e-15);
            prev = s;
        }
    }
}

TEST(ShannonEntropy, Basics) {
    const std::vector<double> u(8, 0.125);
    EXPECT_NEAR(shannon_entropy(u), std::log(8.0), 1e-14);
    const std::vector<double> one{0.0, 1.0, 0.0};
    EXPECT_EQ(shannon_entropy(one), 0.0);
}

namespace {

// In-process logit provider backed by a mock, speaking the adapter protocol.
struct ProviderServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    int logit_calls = 0, hidden_calls = 0;

    explicit ProviderServer(const LanguageModel& model, bool broken = false) {
        server.Post("/logits", [&, broken](const httplib::Request& req, httplib::Response& res) {
            ++logit_calls;
            if (broken) {
                res.status = 500;
                return;
            }
            const auto j = nlohmann::json::parse(req.body);
            const auto ctx = j.at("context").get<std::vector<TokenId>>();
            res.set_content(nlohmann::json{{"logits", model.next_logits(ctx)}}.dump(), "application/json");
        });
        server.Post("/hidden", [&](const httplib::Request& req, httplib::Response& res) {
            ++hidden_calls;
            const auto t = nlohmann::json::parse(req.body).at("token").get<TokenId>();
            const auto h = model.hidden(t);
            std::vector<double> scaled(h.begin(), h.end());
            for (double& x : scaled) x *= 3.0;  // provider need not normalise
            res.set_content(nlohmann::json{{"hidden", scaled}}.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~ProviderServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST(HttpModel, MatchesProvider) {
    const auto m = mock(1.0, 16);
    ProviderServer srv(*m);
    HttpModel remote(srv.url(), m->vocab_ptr(), 16, 5.0);
    const std::vector<TokenId> ctx{9, 8, 7};
    EXPECT_EQ(remote.next_logits(ctx), m->next_logits(ctx));
    for (TokenId t : {0u, 5u, 999u}) {
        const auto a = remote.hidden(t), b = m->hidden(t);
        for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
    }
    remote.hidden(5);
    EXPECT_EQ(srv.hidden_calls, 3);  // cached after first use
}

TEST(HttpModel, GenerationThroughAdapterMatchesLocal) {
    const auto m = mock(1.0, 16);
    ProviderServer srv(*m);
    HttpModel remote(srv.url(), m->vocab_ptr(), 16, 5.0);
    const std::vector<TokenId> prompt{100, 200};
    const DuwakConfig cfg;
    const auto a = generate(remote, prompt, Scheme::DUWAK, WatermarkKeys{}, cfg, 12, 3);
    const auto b = generate(*m, prompt, Scheme::DUWAK, WatermarkKeys{}, cfg, 12, 3);
    EXPECT_EQ(a.tokens.tokens, b.tokens.tokens);
}

TEST(HttpModel, ServerErrorSurfaces) {
    const auto m = mock(1.0, 16);
    ProviderServer srv(*m, true);
    HttpModel remote(srv.url(), m->vocab_ptr(), 16, 5.0);
    const std::vector<TokenId> ctx{1};
    try {
        remote.next_logits(ctx);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::io_error);
    }
}

TEST(HttpModel, UnreachableSurfaces) {
    const auto m = mock(1.0, 16);
    HttpModel remote("http://127.0.0.1:1", m->vocab_ptr(), 16, 1.0);
    const std::vector<TokenId> ctx{1};
    EXPECT_THROW(remote.next_logits(ctx), Error);
}
