#include <httplib.h>

#include <cmath>
#include <json.hpp>

#include "duwak/lm.hpp"
#include "http_util.hpp"

namespace duwak {

using nlohmann::json;

HttpModel::HttpModel(std::string base_url, std::shared_ptr<const Vocabulary> vocab, std::size_t dim,
                     double timeout_seconds)
    : base_url_(std::move(base_url)), vocab_(std::move(vocab)), dim_(dim), timeout_seconds_(timeout_seconds) {
    if (!vocab_) throw Error(Errc::invalid_argument, "HTTP model needs a vocabulary");
    detail::split_url(base_url_);
}

HttpModel::~HttpModel() = default;

std::string HttpModel::post(const std::string& path, const std::string& body) const {
    const auto url = detail::split_url(base_url_);
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(timeout_seconds_);
    const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    auto res = client.Post(detail::join_path(url.path, path), body, "application/json");
    if (!res) {
        throw Error(Errc::io_error, "logit provider unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(Errc::io_error, "logit provider returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

std::vector<double> HttpModel::next_logits(std::span<const TokenId> context) const {
    json req = {{"context", std::vector<TokenId>(context.begin(), context.end())}};
    auto reply = json::parse(post("/logits", req.dump()));
    auto logits = reply.at("logits").get<std::vector<double>>();
    if (logits.size() != vocab_->size()) {
        throw Error(Errc::invalid_logits, "logit provider returned " + std::to_string(logits.size()) +
                                              " logits for a vocabulary of " + std::to_string(vocab_->size()));
    }
    return logits;
}

std::span<const double> HttpModel::hidden(TokenId token) const {
    {
        std::lock_guard lock(mutex_);
        auto it = hidden_cache_.find(token);
        if (it != hidden_cache_.end()) return *it->second;
    }
    json req = {{"token", token}};
    auto reply = json::parse(post("/hidden", req.dump()));
    auto v = std::make_unique<std::vector<double>>(reply.at("hidden").get<std::vector<double>>());
    if (v->size() != dim_) throw Error(Errc::invalid_argument, "hidden state has wrong dimension");
    double norm = 0.0;
    for (double x : *v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : *v) x /= norm;
    }
    std::lock_guard lock(mutex_);
    auto [it, inserted] = hidden_cache_.emplace(token, std::move(v));
    return *it->second;
}

}  // namespace duwak
