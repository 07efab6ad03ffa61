#include <httplib.h>

#include <cstdlib>
#include <json.hpp>

#include "duwak/client.hpp"
#include "duwak/core.hpp"
#include "http_util.hpp"

namespace duwak {

using nlohmann::json;

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

}  // namespace

std::optional<ChatClientConfig> ChatClientConfig::from_env() {
    auto url = env("DUWAK_CHAT_URL");
    if (!url) return std::nullopt;
    ChatClientConfig c;
    c.endpoint = *url;
    if (auto m = env("DUWAK_CHAT_MODEL")) c.model = *m;
    if (auto t = env("DUWAK_CHAT_TIMEOUT")) c.timeout_seconds = std::stod(*t);
    if (auto n = env("DUWAK_CHAT_TOKEN_ENV")) c.token_env = *n;
    return c;
}

HttpChatClient::HttpChatClient(ChatClientConfig config) : config_(std::move(config)) {
    detail::split_url(config_.endpoint);
}

std::string HttpChatClient::complete(const std::string& prompt) const {
    const auto url = detail::split_url(config_.endpoint);
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (auto token = env(config_.token_env.c_str())) headers.emplace("Authorization", "Bearer " + *token);

    const json body = {
        {"model", config_.model},
        {"temperature", config_.temperature},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
    };
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw Error(Errc::attack_unavailable, "chat endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        throw Error(Errc::attack_unavailable, "chat endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
        const auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::attack_unavailable, std::string("malformed chat reply: ") + e.what());
    }
}

StubChatClient::StubChatClient(std::string reply)
    : responder_([reply = std::move(reply)](const std::string&) { return reply; }) {}

StubChatClient::StubChatClient(std::function<std::string(const std::string&)> responder)
    : responder_(std::move(responder)) {}

std::string StubChatClient::complete(const std::string& prompt) const {
    {
        std::lock_guard lock(mutex_);
        prompts_.push_back(prompt);
    }
    return responder_(prompt);
}

std::vector<std::string> StubChatClient::prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
}

}  // namespace duwak
