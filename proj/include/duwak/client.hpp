#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace duwak {

// One prompt in, one completion out. Used for paraphrase/translation attacks and
// quality rating. Wire format in docs/CLIENT.md.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Throws Errc::attack_unavailable on transport or protocol failure.
    virtual std::string complete(const std::string& prompt) const = 0;
};

struct ChatClientConfig {
    std::string endpoint;                      // full URL of the chat-completions route
    std::string token_env = "DUWAK_CHAT_TOKEN";  // name of the variable holding the bearer token
    std::string model = "gpt-3.5-turbo";
    double timeout_seconds = 60.0;
    double temperature = 0.0;

    // Reads DUWAK_CHAT_URL, DUWAK_CHAT_MODEL, DUWAK_CHAT_TIMEOUT and
    // DUWAK_CHAT_TOKEN_ENV. nullopt when DUWAK_CHAT_URL is unset.
    static std::optional<ChatClientConfig> from_env();
};

class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(ChatClientConfig config);
    std::string complete(const std::string& prompt) const override;

private:
    ChatClientConfig config_;
};

// Canned responses for tests: either a fixed reply or a function of the prompt.
// Prompts are recorded in call order.
class StubChatClient final : public ChatClient {
public:
    explicit StubChatClient(std::string reply);
    explicit StubChatClient(std::function<std::string(const std::string&)> responder);

    std::string complete(const std::string& prompt) const override;
    std::vector<std::string> prompts() const;

private:
    std::function<std::string(const std::string&)> responder_;
    mutable std::mutex mutex_;
    mutable std::vector<std::string> prompts_;
};

}  // namespace duwak
