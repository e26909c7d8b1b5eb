#pragma once

#include <string>

namespace dsr {

/// A chat-style prompt: fixed system text plus per-request user text.
struct Prompt {
    std::string system;
    std::string user;

    std::size_t bytes() const noexcept { return system.size() + user.size(); }
};

struct LlmOptions {
    double temperature = 0.0;
    int max_tokens = 1024;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;

    /// Sends one prompt and returns the raw completion text.
    virtual std::string complete(const Prompt& prompt, const LlmOptions& opts) = 0;
};

struct LlmEndpointConfig {
    std::string base_url;
    double timeout_seconds = 120.0;
    int retries = 2;
    std::string auth_token_env; // env var holding the bearer token, optional
};

/// Client for the generation wire protocol:
///   POST /generate {"system":...,"user":...,"temperature":...,"max_tokens":N}
///   -> {"text":...}
/// Network failures after retries become TransportError; a reply without
/// "text" is a ContractError.
class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(LlmEndpointConfig config);

    std::string complete(const Prompt& prompt, const LlmOptions& opts) override;

private:
    LlmEndpointConfig config_;
};

} // namespace dsr
