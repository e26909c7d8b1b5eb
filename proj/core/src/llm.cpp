#include "dsr/llm.hpp"

#include "dsr/errors.hpp"

#include "json.hpp"
#include "httplib.h"

#include <chrono>
#include <cstdlib>
#include <thread>

namespace dsr {

using nlohmann::json;

HttpLlmClient::HttpLlmClient(LlmEndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
        throw ConfigError("generation endpoint base_url is empty");
}

std::string HttpLlmClient::complete(const Prompt& prompt, const LlmOptions& opts) {
    json body;
    body["system"] = prompt.system;
    body["user"] = prompt.user;
    body["temperature"] = opts.temperature;
    body["max_tokens"] = opts.max_tokens;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));

        httplib::Client client(config_.base_url);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        if (!config_.auth_token_env.empty()) {
            if (const char* token = std::getenv(config_.auth_token_env.c_str()))
                client.set_bearer_token_auth(token);
        }

        auto res = client.Post("/generate", payload, "application/json");
        if (!res) {
            last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            if (res->status >= 400 && res->status < 500 && res->status != 429) break;
            continue;
        }

        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string())
            throw ContractError("generation endpoint returned malformed JSON");
        return reply["text"].get<std::string>();
    }
    throw TransportError("generation endpoint " + config_.base_url +
                         " unreachable after retries: " + last_error);
}

} // namespace dsr
