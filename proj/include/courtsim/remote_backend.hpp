#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "courtsim/agent_runtime.hpp"

namespace courtsim {

/// Chat-completion endpoint. The credential is read from the environment
/// variable named by `api_key_env` at request time and never stored.
struct RemoteEndpoint {
    std::string base_url;  // e.g. "https://api.example.com/v1"
    std::string model;
    std::string api_key_env;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 2;
    std::chrono::milliseconds backoff_initial{500};
    std::chrono::milliseconds backoff_max{8000};
};

RemoteEndpoint endpoint_from_json(const nlohmann::json& j);

/// JSON body sent for a request: {model, messages, temperature, top_p, max_tokens}.
nlohmann::json chat_request_body(const RemoteEndpoint& endpoint, const GenerationRequest& request);

/// Text of the first choice's message content. Throws BackendError(empty) if absent or blank.
std::string extract_completion_text(const nlohmann::json& response);

/// Delay before retry number `retry` (1-based): exponential with jitter drawn
/// from the request seed, capped at backoff_max.
std::chrono::milliseconds retry_delay(const RemoteEndpoint& endpoint, const GenerationRequest& request,
                                      int retry);

/// POSTs to <base_url>/chat/completions, retrying transport failures, 429 and
/// 5xx responses up to `max_retries` times.
std::string remote_generate(const RemoteEndpoint& endpoint, const GenerationRequest& request);

class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string generate(const GenerationRequest& request) override {
        return remote_generate(endpoint_, request);
    }
    const RemoteEndpoint& endpoint() const noexcept { return endpoint_; }

private:
    RemoteEndpoint endpoint_;
};

}  // namespace courtsim
