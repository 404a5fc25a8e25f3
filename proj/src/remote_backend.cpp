#include "courtsim/remote_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "courtsim/rng.hpp"

namespace courtsim {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw BackendError(BackendError::Kind::transport, "base_url must include a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) out.prefix = url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

RemoteEndpoint endpoint_from_json(const nlohmann::json& j) {
    RemoteEndpoint e;
    e.base_url = j.at("base_url").get<std::string>();
    e.model = j.at("model").get<std::string>();
    e.api_key_env = j.value("api_key_env", std::string{});
    e.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
    e.max_retries = j.value("max_retries", 2);
    e.backoff_initial = std::chrono::milliseconds(j.value("backoff_initial_ms", 500));
    e.backoff_max = std::chrono::milliseconds(j.value("backoff_max_ms", 8000));
    if (e.max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
    return e;
}

nlohmann::json chat_request_body(const RemoteEndpoint& endpoint, const GenerationRequest& request) {
    auto messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    std::string user;
    for (const auto& m : request.messages) {
        if (!user.empty()) user += "\n\n";
        user += m.speaker.empty() ? m.text : m.speaker + ": " + m.text;
    }
    messages.push_back({{"role", "user"}, {"content", user}});
    nlohmann::json body = {{"model", endpoint.model},
                           {"messages", std::move(messages)},
                           {"temperature", request.decoding.temperature},
                           {"top_p", request.decoding.top_p},
                           {"max_tokens", request.decoding.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    return body;
}

std::string extract_completion_text(const nlohmann::json& response) {
    const auto* choices = response.is_object() && response.contains("choices") ? &response.at("choices")
                                                                               : nullptr;
    if (!choices || !choices->is_array() || choices->empty()) {
        throw BackendError(BackendError::Kind::empty, "completion response has no choices");
    }
    const auto& first = choices->at(0);
    if (!first.contains("message") || !first.at("message").contains("content") ||
        !first.at("message").at("content").is_string()) {
        throw BackendError(BackendError::Kind::empty, "completion response has no message content");
    }
    auto text = first.at("message").at("content").get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw BackendError(BackendError::Kind::empty, "completion text is empty");
    }
    return text;
}

std::chrono::milliseconds retry_delay(const RemoteEndpoint& endpoint, const GenerationRequest& request,
                                      int retry) {
    Rng rng(derive_seed(request.seed.value_or(0) ^ content_hash(request), static_cast<std::uint64_t>(retry)));
    const double base = static_cast<double>(endpoint.backoff_initial.count()) *
                        static_cast<double>(1ULL << std::min(retry - 1, 20));
    const double jittered = base * (1.0 + 0.5 * rng.uniform());
    const double capped = std::min(jittered, static_cast<double>(endpoint.backoff_max.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

std::string remote_generate(const RemoteEndpoint& endpoint, const GenerationRequest& request) {
    const auto url = split_url(endpoint.base_url);
    const std::string path = url.prefix + "/chat/completions";
    const std::string body = chat_request_body(endpoint, request).dump();

    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
        const char* key = std::getenv(endpoint.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw BackendError(BackendError::Kind::transport,
                               "credential environment variable " + endpoint.api_key_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const int attempts = endpoint.max_retries + 1;
    std::string last_error;
    BackendError::Kind last_kind = BackendError::Kind::transport;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) std::this_thread::sleep_for(retry_delay(endpoint, request, attempt - 1));

        httplib::Client client(url.origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            const auto elapsed = std::chrono::steady_clock::now() - started;
            if (elapsed >= endpoint.timeout) {
                last_kind = BackendError::Kind::timeout;
                last_error = "request timed out after " + std::to_string(endpoint.timeout.count()) + " ms";
            } else {
                last_kind = BackendError::Kind::transport;
                last_error = "transport failure: " + httplib::to_string(res.error());
            }
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_kind = BackendError::Kind::status;
            last_error = "endpoint returned status " + std::to_string(res->status);
            if (retryable_status(res->status)) continue;
            throw BackendError(last_kind, last_error, attempt);
        }
        auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) {
            throw BackendError(BackendError::Kind::empty, "completion response is not JSON", attempt);
        }
        try {
            return extract_completion_text(doc);
        } catch (const BackendError& e) {
            throw BackendError(e.kind(), e.what(), attempt);
        }
    }
    // Exhausted retries are a transport failure unless the last attempt timed out.
    if (last_kind != BackendError::Kind::timeout) last_kind = BackendError::Kind::transport;
    throw BackendError(last_kind, last_error + " (after " + std::to_string(attempts) + " attempts)", attempts);
}

}  // namespace courtsim
