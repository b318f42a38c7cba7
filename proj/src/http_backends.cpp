#include "hoplab/http_backends.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hoplab/errors.hpp"

namespace hoplab {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string host; // scheme://host[:port]
    std::string path_prefix;
};

Endpoint split_endpoint(const std::string& endpoint) {
    if (endpoint.empty()) throw ConfigError("model endpoint is empty");
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint needs a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

std::string api_key(const ModelConfig& cfg) {
    if (cfg.api_key_env.empty()) return {};
    const char* v = std::getenv(cfg.api_key_env.c_str());
    return v ? std::string(v) : std::string();
}

BackendErrorKind classify_status(int status) {
    if (status == 401 || status == 403) return BackendErrorKind::auth;
    if (status == 429) return BackendErrorKind::rate_limit;
    if (status >= 500) return BackendErrorKind::transport;
    return BackendErrorKind::protocol;
}

json post_json(const std::string& endpoint, const std::string& path,
               const httplib::Headers& headers, const json& body) {
    const Endpoint ep = split_endpoint(endpoint);
    httplib::Client client(ep.host);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    auto res = client.Post(ep.path_prefix + path, headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError(BackendErrorKind::transport,
                           "transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError(classify_status(res->status),
                           "HTTP " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 200));
    }
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw BackendError(BackendErrorKind::protocol,
                           std::string("unparseable response: ") + e.what());
    }
}

} // namespace

Completion OpenAiChatBackend::complete(const ModelConfig& cfg,
                                       const std::vector<Message>& messages, const CallTag&) {
    json req{{"model", cfg.model_id},
             {"temperature", cfg.temperature},
             {"max_tokens", cfg.max_output_tokens}};
    auto& msgs = req["messages"] = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});

    httplib::Headers headers;
    const std::string key = api_key(cfg);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    const auto t0 = std::chrono::steady_clock::now();
    json res = post_json(cfg.endpoint, "/chat/completions", headers, req);
    const auto t1 = std::chrono::steady_clock::now();

    Completion c;
    try {
        const auto& choice = res.at("choices").at(0);
        if (!choice.at("message").at("content").is_null()) {
            c.text = choice.at("message").at("content").get<std::string>();
        }
        c.truncated = choice.value("finish_reason", std::string()) == "length";
        const auto& usage = res.at("usage");
        c.input_tokens = usage.value("prompt_tokens", 0LL);
        c.output_tokens = usage.value("completion_tokens", 0LL);
        if (usage.contains("completion_tokens_details")) {
            c.reasoning_tokens =
                usage["completion_tokens_details"].value("reasoning_tokens", 0LL);
        }
    } catch (const json::exception& e) {
        throw BackendError(BackendErrorKind::protocol,
                           std::string("unexpected response shape: ") + e.what());
    }
    c.latency_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0).count();
    return c;
}

Completion AnthropicChatBackend::complete(const ModelConfig& cfg,
                                          const std::vector<Message>& messages, const CallTag&) {
    json req{{"model", cfg.model_id},
             {"temperature", cfg.temperature},
             {"max_tokens", cfg.max_output_tokens}};
    auto& msgs = req["messages"] = json::array();
    for (const auto& m : messages) {
        if (m.role == "system") {
            req["system"] = m.content;
        } else {
            msgs.push_back({{"role", m.role}, {"content", m.content}});
        }
    }

    httplib::Headers headers{{"anthropic-version", "2023-06-01"}};
    const std::string key = api_key(cfg);
    if (!key.empty()) headers.emplace("x-api-key", key);

    const auto t0 = std::chrono::steady_clock::now();
    json res = post_json(cfg.endpoint, "/v1/messages", headers, req);
    const auto t1 = std::chrono::steady_clock::now();

    Completion c;
    try {
        for (const auto& block : res.at("content")) {
            if (block.value("type", std::string()) == "text") {
                c.text += block.value("text", std::string());
            }
        }
        c.truncated = res.value("stop_reason", std::string()) == "max_tokens";
        const auto& usage = res.at("usage");
        c.input_tokens = usage.value("input_tokens", 0LL);
        c.output_tokens = usage.value("output_tokens", 0LL);
    } catch (const json::exception& e) {
        throw BackendError(BackendErrorKind::protocol,
                           std::string("unexpected response shape: ") + e.what());
    }
    c.latency_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0).count();
    return c;
}

std::vector<EmbeddingVector> OpenAiEmbeddingBackend::embed(const ModelConfig& cfg,
                                                           const std::vector<std::string>& texts) {
    json req{{"model", cfg.model_id}, {"input", texts}};
    httplib::Headers headers;
    const std::string key = api_key(cfg);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    json res;
    try {
        res = post_json(cfg.endpoint, "/embeddings", headers, req);
    } catch (const BackendError& e) {
        throw GatewayError(std::string("embedding request failed: ") + e.what());
    }

    std::vector<EmbeddingVector> out;
    try {
        const auto& data = res.at("data");
        out.reserve(data.size());
        for (const auto& item : data) {
            const auto vec = item.at("embedding").get<std::vector<float>>();
            out.push_back(Eigen::Map<const EmbeddingVector>(vec.data(),
                                                            static_cast<long>(vec.size())));
        }
    } catch (const json::exception& e) {
        throw GatewayError(std::string("unexpected embedding response: ") + e.what());
    }
    return out;
}

} // namespace hoplab
