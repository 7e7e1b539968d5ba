#include <sstream>

#ifdef EXPERTGEN_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "expertgen/errors.hpp"
#include "expertgen/providers.hpp"

namespace expertgen {

using nlohmann::json;

namespace {

json messages_to_json(const std::vector<ChatMessage>& messages,
                      const std::optional<std::string>& system) {
    json out = json::array();
    if (system.has_value()) {
        out.push_back({{"role", "system"}, {"content", *system}});
    }
    for (const auto& m : messages) {
        out.push_back({{"role", m.role}, {"content", m.content}});
    }
    return out;
}

ProviderUsage usage_from(const json& body) {
    ProviderUsage usage;
    if (body.contains("usage") && body["usage"].is_object()) {
        const auto& u = body["usage"];
        if (u.contains("prompt_tokens")) usage.prompt_tokens = u["prompt_tokens"].get<std::size_t>();
        if (u.contains("completion_tokens")) {
            usage.completion_tokens = u["completion_tokens"].get<std::size_t>();
        }
    }
    return usage;
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
    if (options_.base_url.empty()) {
        throw ConfigurationError("http provider requires a base_url");
    }
    if (options_.reward_url.empty()) options_.reward_url = options_.base_url;
}

std::string HttpProvider::post_json(const std::string& url_base, const std::string& path,
                                    const std::string& body) const {
#ifndef EXPERTGEN_WITH_TLS
    if (url_base.rfind("https://", 0) == 0) {
        throw ConfigurationError("built without TLS support; use an http:// endpoint");
    }
#endif
    httplib::Client client(url_base);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }
    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
        std::ostringstream msg;
        msg << "transport failure POST " << url_base << path << ": "
            << httplib::to_string(result.error());
        throw ProviderError(msg.str());
    }
    if (result->status < 200 || result->status >= 300) {
        std::ostringstream msg;
        msg << "HTTP " << result->status << " from " << url_base << path << ": "
            << result->body.substr(0, 512);
        throw ProviderError(msg.str());
    }
    return result->body;
}

std::vector<std::string> HttpProvider::chat(const ChatRequest& request, ProviderUsage& usage) {
    json payload = {
        {"model", options_.chat_model},
        {"messages", messages_to_json(request.messages, request.system)},
        {"temperature", request.temperature},
        {"n", request.n_samples},
        {"max_tokens", request.max_tokens},
    };
    const std::string raw = post_json(options_.base_url, "/v1/chat/completions", payload.dump());
    json body = json::parse(raw, nullptr, false);
    if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array()) {
        throw ProviderError("chat: malformed provider payload");
    }
    std::vector<std::string> samples;
    for (const auto& choice : body["choices"]) {
        if (!choice.contains("message") || !choice["message"].contains("content")) {
            throw ProviderError("chat: choice without message content");
        }
        samples.push_back(choice["message"]["content"].get<std::string>());
    }
    usage = usage_from(body);
    return samples;
}

double HttpProvider::score(const RewardRequest& request, ProviderUsage& usage) {
    json payload = {
        {"model", options_.reward_model},
        {"messages", messages_to_json(request.transcript, std::nullopt)},
    };
    const std::string raw = post_json(options_.reward_url, "/v1/score", payload.dump());
    json body = json::parse(raw, nullptr, false);
    if (body.is_discarded() || !body.contains("score") || !body["score"].is_number()) {
        throw ProviderError("score: malformed provider payload, expected {\"score\": <number>}");
    }
    usage = usage_from(body);
    return body["score"].get<double>();
}

std::vector<std::vector<double>> HttpProvider::embed(const std::vector<std::string>& texts,
                                                     ProviderUsage& usage) {
    json payload = {
        {"model", options_.embedding_model},
        {"input", texts},
    };
    const std::string raw = post_json(options_.base_url, "/v1/embeddings", payload.dump());
    json body = json::parse(raw, nullptr, false);
    if (body.is_discarded() || !body.contains("data") || !body["data"].is_array()) {
        throw ProviderError("embed: malformed provider payload");
    }
    std::vector<std::vector<double>> vectors;
    for (const auto& item : body["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array()) {
            throw ProviderError("embed: data item without embedding array");
        }
        vectors.push_back(item["embedding"].get<std::vector<double>>());
    }
    usage = usage_from(body);
    return vectors;
}

}  // namespace expertgen
