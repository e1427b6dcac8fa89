#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "inca/chat.hpp"
#include "inca/embedder.hpp"
#include "inca/errors.hpp"
#include "inca/net_guard.hpp"

namespace inca {

// Remote backend configuration. Endpoints are full URLs; the API key, when
// set, is sent as a bearer token.
struct HttpConfig {
    std::string endpoint;
    std::string model;
    std::string api_key;
    int attempts = 3;
    int backoff_ms = 250;
    std::size_t context_window = 0; // chat only; 0 = undeclared
    int read_timeout_s = 120;
};

namespace detail {

inline bool split_url(const std::string& url, std::string& base, std::string& path) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) return false;
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        base = url;
        path = "/";
    } else {
        base = url.substr(0, slash);
        path = url.substr(slash);
    }
    return true;
}

inline nlohmann::json post_json_with_retries(const HttpConfig& cfg, const nlohmann::json& body,
                                             const std::string& what) {
    net::check_allowed(what);
    std::string base, path;
    if (!split_url(cfg.endpoint, base, path))
        throw Error(Errc::InvalidArgument, what + ": endpoint '" + cfg.endpoint + "' is not a URL");

    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt < cfg.attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms << (attempt - 1)));
        httplib::Client client(base);
        client.set_read_timeout(cfg.read_timeout_s, 0);
        client.set_connection_timeout(10, 0);
        httplib::Headers headers;
        if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) {
            last_failure = "response body is not JSON";
            continue;
        }
        return doc;
    }
    throw Error(Errc::BackendUnavailable, what + " failed after " + std::to_string(cfg.attempts) +
                                              " attempts (" + last_failure + ")");
}

} // namespace detail

// POST {"model", "input": [texts]} -> {"data": [{"embedding": [...]}, ...]},
// the de-facto embeddings endpoint schema.
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(HttpConfig config, std::size_t known_dimension = 0)
        : config_(std::move(config)), dim_(known_dimension) {}

    std::size_t dimension() const override {
        if (dim_ == 0) {
            auto probe = const_cast<HttpEmbedder*>(this)->fetch({"dimension probe"});
            dim_ = probe.at(0).size();
        }
        return dim_;
    }

    std::string identity() const override { return "http:" + config_.model + "@" + config_.endpoint; }

protected:
    std::vector<Vec> do_embed_batch(const std::vector<std::string>& texts) override {
        auto out = fetch(texts);
        if (dim_ == 0 && !out.empty()) dim_ = out.front().size();
        return out;
    }

private:
    std::vector<Vec> fetch(const std::vector<std::string>& texts) {
        nlohmann::json body;
        body["model"] = config_.model;
        body["input"] = texts;
        auto doc = detail::post_json_with_retries(config_, body, "embeddings request");
        if (!doc.contains("data") || !doc["data"].is_array())
            throw Error(Errc::BackendUnavailable, "embeddings response has no data array");
        std::vector<Vec> out;
        out.reserve(doc["data"].size());
        for (const auto& item : doc["data"]) {
            if (!item.contains("embedding") || !item["embedding"].is_array())
                throw Error(Errc::BackendUnavailable, "embeddings response item has no embedding");
            out.push_back(item["embedding"].get<Vec>());
        }
        return out;
    }

    HttpConfig config_;
    mutable std::size_t dim_;
};

// POST the de-facto chat-completions schema and return
// choices[0].message.content.
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(HttpConfig config) : config_(std::move(config)) {}

    std::string identity() const override { return "http:" + config_.model + "@" + config_.endpoint; }
    std::size_t max_context_tokens() const override { return config_.context_window; }

protected:
    std::string do_complete(const std::string& prompt, const ChatParams& params) override {
        nlohmann::json body;
        body["model"] = config_.model;
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
        body["temperature"] = params.temperature;
        body["max_tokens"] = params.max_tokens;
        auto doc = detail::post_json_with_retries(config_, body, "chat completion");
        try {
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::BackendUnavailable, "chat response missing choices[0].message.content");
        }
    }

private:
    HttpConfig config_;
};

} // namespace inca
