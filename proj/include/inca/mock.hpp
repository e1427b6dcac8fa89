#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "inca/chat.hpp"
#include "inca/embedder.hpp"
#include "inca/errors.hpp"
#include "inca/prompts.hpp"

namespace inca {

// Fixed deterministic tag function used by the mock LLM: lowercased words of
// the text plus adjacent-word bigrams, comma-joined.
inline std::string mock_tags_for(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2) words.push_back(cur);
        cur.clear();
    };
    for (char c : text) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
            cur.push_back(c);
        else if (c >= 'A' && c <= 'Z')
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        else
            flush();
    }
    flush();
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ", ";
        out += w;
    }
    for (std::size_t i = 0; i + 1 < words.size(); ++i) out += ", " + words[i] + " " + words[i + 1];
    return out;
}

namespace detail {

inline std::string last_query_line(std::string_view prompt) {
    const auto pos = prompt.rfind("Query: ");
    if (pos == std::string_view::npos) return {};
    auto rest = prompt.substr(pos + 7);
    const auto eol = rest.find('\n');
    if (eol != std::string_view::npos) rest = rest.substr(0, eol);
    return std::string(rest);
}

} // namespace detail

// Deterministic stand-in for the chat backend. Routes on the prompt kind:
// tag prompts get the fixed tag function (or the query itself in echo mode),
// summary prompts get the first bulleted query, prediction prompts get an
// oracle lookup against a side table of true labels, falling back to the
// first candidate when the truth is absent or unknown.
class MockLLM final : public ChatClient {
public:
    struct Options {
        std::size_t context_window = 0;
        bool echo_query_as_tag = false;
        std::unordered_map<std::string, std::string> truth; // query text -> true label name
    };

    MockLLM() = default;
    explicit MockLLM(Options options) : options_(std::move(options)) {}

    std::string identity() const override { return "mock-llm"; }
    std::size_t max_context_tokens() const override { return options_.context_window; }

    Options& options() { return options_; }

    std::size_t tag_calls() const { return tag_calls_; }
    std::size_t summary_calls() const { return summary_calls_; }
    std::size_t prediction_calls() const { return prediction_calls_; }

protected:
    std::string do_complete(const std::string& prompt, const ChatParams&) override {
        if (prompt.rfind("Generate descriptive tags", 0) == 0) {
            ++tag_calls_;
            const std::string query = detail::last_query_line(prompt);
            return options_.echo_query_as_tag ? query : mock_tags_for(query);
        }
        if (prompt.rfind("Review the following user queries", 0) == 0) {
            ++summary_calls_;
            const auto pos = prompt.find("\n- ");
            if (pos == std::string::npos) return "A summary of the sampled queries.";
            auto rest = std::string_view(prompt).substr(pos + 3);
            const auto eol = rest.find('\n');
            if (eol != std::string_view::npos) rest = rest.substr(0, eol);
            return std::string(rest);
        }
        if (prompt.rfind("Based on the given query", 0) == 0) {
            ++prediction_calls_;
            const auto cat = prompt.find("categories: ");
            std::vector<std::string> names;
            if (cat != std::string::npos) {
                auto list = std::string_view(prompt).substr(cat + 12);
                const auto eol = list.find('\n');
                if (eol != std::string_view::npos) list = list.substr(0, eol);
                std::size_t start = 0;
                for (;;) {
                    const auto sep = list.find(", ", start);
                    const auto piece = list.substr(start, sep == std::string_view::npos
                                                               ? std::string_view::npos
                                                               : sep - start);
                    if (!piece.empty()) names.emplace_back(piece);
                    if (sep == std::string_view::npos) break;
                    start = sep + 2;
                }
            }
            if (names.empty()) return "none";
            const std::string query = detail::last_query_line(prompt);
            auto it = options_.truth.find(query);
            if (it != options_.truth.end())
                for (const auto& n : names)
                    if (n == it->second) return n;
            return names.front();
        }
        return "ok";
    }

private:
    Options options_;
    std::atomic<std::size_t> tag_calls_{0};
    std::atomic<std::size_t> summary_calls_{0};
    std::atomic<std::size_t> prediction_calls_{0};
};

// Embedder backed by a fixed text -> vector table; unknown texts are an
// error so fixture gaps surface immediately.
class FixtureEmbedder final : public Embedder {
public:
    FixtureEmbedder(std::size_t dimension, std::string identity)
        : h_(dimension), identity_(std::move(identity)) {}

    void set(const std::string& text, Vec v) { table_[text] = std::move(v); }
    bool has(const std::string& text) const { return table_.count(text) > 0; }

    std::size_t dimension() const override { return h_; }
    std::string identity() const override { return identity_; }

protected:
    std::vector<Vec> do_embed_batch(const std::vector<std::string>& texts) override {
        std::vector<Vec> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            auto it = table_.find(t);
            if (it == table_.end())
                throw Error(Errc::BackendUnavailable, "fixture embedder has no vector for '" + t + "'");
            out.push_back(it->second);
        }
        return out;
    }

private:
    std::size_t h_;
    std::string identity_;
    std::unordered_map<std::string, Vec> table_;
};

// Counting decorators for call-accounting assertions.
class CountingEmbedder final : public Embedder {
public:
    explicit CountingEmbedder(std::shared_ptr<Embedder> inner) : inner_(std::move(inner)) {}

    std::size_t calls() const { return calls_; }
    std::size_t texts_seen() const { return texts_seen_; }

    std::size_t dimension() const override { return inner_->dimension(); }
    std::string identity() const override { return inner_->identity(); }

protected:
    std::vector<Vec> do_embed_batch(const std::vector<std::string>& texts) override {
        ++calls_;
        texts_seen_ += texts.size();
        return inner_->embed_batch(texts);
    }

private:
    std::shared_ptr<Embedder> inner_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> texts_seen_{0};
};

class ScriptedChat final : public ChatClient {
public:
    explicit ScriptedChat(std::string response, std::size_t context_window = 0)
        : response_(std::move(response)), window_(context_window) {}

    std::string identity() const override { return "scripted-chat"; }
    std::size_t max_context_tokens() const override { return window_; }
    std::size_t calls() const { return calls_; }

protected:
    std::string do_complete(const std::string&, const ChatParams&) override {
        ++calls_;
        return response_;
    }

private:
    std::string response_;
    std::size_t window_;
    std::atomic<std::size_t> calls_{0};
};

} // namespace inca
