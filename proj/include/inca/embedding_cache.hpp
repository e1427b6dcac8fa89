#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "inca/embedder.hpp"
#include "inca/errors.hpp"
#include "inca/log.hpp"

namespace inca {

// Exact-text embedding cache keyed by (embedder identity, text). Optionally
// backed by an append-only JSONL file: one {"identity","text","vector"}
// object per line. Hits are bit-identical to the stored vectors; any I/O
// trouble degrades to pass-through with a warning instead of failing the run.
class EmbeddingCache {
public:
    EmbeddingCache() = default;

    explicit EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
        std::error_code ec;
        if (std::filesystem::exists(*file_, ec)) load_file();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return map_.size();
    }

    // embed_batch semantics; the backend sees only the misses, in order.
    std::vector<Vec> embed(Embedder& embedder, const std::vector<std::string>& texts) {
        if (texts.empty()) throw Error(Errc::EmptyInput, "cached embed: no texts");
        const std::string id = embedder.identity();

        std::vector<Vec> out(texts.size());
        std::vector<std::size_t> miss_positions;
        {
            std::lock_guard lock(mu_);
            for (std::size_t i = 0; i < texts.size(); ++i) {
                auto it = map_.find(key(id, texts[i]));
                if (it != map_.end())
                    out[i] = it->second;
                else
                    miss_positions.push_back(i);
            }
        }
        if (miss_positions.empty()) return out;

        // One backend request per distinct missing text, so repeats inside a
        // batch cannot come back with different vectors.
        std::vector<std::string> misses;
        std::unordered_map<std::string, std::size_t> miss_index;
        for (auto i : miss_positions)
            if (miss_index.emplace(texts[i], misses.size()).second) misses.push_back(texts[i]);
        auto fresh = embedder.embed_batch(misses);

        std::lock_guard lock(mu_);
        for (auto i : miss_positions) out[i] = fresh[miss_index.at(texts[i])];
        for (std::size_t m = 0; m < misses.size(); ++m) {
            auto [it, inserted] = map_.emplace(key(id, misses[m]), fresh[m]);
            if (inserted) append_record(id, misses[m], fresh[m]);
        }
        return out;
    }

private:
    static std::string key(const std::string& identity, const std::string& text) {
        std::string k = identity;
        k.push_back('\0');
        k += text;
        return k;
    }

    void load_file() {
        std::ifstream in(*file_);
        if (!in) {
            log_warning("embedding cache: cannot read " + file_->string() + "; starting empty");
            return;
        }
        std::string line;
        std::size_t lineno = 0, bad = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto doc = nlohmann::json::parse(line, nullptr, false);
            if (doc.is_discarded() || !doc.contains("identity") || !doc.contains("text") ||
                !doc.contains("vector") || !doc["vector"].is_array()) {
                ++bad;
                continue;
            }
            Vec v = doc["vector"].get<Vec>();
            map_[key(doc["identity"].get<std::string>(), doc["text"].get<std::string>())] = std::move(v);
        }
        if (bad > 0)
            log_warning("embedding cache: skipped " + std::to_string(bad) + " malformed line(s) in " +
                        file_->string());
    }

    void append_record(const std::string& identity, const std::string& text, const Vec& v) {
        if (!file_ || !persist_ok_) return;
        std::ofstream out(*file_, std::ios::app);
        if (!out) {
            persist_ok_ = false;
            log_warning("embedding cache: cannot append to " + file_->string() +
                        "; continuing without persistence");
            return;
        }
        nlohmann::json rec;
        rec["identity"] = identity;
        rec["text"] = text;
        rec["vector"] = v;
        out << rec.dump() << '\n';
        if (!out) {
            persist_ok_ = false;
            log_warning("embedding cache: write to " + file_->string() +
                        " failed; continuing without persistence");
        }
    }

    mutable std::mutex mu_;
    std::unordered_map<std::string, Vec> map_;
    std::optional<std::filesystem::path> file_;
    bool persist_ok_ = true;
};

} // namespace inca
