#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "inca/errors.hpp"
#include "inca/linalg.hpp"
#include "inca/rng.hpp"

namespace inca {

// Text-to-vector backend. The non-virtual embed_batch enforces the contract
// (no empty input, one finite h-vector per text, in order) around whatever
// the implementation does.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual std::size_t dimension() const = 0;
    virtual std::string identity() const = 0;

    std::vector<Vec> embed_batch(const std::vector<std::string>& texts) {
        if (texts.empty()) throw Error(Errc::EmptyInput, "embed_batch: no texts");
        for (const auto& t : texts)
            if (t.empty()) throw Error(Errc::EmptyInput, "embed_batch: empty string in batch");
        auto out = do_embed_batch(texts);
        if (out.size() != texts.size())
            throw Error(Errc::BackendUnavailable, "embedder returned " + std::to_string(out.size()) +
                                                      " vectors for " + std::to_string(texts.size()) + " texts");
        for (const auto& v : out) {
            if (v.size() != dimension())
                throw Error(Errc::BackendUnavailable, "embedder returned vector of wrong dimension");
            for (double x : v)
                if (!std::isfinite(x))
                    throw Error(Errc::BackendUnavailable, "embedder returned non-finite component");
        }
        return out;
    }

protected:
    virtual std::vector<Vec> do_embed_batch(const std::vector<std::string>& texts) = 0;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// Unit-norm vector from seeded hash expansion of the text's character
// 3-grams. Texts sharing 3-grams land closer in cosine than disjoint ones,
// which is all the synthetic pipelines need from an embedding model.
inline Vec deterministic_embed(std::uint64_t seed, std::string_view text, std::size_t h) {
    if (text.empty()) throw Error(Errc::EmptyInput, "deterministic_embed: empty text");
    if (h < 2) throw Error(Errc::InvalidArgument, "deterministic_embed: h must be >= 2");

    Vec acc(h, 0.0);
    auto add_gram = [&](std::string_view gram) {
        std::uint64_t state = detail::fnv1a64(gram) ^ (seed * 0x9e3779b97f4a7c15ULL);
        for (std::size_t c = 0; c < h; ++c) {
            const std::uint64_t bits = splitmix64(state);
            acc[c] += 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
        }
    };
    if (text.size() < 3) {
        add_gram(text);
    } else {
        for (std::size_t i = 0; i + 3 <= text.size(); ++i) add_gram(text.substr(i, 3));
    }
    const double n = norm(acc);
    if (n == 0.0) {
        acc.assign(h, 0.0);
        acc[0] = 1.0;
        return acc;
    }
    for (auto& v : acc) v /= n;
    return acc;
}

// Test double for the sentence encoder: pure function of (seed, text, h).
class DeterministicEmbedder final : public Embedder {
public:
    explicit DeterministicEmbedder(std::uint64_t seed = 7, std::size_t h = 64)
        : seed_(seed), h_(h) {
        if (h < 2) throw Error(Errc::InvalidArgument, "DeterministicEmbedder: h must be >= 2");
    }

    std::size_t dimension() const override { return h_; }
    std::string identity() const override {
        return "detngram3:seed=" + std::to_string(seed_) + ":h=" + std::to_string(h_);
    }

    std::uint64_t seed() const { return seed_; }

    // Parses an identity string produced by identity(), or returns false.
    static bool parse_identity(std::string_view id, std::uint64_t& seed, std::size_t& h) {
        constexpr std::string_view prefix = "detngram3:seed=";
        if (id.substr(0, prefix.size()) != prefix) return false;
        const auto rest = id.substr(prefix.size());
        const auto sep = rest.find(":h=");
        if (sep == std::string_view::npos) return false;
        try {
            seed = std::stoull(std::string(rest.substr(0, sep)));
            h = std::stoull(std::string(rest.substr(sep + 3)));
        } catch (const std::exception&) {
            return false;
        }
        return h >= 2;
    }

protected:
    std::vector<Vec> do_embed_batch(const std::vector<std::string>& texts) override {
        std::vector<Vec> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(deterministic_embed(seed_, t, h_));
        return out;
    }

private:
    std::uint64_t seed_;
    std::size_t h_;
};

} // namespace inca
