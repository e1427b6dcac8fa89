#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inca/chat.hpp"
#include "inca/ecl.hpp"
#include "inca/embedder.hpp"
#include "inca/embedding_cache.hpp"
#include "inca/errors.hpp"
#include "inca/log.hpp"
#include "inca/prompts.hpp"
#include "inca/rng.hpp"

namespace inca {

struct InCAConfig {
    std::size_t k = 3;
    std::size_t summary_sample_size = 20;
    std::size_t summary_max_tokens = 256;
    std::size_t tag_max_tokens = 64;
    std::size_t prediction_max_tokens = 16;
    bool long_context_mode = false;
    bool skip_llm_when_k1 = false;
    std::string task_word = "intent";
    std::vector<TagExample> tag_few_shot = default_tag_examples();
    std::uint64_t sampler_seed = 0;
};

// Full trace of one prediction. In long-context mode `candidates` lists every
// class in insertion order and the distances are not meaningful (left at 0).
struct Prediction {
    std::optional<ClassId> predicted;
    MatchOutcome outcome = MatchOutcome::NoMatch;
    std::vector<ScoredClass> candidates;
    TagList tags;
    std::string prompt;
    std::string raw_output;
};

// Learn one class at a time (tags -> embeddings -> covariance fold ->
// summary) and predict by routing each query to its top-k classes before the
// in-context prompt. No training example text survives learn_class.
class InCASystem {
public:
    InCASystem(std::shared_ptr<Embedder> embedder, std::shared_ptr<EmbeddingCache> cache,
               std::shared_ptr<ChatClient> tagger, std::shared_ptr<ChatClient> predictor,
               InCAConfig config = {}, double epsilon_abs = 1e-10, double epsilon_rel = 1e-4)
        : registry_(embedder->dimension(), epsilon_abs, epsilon_rel),
          embedder_(std::move(embedder)), cache_(std::move(cache)), tagger_(std::move(tagger)),
          predictor_(std::move(predictor)), config_(std::move(config)) {
        validate_config();
    }

    // Restore path: adopt a registry rebuilt by the store.
    InCASystem(EclRegistry registry, std::shared_ptr<Embedder> embedder,
               std::shared_ptr<EmbeddingCache> cache, std::shared_ptr<ChatClient> tagger,
               std::shared_ptr<ChatClient> predictor, InCAConfig config)
        : registry_(std::move(registry)), embedder_(std::move(embedder)), cache_(std::move(cache)),
          tagger_(std::move(tagger)), predictor_(std::move(predictor)), config_(std::move(config)) {
        if (registry_.dimension() != embedder_->dimension())
            throw Error(Errc::SchemaMismatch, "registry dimension does not match embedder dimension");
        validate_config();
    }

    const EclRegistry& registry() const { return registry_; }
    const InCAConfig& config() const { return config_; }
    Embedder& embedder() { return *embedder_; }
    const Embedder& embedder() const { return *embedder_; }

    void set_k(std::size_t k) {
        if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
        config_.k = k;
    }

    const ClassProfile& learn_class(const std::string& name, const std::vector<std::string>& examples) {
        if (examples.empty()) throw Error(Errc::EmptyInput, "learn_class: no examples for '" + name + "'");

        std::vector<std::string> pooled_tags;
        for (const auto& example : examples) {
            auto tags = tags_for_text(example);
            pooled_tags.insert(pooled_tags.end(), tags.begin(), tags.end());
        }
        auto embeddings = embed(pooled_tags);
        const auto& profile = registry_.finalize_class(name, name, embeddings);

        // Summary from a seeded per-class sample; the examples themselves are
        // not retained anywhere past this call.
        Rng rng(config_.sampler_seed ^ detail::fnv1a64(name));
        auto picks = sample_indices(examples.size(),
                                    std::min(config_.summary_sample_size, examples.size()), rng);
        std::vector<std::string> sampled;
        sampled.reserve(picks.size());
        for (auto i : picks) sampled.push_back(examples[i]);
        const std::string prompt = render_summary_prompt(sampled, config_.task_word);
        const std::string summary =
            tagger_->complete(prompt, {0.0, config_.summary_max_tokens});
        registry_.profile_at(profile.insertion_index).summary = inca::detail::trim(summary);
        return registry_.profile_at(profile.insertion_index);
    }

    // Tag generation plus embedding for one query; shared by predict and the
    // evaluation harness so both see identical vectors.
    std::pair<TagList, std::vector<Vec>> tags_and_embeddings(const std::string& text) {
        auto tags = tags_for_text(text);
        auto vectors = embed(tags);
        return {std::move(tags), std::move(vectors)};
    }

    Prediction predict(const std::string& text) {
        if (registry_.empty()) throw Error(Errc::NoClasses, "predict: no classes learned");
        auto [tags, vectors] = tags_and_embeddings(text);
        auto scores = registry_.score_instance(vectors);
        return predict_from_scores(text, std::move(tags), scores);
    }

    // Prediction step on precomputed scores (ascending distance order).
    Prediction predict_from_scores(const std::string& text, TagList tags,
                                   const std::vector<ScoredClass>& scores) {
        Prediction result;
        result.tags = std::move(tags);
        const std::size_t n = std::min(config_.k, scores.size());
        result.candidates.assign(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(n));

        if (config_.skip_llm_when_k1 && config_.k == 1) {
            result.predicted = result.candidates.front().class_id;
            result.outcome = MatchOutcome::Exact;
            return result;
        }

        std::vector<Candidate> candidates;
        candidates.reserve(n);
        for (const auto& s : result.candidates) {
            const ClassProfile* p = registry_.find(s.class_id);
            candidates.push_back({p->class_id, p->name, p->summary});
        }
        finish_with_llm(result, text, candidates);
        return result;
    }

    // Long-context mode: every class summary goes into one prompt,
    // no Mahalanobis scoring. Oversized prompts surface TokenLimitExceeded.
    Prediction predict_long_context(const std::string& text) {
        if (registry_.empty()) throw Error(Errc::NoClasses, "predict: no classes learned");
        return predict_long_context_from_tags(text, tags_for_text(text));
    }

    Prediction predict_long_context_from_tags(const std::string& text, TagList tags) {
        if (registry_.empty()) throw Error(Errc::NoClasses, "predict: no classes learned");
        Prediction result;
        result.tags = std::move(tags);
        std::vector<Candidate> candidates;
        candidates.reserve(registry_.size());
        for (const auto& p : registry_.profiles()) {
            result.candidates.push_back({p.class_id, 0.0});
            candidates.push_back({p.class_id, p.name, p.summary});
        }
        finish_with_llm(result, text, candidates);
        return result;
    }

private:
    void validate_config() const {
        if (config_.k < 1) throw Error(Errc::InvalidArgument, "config.k must be >= 1");
        if (config_.summary_sample_size < 1)
            throw Error(Errc::InvalidArgument, "config.summary_sample_size must be >= 1");
    }

    TagList tags_for_text(const std::string& text) {
        const std::string prompt = render_tag_prompt(text, config_.tag_few_shot);
        const std::string output = tagger_->complete(prompt, {0.0, config_.tag_max_tokens});
        TagList tags = parse_tags(output);
        if (tags.empty()) {
            log_warning("tag generation returned nothing for '" + text +
                        "'; embedding the raw text as a single pseudo-tag");
            tags.push_back(text);
        }
        return tags;
    }

    std::vector<Vec> embed(const std::vector<std::string>& texts) {
        if (cache_) return cache_->embed(*embedder_, texts);
        return embedder_->embed_batch(texts);
    }

    void finish_with_llm(Prediction& result, const std::string& text,
                         const std::vector<Candidate>& candidates) {
        result.prompt = render_prediction_prompt(text, candidates, config_.task_word);
        result.raw_output = predictor_->complete(result.prompt, {0.0, config_.prediction_max_tokens});
        const LabelMatch match = parse_label(result.raw_output, candidates);
        result.outcome = match.outcome;
        if (match.outcome != MatchOutcome::NoMatch) result.predicted = match.class_id;
    }

    EclRegistry registry_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<EmbeddingCache> cache_;
    std::shared_ptr<ChatClient> tagger_;
    std::shared_ptr<ChatClient> predictor_;
    InCAConfig config_;
};

} // namespace inca
