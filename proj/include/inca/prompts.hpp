#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "inca/errors.hpp"

namespace inca {

using TagList = std::vector<std::string>;

struct TagExample {
    std::string query;
    std::string tags;
};

// Few-shot block shipped with the tag prompt by default (intent-classification
// flavor); per-dataset configs may replace or clear it.
inline std::vector<TagExample> default_tag_examples() {
    return {
        {"Should I wear a coat today?", "weather advice, inquiry, clothing, temperature, coat, wear"},
        {"Book a table for two at a popular Italian restaurant downtown?",
         "dining reservation, Italian cuisine, booking, restaurant, table, request"},
        {"How can I send money to a foreign bank account using the app?",
         "international money transfer, send money, app, foreign bank, digital transfer"},
    };
}

inline std::string render_tag_prompt(const std::string& query,
                                     const std::vector<TagExample>& few_shot) {
    if (query.empty()) throw Error(Errc::EmptyInput, "render_tag_prompt: empty query");
    std::string prompt =
        "Generate descriptive tags for the following queries. Focus on user intention, "
        "relevant entities, and keywords. Extend these tags to related, unmentioned terms "
        "that are contextually relevant.\n"
        "\n"
        "Guidelines:\n"
        "Topic: Identify user intention or subject area the query pertains to.\n"
        "Entity Recognition: Focus on recognizable entities common in similar queries.\n"
        "Keywords: Extract specific terms or verbs that define the query's intent.\n"
        "Related Tags: Include tags that are related to user intention, even if not directly "
        "mentioned, to provide broader contextual understanding.\n";
    if (!few_shot.empty()) {
        prompt += "\nExamples:\n";
        for (const auto& ex : few_shot)
            prompt += "Query: \"" + ex.query + "\"\nTags: " + ex.tags + "\n\n";
    } else {
        prompt += "\n";
    }
    prompt += "Query: " + query + "\nTags:";
    return prompt;
}

inline std::string render_summary_prompt(const std::vector<std::string>& example_texts,
                                         const std::string& task_word = "intent") {
    if (example_texts.empty()) throw Error(Errc::EmptyInput, "render_summary_prompt: no examples");
    std::string prompt = "Review the following user queries and provide a summary of the " +
                         task_word +
                         ". Keep the summary generic and avoid referencing any named entities "
                         "that appear in the queries.\n"
                         "\n"
                         "Queries:\n";
    for (const auto& q : example_texts) prompt += "- " + q + "\n";
    prompt += "\nSummary:";
    return prompt;
}

struct Candidate {
    std::string class_id;
    std::string name;
    std::string summary;
};

// Candidates must already be in ascending ECL-distance order; the prompt
// preserves that order in both the category list and the summary blocks.
inline std::string render_prediction_prompt(const std::string& query,
                                            const std::vector<Candidate>& candidates,
                                            const std::string& task_word = "intent") {
    if (candidates.empty()) throw Error(Errc::EmptyInput, "render_prediction_prompt: no candidates");
    std::string prompt = "Based on the given query, classify the user's " + task_word +
                         " into one of the following categories: ";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i > 0) prompt += ", ";
        prompt += candidates[i].name;
    }
    prompt += "\n";
    for (const auto& c : candidates) prompt += "\n" + c.name + ":\n" + c.summary + "\n";
    prompt += "\nQuery: " + query + "\nClass:";
    return prompt;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string ascii_lower(std::string s) {
    for (auto& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

// lowercase, trim, collapse runs of whitespace, then map spaces and hyphens
// to underscores. Shared by both sides of the label match.
inline std::string normalize_label(std::string_view s) {
    std::string lowered = ascii_lower(trim(s));
    std::string out;
    out.reserve(lowered.size());
    bool in_space = false;
    for (char c : lowered) {
        if (c == ' ' || c == '\t' || c == '\n') {
            in_space = !out.empty();
            continue;
        }
        if (in_space) {
            out.push_back('_');
            in_space = false;
        }
        out.push_back(c == '-' ? '_' : c);
    }
    return out;
}

} // namespace detail

// Split on commas and newlines, trim, lowercase, drop empties, dedup keeping
// first occurrence, cap the list length. Garbage in, empty list out.
inline TagList parse_tags(std::string_view llm_output, std::size_t cap = 32) {
    TagList tags;
    std::size_t start = 0;
    auto flush = [&](std::string_view piece) {
        if (tags.size() >= cap) return;
        std::string tag = detail::ascii_lower(detail::trim(piece));
        if (tag.empty()) return;
        if (std::find(tags.begin(), tags.end(), tag) != tags.end()) return;
        tags.push_back(std::move(tag));
    };
    for (std::size_t i = 0; i < llm_output.size(); ++i) {
        if (llm_output[i] == ',' || llm_output[i] == '\n') {
            flush(llm_output.substr(start, i - start));
            start = i + 1;
        }
    }
    flush(llm_output.substr(start));
    return tags;
}

enum class MatchOutcome { Exact, Substring, NoMatch };

struct LabelMatch {
    MatchOutcome outcome = MatchOutcome::NoMatch;
    std::string class_id; // set unless outcome == NoMatch
};

// Maps raw LLM output back onto one of the candidates, or NoMatch. NoMatch is
// a value; the evaluation layer counts it as an incorrect prediction.
inline LabelMatch parse_label(std::string_view llm_output, const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw Error(Errc::EmptyInput, "parse_label: no candidates");

    std::string_view answer = llm_output;
    const auto marker = llm_output.rfind("Class:");
    if (marker != std::string_view::npos) answer = llm_output.substr(marker + 6);
    const auto eol = answer.find('\n');
    if (eol != std::string_view::npos) answer = answer.substr(0, eol);

    const std::string normalized_answer = detail::normalize_label(answer);
    for (const auto& c : candidates)
        if (detail::normalize_label(c.name) == normalized_answer)
            return {MatchOutcome::Exact, c.class_id};

    const std::string normalized_full = detail::normalize_label(llm_output);
    const Candidate* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& c : candidates) {
        const std::string n = detail::normalize_label(c.name);
        if (n.empty() || n.size() < best_len) continue;
        if (normalized_full.find(n) == std::string::npos) continue;
        if (n.size() > best_len) {
            best = &c;
            best_len = n.size();
        }
    }
    if (best) return {MatchOutcome::Substring, best->class_id};
    return {MatchOutcome::NoMatch, {}};
}

} // namespace inca
