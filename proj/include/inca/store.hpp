#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "inca/ecl.hpp"
#include "inca/errors.hpp"
#include "inca/pipeline.hpp"

namespace inca {

inline constexpr std::string_view kStateFormatVersion = "inca-state/1";

inline nlohmann::json config_to_json(const InCAConfig& c) {
    nlohmann::json j;
    j["k"] = c.k;
    j["long_context_mode"] = c.long_context_mode;
    j["prediction_max_tokens"] = c.prediction_max_tokens;
    j["sampler_seed"] = c.sampler_seed;
    j["skip_llm_when_k1"] = c.skip_llm_when_k1;
    j["summary_max_tokens"] = c.summary_max_tokens;
    j["summary_sample_size"] = c.summary_sample_size;
    j["tag_few_shot"] = nlohmann::json::array();
    for (const auto& ex : c.tag_few_shot)
        j["tag_few_shot"].push_back({{"query", ex.query}, {"tags", ex.tags}});
    j["tag_max_tokens"] = c.tag_max_tokens;
    j["task_word"] = c.task_word;
    return j;
}

inline InCAConfig config_from_json(const nlohmann::json& j) {
    InCAConfig c;
    c.k = j.at("k").get<std::size_t>();
    c.long_context_mode = j.at("long_context_mode").get<bool>();
    c.prediction_max_tokens = j.at("prediction_max_tokens").get<std::size_t>();
    c.sampler_seed = j.at("sampler_seed").get<std::uint64_t>();
    c.skip_llm_when_k1 = j.at("skip_llm_when_k1").get<bool>();
    c.summary_max_tokens = j.at("summary_max_tokens").get<std::size_t>();
    c.summary_sample_size = j.at("summary_sample_size").get<std::size_t>();
    c.tag_few_shot.clear();
    for (const auto& ex : j.at("tag_few_shot"))
        c.tag_few_shot.push_back({ex.at("query").get<std::string>(), ex.at("tags").get<std::string>()});
    c.tag_max_tokens = j.at("tag_max_tokens").get<std::size_t>();
    c.task_word = j.at("task_word").get<std::string>();
    return c;
}

// Atomic text write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::IoFailure, "cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(Errc::IoFailure, "write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::IoFailure, "rename to " + path.string() + " failed: " + ec.message());
}

// Everything the learner keeps across sessions: per-class means and
// summaries, the shared covariance, the embedder identity and the config.
// No training example text. Keys serialize alphabetically and floats with
// round-trip-exact text, so decode -> re-encode is byte-identical.
inline nlohmann::json state_to_json(const InCASystem& system) {
    const auto& reg = system.registry();
    nlohmann::json doc;
    doc["format_version"] = std::string(kStateFormatVersion);
    doc["embedder"] = {{"dimension", reg.dimension()},
                       {"identity", system.embedder().identity()}};
    doc["config"] = config_to_json(system.config());
    doc["classes"] = nlohmann::json::array();
    for (const auto& p : reg.profiles())
        doc["classes"].push_back({{"id", p.class_id},
                                  {"insertion_index", p.insertion_index},
                                  {"mean", p.mean},
                                  {"name", p.name},
                                  {"summary", p.summary},
                                  {"tag_count", p.tag_count}});
    const auto& cov = reg.shared();
    doc["covariance"] = {{"classes_folded", cov.classes_folded()},
                         {"epsilon_abs", cov.epsilon_abs()},
                         {"epsilon_rel", cov.epsilon_rel()},
                         {"matrix", cov.matrix().data()}};
    return doc;
}

inline void save_state(const InCASystem& system, const std::filesystem::path& path) {
    write_file_atomic(path, state_to_json(system).dump());
}

struct LoadedState {
    InCAConfig config;
    std::string embedder_identity;
    std::size_t dimension = 0;
    EclRegistry registry{1};
};

// expected_h / expected_identity, when nonzero / nonempty, must match the
// document (SchemaMismatch otherwise). Structural damage is IntegrityFailure.
inline LoadedState load_state(const std::filesystem::path& path, std::size_t expected_h = 0,
                              const std::string& expected_identity = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    auto doc = nlohmann::json::parse(raw, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw Error(Errc::IntegrityFailure, path.string() + " is not a complete JSON document");

    try {
        const auto version = doc.at("format_version").get<std::string>();
        if (version != kStateFormatVersion)
            throw Error(Errc::SchemaMismatch, "unknown format_version '" + version + "'");

        LoadedState state;
        state.dimension = doc.at("embedder").at("dimension").get<std::size_t>();
        state.embedder_identity = doc.at("embedder").at("identity").get<std::string>();
        if (state.dimension < 1)
            throw Error(Errc::IntegrityFailure, "embedder dimension must be >= 1");
        if (expected_h != 0 && state.dimension != expected_h)
            throw Error(Errc::SchemaMismatch,
                        "state has h=" + std::to_string(state.dimension) + ", expected h=" +
                            std::to_string(expected_h));
        if (!expected_identity.empty() && state.embedder_identity != expected_identity)
            throw Error(Errc::SchemaMismatch, "state was built with embedder '" +
                                                  state.embedder_identity + "', got '" +
                                                  expected_identity + "'");
        state.config = config_from_json(doc.at("config"));

        const std::size_t h = state.dimension;
        const auto& cov_json = doc.at("covariance");
        const auto flat = cov_json.at("matrix").get<std::vector<double>>();
        if (flat.size() != h * h)
            throw Error(Errc::IntegrityFailure, "covariance matrix has " + std::to_string(flat.size()) +
                                                    " entries, expected " + std::to_string(h * h));
        Mat matrix(h, h);
        matrix.data() = flat;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = i + 1; j < h; ++j)
                if (std::abs(matrix(i, j) - matrix(j, i)) > 1e-12)
                    throw Error(Errc::IntegrityFailure, "covariance matrix is not symmetric");
        auto shared = SharedCovariance::from_parts(std::move(matrix),
                                                   cov_json.at("classes_folded").get<std::size_t>(),
                                                   cov_json.at("epsilon_abs").get<double>(),
                                                   cov_json.at("epsilon_rel").get<double>());

        std::vector<ClassProfile> profiles;
        for (const auto& c : doc.at("classes")) {
            ClassProfile p;
            p.class_id = c.at("id").get<std::string>();
            p.name = c.at("name").get<std::string>();
            p.mean = c.at("mean").get<Vec>();
            p.tag_count = c.at("tag_count").get<std::size_t>();
            p.insertion_index = c.at("insertion_index").get<std::size_t>();
            p.summary = c.at("summary").get<std::string>();
            profiles.push_back(std::move(p));
        }
        state.registry = EclRegistry::restore(h, std::move(profiles), std::move(shared));
        return state;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::IntegrityFailure, "state document malformed: " + std::string(e.what()));
    }
}

} // namespace inca
