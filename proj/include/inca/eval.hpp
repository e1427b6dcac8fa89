#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "inca/embedder.hpp"
#include "inca/embedding_cache.hpp"
#include "inca/errors.hpp"
#include "inca/pipeline.hpp"
#include "inca/rng.hpp"
#include "inca/store.hpp"

namespace inca {

struct DatasetRecord {
    std::string text;
    std::string label;
    std::string split = "train"; // train | validation | test
};

struct Dataset {
    std::vector<DatasetRecord> records;

    std::vector<const DatasetRecord*> split(std::string_view which) const {
        std::vector<const DatasetRecord*> out;
        for (const auto& r : records)
            if (r.split == which) out.push_back(&r);
        return out;
    }

    std::vector<std::string> labels(std::string_view which) const {
        std::vector<std::string> out;
        for (const auto& r : records)
            if (r.split == which && std::find(out.begin(), out.end(), r.label) == out.end())
                out.push_back(r.label);
        return out;
    }
};

// Line-delimited JSON, one {"text","label"[,"split"]} object per line.
// Malformed lines are rejected with their line number.
inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw Error(Errc::ParseFailure,
                        path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
        if (!doc.contains("text") || !doc["text"].is_string())
            throw Error(Errc::ParseFailure,
                        path.string() + ":" + std::to_string(lineno) + ": missing string field \"text\"");
        if (!doc.contains("label") || !doc["label"].is_string())
            throw Error(Errc::ParseFailure,
                        path.string() + ":" + std::to_string(lineno) + ": missing string field \"label\"");
        DatasetRecord rec;
        rec.text = doc["text"].get<std::string>();
        rec.label = doc["label"].get<std::string>();
        if (rec.text.empty())
            throw Error(Errc::ParseFailure, path.string() + ":" + std::to_string(lineno) + ": empty text");
        if (rec.label.empty())
            throw Error(Errc::ParseFailure, path.string() + ":" + std::to_string(lineno) + ": empty label");
        if (doc.contains("split")) {
            if (!doc["split"].is_string())
                throw Error(Errc::ParseFailure,
                            path.string() + ":" + std::to_string(lineno) + ": \"split\" must be a string");
            rec.split = doc["split"].get<std::string>();
            if (rec.split != "train" && rec.split != "validation" && rec.split != "test")
                throw Error(Errc::ParseFailure, path.string() + ":" + std::to_string(lineno) +
                                                    ": split must be train, validation or test");
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

struct TaskSplit {
    std::vector<std::vector<std::string>> tasks;
    std::uint64_t seed = 0;
};

// Seeded shuffle then contiguous chunks whose sizes differ by at most one.
inline TaskSplit split_tasks(std::vector<std::string> labels, std::size_t num_tasks,
                             std::uint64_t seed) {
    if (num_tasks < 1 || num_tasks > labels.size())
        throw Error(Errc::InvalidArgument, "split_tasks: B must be between 1 and the label count");
    Rng rng(seed);
    shuffle(labels, rng);
    TaskSplit split;
    split.seed = seed;
    const std::size_t base = labels.size() / num_tasks;
    const std::size_t extra = labels.size() % num_tasks;
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < num_tasks; ++t) {
        const std::size_t take = base + (t < extra ? 1 : 0);
        split.tasks.emplace_back(labels.begin() + static_cast<std::ptrdiff_t>(cursor),
                                 labels.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;
    }
    return split;
}

struct ClassCounts {
    std::size_t total = 0;
    std::size_t correct = 0;
};

struct EvalReport {
    double final_accuracy = 0.0;
    std::map<std::size_t, double> recall_at_k;
    std::map<std::string, ClassCounts> per_class;
    std::size_t no_match = 0;
    std::size_t test_count = 0;
    bool partial = false;
    nlohmann::json config_snapshot;
    double wall_seconds = 0.0;
};

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["final_accuracy"] = r.final_accuracy;
    j["no_match"] = r.no_match;
    j["partial"] = r.partial;
    j["recall_at_k"] = nlohmann::json::object();
    for (const auto& [k, v] : r.recall_at_k) j["recall_at_k"][std::to_string(k)] = v;
    j["per_class"] = nlohmann::json::object();
    for (const auto& [label, counts] : r.per_class)
        j["per_class"][label] = {{"correct", counts.correct}, {"total", counts.total}};
    j["test_count"] = r.test_count;
    j["wall_seconds"] = r.wall_seconds;
    j["config"] = r.config_snapshot;
    return j;
}

// Flat CSV, one row per (metric, k): metric,k,value.
inline std::string report_to_csv(const EvalReport& r) {
    std::string csv = "metric,k,value\n";
    csv += "final_accuracy,," + std::to_string(r.final_accuracy) + "\n";
    csv += "no_match,," + std::to_string(r.no_match) + "\n";
    for (const auto& [k, v] : r.recall_at_k)
        csv += "recall," + std::to_string(k) + "," + std::to_string(v) + "\n";
    return csv;
}

struct RunCilOptions {
    std::size_t k_max = 5;
    std::size_t max_in_flight = 1;
    bool long_context = false;
    // Called with partial results if the run aborts mid-evaluation.
    std::function<void(const EvalReport&)> partial_sink;
};

namespace detail {

struct InstanceOutcome {
    std::size_t true_rank = 0; // 1-based rank of the true class, 0 if absent
    bool correct = false;
    bool no_match = false;
    bool done = false;
    std::string label;
};

// Aggregates only completed slots, so a partial flush after a mid-run abort
// under concurrency skips the holes.
inline void fill_metrics(EvalReport& report, const std::vector<InstanceOutcome>& outcomes,
                         std::size_t k_max, std::size_t num_classes) {
    std::size_t correct = 0, evaluated = 0;
    report.per_class.clear();
    report.no_match = 0;
    std::vector<std::size_t> rank_hits(k_max + 1, 0);
    for (const auto& o : outcomes) {
        if (!o.done) continue;
        ++evaluated;
        auto& counts = report.per_class[o.label];
        ++counts.total;
        if (o.correct) {
            ++counts.correct;
            ++correct;
        }
        if (o.no_match) ++report.no_match;
        if (o.true_rank >= 1)
            for (std::size_t k = o.true_rank; k <= k_max; ++k) ++rank_hits[k];
    }
    report.test_count = evaluated;
    report.final_accuracy = evaluated ? static_cast<double>(correct) / evaluated : 0.0;
    report.recall_at_k.clear();
    const std::size_t k_limit = std::min(k_max, num_classes);
    for (std::size_t k = 1; k <= k_limit; ++k)
        report.recall_at_k[k] = evaluated ? static_cast<double>(rank_hits[k]) / evaluated : 0.0;
}

template <typename Fn>
inline void for_each_index(std::size_t count, std::size_t max_in_flight, Fn&& fn) {
    if (max_in_flight <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t n = std::min(max_in_flight, count);
    threads.reserve(n);
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace detail

inline std::size_t rank_of(const std::vector<ScoredClass>& scores, const std::string& label) {
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i].class_id == label) return i + 1;
    return 0;
}

// Class-incremental protocol: learn classes task-by-task (replay-free), then score
// the full test set. Final accuracy comes from the in-context prediction;
// recall@k counts the test instances whose true class the ECL ranks in its
// top k. A NoMatch prediction is simply incorrect.
inline EvalReport run_cil(InCASystem& system, const Dataset& dataset, const TaskSplit& split,
                          const RunCilOptions& options = {}) {
    if (!system.registry().empty())
        throw Error(Errc::InvalidArgument, "run_cil: system already has learned classes");
    const auto started = std::chrono::steady_clock::now();

    std::map<std::string, std::vector<std::string>> by_label;
    for (const auto& r : dataset.records)
        if (r.split == "train") by_label[r.label].push_back(r.text);

    for (const auto& task : split.tasks) {
        std::vector<std::string> ordered(task.begin(), task.end());
        std::sort(ordered.begin(), ordered.end());
        for (const auto& label : ordered) {
            auto it = by_label.find(label);
            if (it == by_label.end())
                throw Error(Errc::InvalidArgument, "task split names label '" + label +
                                                       "' with no training records");
            system.learn_class(label, it->second);
        }
    }

    const auto test = dataset.split("test");
    if (test.empty()) throw Error(Errc::InvalidArgument, "run_cil: dataset has no test records");
    for (const auto* r : test)
        if (!system.registry().find(r->label))
            throw Error(Errc::InvalidArgument, "test label '" + r->label + "' never trained");

    EvalReport report;
    report.config_snapshot = config_to_json(system.config());
    const std::size_t k_max = std::max<std::size_t>(options.k_max, system.config().k);
    system.registry().regularized_precision(); // warm the cache before fan-out

    std::vector<detail::InstanceOutcome> outcomes(test.size());
    auto evaluate_one = [&](std::size_t i) {
        const DatasetRecord& rec = *test[i];
        detail::InstanceOutcome out;
        out.label = rec.label;
        auto [tags, vectors] = system.tags_and_embeddings(rec.text);
        auto scores = system.registry().score_instance(vectors);
        out.true_rank = rank_of(scores, rec.label);
        Prediction pred =
            options.long_context
                ? system.predict_long_context_from_tags(rec.text, std::move(tags))
                : system.predict_from_scores(rec.text, std::move(tags), scores);
        out.no_match = pred.outcome == MatchOutcome::NoMatch;
        out.correct = pred.predicted && *pred.predicted == rec.label;
        out.done = true;
        outcomes[i] = std::move(out);
    };

    try {
        detail::for_each_index(test.size(), options.max_in_flight, evaluate_one);
    } catch (...) {
        detail::fill_metrics(report, outcomes, k_max, system.registry().size());
        report.partial = true;
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (options.partial_sink) options.partial_sink(report);
        throw;
    }

    detail::fill_metrics(report, outcomes, k_max, system.registry().size());
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

struct TrBaselineOptions {
    std::size_t buffer_size = 0; // 0 => one class-summary embedding per class
    std::vector<std::size_t> k_values = {1, 3, 5};
    std::uint64_t seed = 0;
    std::map<std::string, std::string> class_summaries; // required when buffer_size == 0
};

// Text-retriever baseline: per-class buffers of raw-text instance
// embeddings (no tags), cosine ranking against the query-text embedding,
// scanning until k distinct classes appear. Ties break by stable input order.
inline std::map<std::size_t, double> run_tr_baseline(const Dataset& dataset, const TaskSplit& split,
                                                     Embedder& embedder, EmbeddingCache* cache,
                                                     const TrBaselineOptions& options) {
    if (options.k_values.empty())
        throw Error(Errc::InvalidArgument, "run_tr_baseline: no k values");

    std::map<std::string, std::vector<std::string>> by_label;
    for (const auto& r : dataset.records)
        if (r.split == "train") by_label[r.label].push_back(r.text);

    auto embed = [&](const std::vector<std::string>& texts) {
        return cache ? cache->embed(embedder, texts) : embedder.embed_batch(texts);
    };

    std::vector<Vec> store;
    std::vector<std::string> store_labels;
    for (const auto& task : split.tasks) {
        std::vector<std::string> ordered(task.begin(), task.end());
        std::sort(ordered.begin(), ordered.end());
        for (const auto& label : ordered) {
            if (options.buffer_size == 0) {
                auto it = options.class_summaries.find(label);
                if (it == options.class_summaries.end() || it->second.empty())
                    throw Error(Errc::InvalidArgument,
                                "run_tr_baseline: buffer 0 requires a summary for '" + label + "'");
                store.push_back(embed({it->second}).front());
                store_labels.push_back(label);
                continue;
            }
            auto found = by_label.find(label);
            if (found == by_label.end())
                throw Error(Errc::InvalidArgument, "run_tr_baseline: no training records for '" +
                                                       label + "'");
            const auto& texts = found->second;
            Rng rng(options.seed ^ detail::fnv1a64(label));
            auto picks = sample_indices(texts.size(), std::min(options.buffer_size, texts.size()), rng);
            std::vector<std::string> chosen;
            chosen.reserve(picks.size());
            for (auto i : picks) chosen.push_back(texts[i]);
            for (auto& v : embed(chosen)) {
                store.push_back(std::move(v));
                store_labels.push_back(label);
            }
        }
    }

    const auto test = dataset.split("test");
    if (test.empty()) throw Error(Errc::InvalidArgument, "run_tr_baseline: dataset has no test records");

    std::vector<std::size_t> ks = options.k_values;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.front() < 1) throw Error(Errc::InvalidArgument, "run_tr_baseline: k values must be >= 1");
    const std::size_t k_need = ks.back();

    std::map<std::size_t, std::size_t> hits;
    for (const auto* rec : test) {
        const Vec q = embed({rec->text}).front();
        std::vector<std::size_t> order(store.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::vector<double> sims(store.size());
        for (std::size_t i = 0; i < store.size(); ++i) sims[i] = cosine_similarity(q, store[i]);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });

        // first-appearance order of distinct classes
        std::vector<std::string> seen;
        std::size_t true_class_rank = 0;
        for (std::size_t i : order) {
            const auto& label = store_labels[i];
            if (std::find(seen.begin(), seen.end(), label) != seen.end()) continue;
            seen.push_back(label);
            if (label == rec->label) {
                true_class_rank = seen.size();
                break;
            }
            if (seen.size() >= k_need) break;
        }
        for (auto k : ks)
            if (true_class_rank >= 1 && true_class_rank <= k) ++hits[k];
    }

    std::map<std::size_t, double> recall;
    for (auto k : ks) recall[k] = static_cast<double>(hits[k]) / static_cast<double>(test.size());
    return recall;
}

// Smallest k maximizing validation accuracy; ties go to the smaller k.
inline std::size_t sweep_k(InCASystem& system, const std::vector<DatasetRecord>& validation,
                           const std::vector<std::size_t>& k_values) {
    if (system.registry().empty()) throw Error(Errc::NoClasses, "sweep_k: system has no classes");
    if (validation.empty()) throw Error(Errc::EmptyInput, "sweep_k: validation set is empty");
    if (k_values.empty()) throw Error(Errc::InvalidArgument, "sweep_k: no k values");

    std::vector<std::size_t> ks = k_values;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.front() < 1) throw Error(Errc::InvalidArgument, "sweep_k: k values must be >= 1");

    // Tag and score each instance once; only the prediction step depends on k.
    std::vector<TagList> tags(validation.size());
    std::vector<std::vector<ScoredClass>> scores(validation.size());
    for (std::size_t i = 0; i < validation.size(); ++i) {
        auto [t, v] = system.tags_and_embeddings(validation[i].text);
        tags[i] = std::move(t);
        scores[i] = system.registry().score_instance(v);
    }

    const std::size_t original_k = system.config().k;
    std::size_t best_k = ks.front();
    double best_accuracy = -1.0;
    for (auto k : ks) {
        system.set_k(k);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < validation.size(); ++i) {
            auto pred = system.predict_from_scores(validation[i].text, tags[i], scores[i]);
            if (pred.predicted && *pred.predicted == validation[i].label) ++correct;
        }
        const double accuracy = static_cast<double>(correct) / validation.size();
        if (accuracy > best_accuracy) {
            best_accuracy = accuracy;
            best_k = k;
        }
    }
    system.set_k(original_k);
    return best_k;
}

// Mean / sample-stddev aggregation over per-seed reports.
inline nlohmann::json aggregate_reports(const std::vector<EvalReport>& reports) {
    auto stats = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        if (xs.size() > 1) {
            for (double x : xs) var += (x - mean) * (x - mean);
            var /= static_cast<double>(xs.size() - 1);
        }
        return std::pair<double, double>{mean, std::sqrt(var)};
    };
    if (reports.empty()) throw Error(Errc::EmptyInput, "aggregate_reports: no reports");
    nlohmann::json j;
    j["runs"] = reports.size();
    std::vector<double> acc;
    for (const auto& r : reports) acc.push_back(r.final_accuracy);
    auto [am, as] = stats(acc);
    j["final_accuracy"] = {{"mean", am}, {"stddev", as}};
    j["recall_at_k"] = nlohmann::json::object();
    for (const auto& [k, unused] : reports.front().recall_at_k) {
        (void)unused;
        std::vector<double> vals;
        for (const auto& r : reports) {
            auto it = r.recall_at_k.find(k);
            if (it != r.recall_at_k.end()) vals.push_back(it->second);
        }
        if (vals.size() == reports.size()) {
            auto [m, s] = stats(vals);
            j["recall_at_k"][std::to_string(k)] = {{"mean", m}, {"stddev", s}};
        }
    }
    return j;
}

} // namespace inca
