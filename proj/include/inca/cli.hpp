#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "inca/embedder.hpp"
#include "inca/embedding_cache.hpp"
#include "inca/errors.hpp"
#include "inca/eval.hpp"
#include "inca/http_clients.hpp"
#include "inca/mock.hpp"
#include "inca/net_guard.hpp"
#include "inca/pipeline.hpp"
#include "inca/store.hpp"

namespace inca::cli {

struct CommonOptions {
    bool mock = false;
    std::uint64_t embed_seed = 7;
    std::size_t embed_dim = 64;
    std::string cache_path;
    std::string chat_model = "default";
    std::string embed_model = "default";
    std::size_t context_window = 0;
    std::size_t max_in_flight = 1;
};

struct Backends {
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<EmbeddingCache> cache;
    std::shared_ptr<ChatClient> tagger;
    std::shared_ptr<ChatClient> predictor;
    std::shared_ptr<MockLLM> mock;
    std::unique_ptr<net::ScopedForbid> guard;
};

namespace detail {

inline std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

// Mock mode wires the deterministic embedder and mock LLM behind a guard that
// makes any stray network call fail loudly. Real mode reads the endpoints
// from the environment; credentials never travel through flags.
inline Backends make_backends(const CommonOptions& common,
                              const std::string& mock_embedder_identity = {}) {
    Backends b;
    if (!common.cache_path.empty())
        b.cache = std::make_shared<EmbeddingCache>(std::filesystem::path(common.cache_path));
    if (common.mock) {
        b.guard = std::make_unique<net::ScopedForbid>();
        if (!mock_embedder_identity.empty()) {
            std::uint64_t seed = 0;
            std::size_t h = 0;
            if (!DeterministicEmbedder::parse_identity(mock_embedder_identity, seed, h))
                throw Error(Errc::SchemaMismatch, "state requires embedder '" + mock_embedder_identity +
                                                      "', which --mock cannot provide");
            b.embedder = std::make_shared<DeterministicEmbedder>(seed, h);
        } else {
            b.embedder = std::make_shared<DeterministicEmbedder>(common.embed_seed, common.embed_dim);
        }
        MockLLM::Options options;
        options.context_window = common.context_window;
        b.mock = std::make_shared<MockLLM>(options);
        b.tagger = b.mock;
        b.predictor = b.mock;
        return b;
    }
    const std::string embed_ep = env_or_empty("INCA_EMBED_ENDPOINT");
    const std::string chat_ep = env_or_empty("INCA_CHAT_ENDPOINT");
    const std::string api_key = env_or_empty("INCA_API_KEY");
    if (embed_ep.empty() || chat_ep.empty())
        throw Error(Errc::InvalidArgument,
                    "INCA_EMBED_ENDPOINT and INCA_CHAT_ENDPOINT must be set (or pass --mock)");
    HttpConfig embed_cfg;
    embed_cfg.endpoint = embed_ep;
    embed_cfg.model = common.embed_model;
    embed_cfg.api_key = api_key;
    HttpConfig chat_cfg;
    chat_cfg.endpoint = chat_ep;
    chat_cfg.model = common.chat_model;
    chat_cfg.api_key = api_key;
    chat_cfg.context_window = common.context_window;
    b.embedder = std::make_shared<HttpEmbedder>(embed_cfg);
    auto chat = std::make_shared<HttpChatClient>(chat_cfg);
    b.tagger = chat;
    b.predictor = chat;
    return b;
}

// Merge an optional separate test/validation file into the dataset, or hold
// out a per-class seeded fraction of train when the target split is absent.
inline Dataset prepare_dataset(const std::string& train_path, const std::string& extra_path,
                               const std::string& target_split, double holdout_fraction,
                               std::uint64_t seed) {
    Dataset ds = load_dataset(train_path);
    if (!extra_path.empty()) {
        Dataset extra = load_dataset(extra_path);
        for (auto& r : extra.records) {
            r.split = target_split;
            ds.records.push_back(std::move(r));
        }
        return ds;
    }
    if (!ds.split(target_split).empty()) return ds;

    log_warning("dataset has no '" + target_split + "' records; holding out " +
                std::to_string(holdout_fraction) + " of train per class (seed " +
                std::to_string(seed) + ")");
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        if (ds.records[i].split == "train") by_label[ds.records[i].label].push_back(i);
    for (auto& [label, idx] : by_label) {
        const auto want = static_cast<std::size_t>(
            std::max(1.0, holdout_fraction * static_cast<double>(idx.size())));
        if (want >= idx.size())
            throw Error(Errc::InvalidArgument, "class '" + label + "' has too few records to hold out");
        Rng rng(seed ^ inca::detail::fnv1a64(label));
        auto picks = sample_indices(idx.size(), want, rng);
        for (auto p : picks) ds.records[idx[p]].split = target_split;
    }
    return ds;
}

inline void fill_truth_from(const Dataset& ds, std::string_view split, MockLLM& mock) {
    for (const auto& r : ds.records)
        if (r.split == split) mock.options().truth[r.text] = r.label;
}

inline nlohmann::json snapshot_common(const CommonOptions& c) {
    nlohmann::json j;
    j["cache"] = c.cache_path;
    j["chat_model"] = c.chat_model;
    j["context_window"] = c.context_window;
    j["embed_dim"] = c.embed_dim;
    j["embed_model"] = c.embed_model;
    j["embed_seed"] = c.embed_seed;
    j["max_in_flight"] = c.max_in_flight;
    j["mock"] = c.mock;
    return j;
}

inline void write_snapshot(const std::string& out_prefix, const nlohmann::json& snapshot) {
    write_file_atomic(out_prefix + ".config.json", snapshot.dump(2) + "\n");
}

// --few-shot-file: JSON array of {"query","tags"} objects replacing the
// bundled tag-prompt examples.
inline std::vector<TagExample> load_few_shot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw Error(Errc::ParseFailure, path + " is not a JSON array");
    std::vector<TagExample> out;
    for (const auto& item : doc) {
        if (!item.contains("query") || !item.contains("tags"))
            throw Error(Errc::ParseFailure, path + ": entries need \"query\" and \"tags\"");
        out.push_back({item["query"].get<std::string>(), item["tags"].get<std::string>()});
    }
    return out;
}

inline std::vector<std::string> sorted_train_labels(const Dataset& ds) {
    auto labels = ds.labels("train");
    std::sort(labels.begin(), labels.end());
    return labels;
}

inline void learn_split(InCASystem& system, const Dataset& ds, const TaskSplit& split) {
    std::map<std::string, std::vector<std::string>> by_label;
    for (const auto& r : ds.records)
        if (r.split == "train") by_label[r.label].push_back(r.text);
    for (const auto& task : split.tasks) {
        std::vector<std::string> ordered(task.begin(), task.end());
        std::sort(ordered.begin(), ordered.end());
        for (const auto& label : ordered) system.learn_class(label, by_label.at(label));
    }
}

} // namespace detail

struct LearnArgs {
    CommonOptions common;
    std::string dataset;
    std::string state = "state.json";
    std::size_t tasks = 1;
    std::uint64_t split_seed = 0;
    InCAConfig config;
};

inline void cmd_learn(const LearnArgs& a, std::ostream& out) {
    auto backends = detail::make_backends(a.common);
    Dataset ds = load_dataset(a.dataset);
    auto labels = detail::sorted_train_labels(ds);
    if (labels.empty()) throw Error(Errc::EmptyInput, "dataset has no train records");
    auto split = split_tasks(labels, std::min(a.tasks, labels.size()), a.split_seed);
    InCASystem system(backends.embedder, backends.cache, backends.tagger, backends.predictor,
                      a.config);
    detail::learn_split(system, ds, split);
    save_state(system, a.state);
    nlohmann::json snapshot = detail::snapshot_common(a.common);
    snapshot["command"] = "learn";
    snapshot["config"] = config_to_json(a.config);
    snapshot["dataset"] = a.dataset;
    snapshot["split_seed"] = a.split_seed;
    snapshot["state"] = a.state;
    snapshot["tasks"] = a.tasks;
    detail::write_snapshot(a.state, snapshot);
    out << "learned " << system.registry().size() << " classes -> " << a.state << " ("
        << std::filesystem::file_size(a.state) << " bytes)\n";
}

struct PredictArgs {
    CommonOptions common;
    std::string state;
    std::string text;
    bool long_context = false;
    bool show_candidates = false;
};

inline void cmd_predict(const PredictArgs& a, std::istream& in, std::ostream& out) {
    // Peek at the stored identity first so mock mode can reconstruct the
    // exact embedder the state was built with.
    auto peek = load_state(a.state);
    auto backends = detail::make_backends(a.common, a.common.mock ? peek.embedder_identity : "");
    auto loaded = load_state(a.state, backends.embedder->dimension(), backends.embedder->identity());
    InCASystem system(std::move(loaded.registry), backends.embedder, backends.cache,
                      backends.tagger, backends.predictor, loaded.config);

    const bool long_context = a.long_context || loaded.config.long_context_mode;
    auto classify = [&](const std::string& query) {
        const Prediction pred =
            long_context ? system.predict_long_context(query) : system.predict(query);
        if (pred.predicted)
            out << *pred.predicted << "\n";
        else
            out << "NOMATCH\n";
        if (a.show_candidates)
            for (const auto& c : pred.candidates)
                out << "  candidate " << c.class_id << " distance " << c.distance << "\n";
    };

    if (!a.text.empty()) {
        classify(a.text);
        return;
    }
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) classify(line);
}

struct EvalArgs {
    CommonOptions common;
    std::string dataset;
    std::string test;
    double holdout = 0.2;
    std::size_t tasks = 1;
    std::size_t k_max = 5;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::string out_prefix = "report";
    bool long_context = false;
    InCAConfig config;
};

inline void cmd_eval(const EvalArgs& a, std::ostream& out) {
    Dataset ds = detail::prepare_dataset(a.dataset, a.test, "test", a.holdout, 9781);
    auto labels = detail::sorted_train_labels(ds);
    if (labels.empty()) throw Error(Errc::EmptyInput, "dataset has no train records");

    nlohmann::json snapshot = detail::snapshot_common(a.common);
    snapshot["command"] = "eval";
    snapshot["config"] = config_to_json(a.config);
    snapshot["dataset"] = a.dataset;
    snapshot["holdout"] = a.holdout;
    snapshot["k_max"] = a.k_max;
    snapshot["long_context"] = a.long_context;
    snapshot["seeds"] = a.seeds;
    snapshot["tasks"] = a.tasks;
    snapshot["test"] = a.test;
    detail::write_snapshot(a.out_prefix, snapshot);

    std::vector<EvalReport> reports;
    for (auto seed : a.seeds) {
        auto backends = detail::make_backends(a.common);
        if (backends.mock) detail::fill_truth_from(ds, "test", *backends.mock);
        auto split = split_tasks(labels, std::min(a.tasks, labels.size()), seed);
        InCASystem system(backends.embedder, backends.cache, backends.tagger, backends.predictor,
                          a.config);
        const std::string stem =
            a.seeds.size() == 1 ? a.out_prefix : a.out_prefix + ".seed" + std::to_string(seed);
        RunCilOptions options;
        options.k_max = a.k_max;
        options.max_in_flight = a.common.max_in_flight;
        options.long_context = a.long_context;
        options.partial_sink = [&](const EvalReport& partial) {
            write_file_atomic(stem + ".partial.json", report_to_json(partial).dump(2) + "\n");
        };
        EvalReport report = run_cil(system, ds, split, options);
        write_file_atomic(stem + ".json", report_to_json(report).dump(2) + "\n");
        write_file_atomic(stem + ".csv", report_to_csv(report));
        out << "seed " << seed << ": final_accuracy=" << report.final_accuracy
            << " test_count=" << report.test_count << " no_match=" << report.no_match << "\n";
        reports.push_back(std::move(report));
    }
    if (reports.size() > 1) {
        auto agg = aggregate_reports(reports);
        write_file_atomic(a.out_prefix + ".aggregate.json", agg.dump(2) + "\n");
        out << "aggregate: final_accuracy mean=" << agg["final_accuracy"]["mean"].get<double>()
            << " stddev=" << agg["final_accuracy"]["stddev"].get<double>() << "\n";
    }
}

struct RecallArgs {
    CommonOptions common;
    std::string dataset;
    std::string test;
    double holdout = 0.2;
    std::size_t tasks = 1;
    std::uint64_t split_seed = 0;
    std::size_t k_max = 5;
    std::vector<std::string> tr_buffers; // numbers or "full"; empty => ECL only
    std::string out_prefix = "recall";
    InCAConfig config;
};

inline void cmd_recall(const RecallArgs& a, std::ostream& out) {
    Dataset ds = detail::prepare_dataset(a.dataset, a.test, "test", a.holdout, 9781);
    auto labels = detail::sorted_train_labels(ds);
    if (labels.empty()) throw Error(Errc::EmptyInput, "dataset has no train records");
    auto split = split_tasks(labels, std::min(a.tasks, labels.size()), a.split_seed);

    auto backends = detail::make_backends(a.common);
    InCASystem system(backends.embedder, backends.cache, backends.tagger, backends.predictor,
                      a.config);
    detail::learn_split(system, ds, split);

    const auto test = ds.split("test");
    if (test.empty()) throw Error(Errc::InvalidArgument, "dataset has no test records");
    const std::size_t k_limit = std::min(a.k_max, system.registry().size());

    std::map<std::size_t, std::size_t> hits;
    for (const auto* rec : test) {
        auto scores = system.registry().score_instance(system.tags_and_embeddings(rec->text).second);
        const std::size_t rank = rank_of(scores, rec->label);
        if (rank >= 1)
            for (std::size_t k = rank; k <= k_limit; ++k) ++hits[k];
    }
    nlohmann::json result;
    std::string csv = "metric,k,value\n";
    for (std::size_t k = 1; k <= k_limit; ++k) {
        const double recall = static_cast<double>(hits[k]) / static_cast<double>(test.size());
        result["ecl_recall"][std::to_string(k)] = recall;
        csv += "ecl_recall," + std::to_string(k) + "," + std::to_string(recall) + "\n";
        out << "ecl recall@" << k << " = " << recall << "\n";
    }

    std::vector<std::size_t> k_values;
    for (std::size_t k = 1; k <= k_limit; ++k) k_values.push_back(k);
    for (const auto& buffer_spec : a.tr_buffers) {
        TrBaselineOptions tr;
        tr.k_values = k_values;
        tr.seed = a.split_seed;
        if (buffer_spec == "full") {
            tr.buffer_size = std::numeric_limits<std::size_t>::max();
        } else {
            try {
                tr.buffer_size = std::stoull(buffer_spec);
            } catch (const std::exception&) {
                throw Error(Errc::InvalidArgument, "--tr-buffers entry '" + buffer_spec +
                                                       "' is neither a number nor 'full'");
            }
        }
        if (tr.buffer_size == 0)
            for (const auto& p : system.registry().profiles())
                tr.class_summaries[p.class_id] = p.summary;
        auto curve = run_tr_baseline(ds, split, *backends.embedder, backends.cache.get(), tr);
        const std::string name = "tr_recall_" + buffer_spec;
        for (const auto& [k, recall] : curve) {
            result[name][std::to_string(k)] = recall;
            csv += name + "," + std::to_string(k) + "," + std::to_string(recall) + "\n";
            out << "tr(buffer=" << buffer_spec << ") recall@" << k << " = " << recall << "\n";
        }
    }

    nlohmann::json snapshot = detail::snapshot_common(a.common);
    snapshot["command"] = "recall";
    snapshot["config"] = config_to_json(a.config);
    snapshot["dataset"] = a.dataset;
    snapshot["k_max"] = a.k_max;
    snapshot["split_seed"] = a.split_seed;
    snapshot["tasks"] = a.tasks;
    snapshot["tr_buffers"] = a.tr_buffers;
    detail::write_snapshot(a.out_prefix, snapshot);
    write_file_atomic(a.out_prefix + ".json", result.dump(2) + "\n");
    write_file_atomic(a.out_prefix + ".csv", csv);
}

struct SweepKArgs {
    CommonOptions common;
    std::string dataset;
    std::string validation;
    double holdout = 0.2;
    std::size_t tasks = 1;
    std::uint64_t split_seed = 0;
    std::vector<std::size_t> k_values = {1, 2, 3, 4, 5};
    std::string out_prefix = "sweepk";
    InCAConfig config;
};

inline void cmd_sweep_k(const SweepKArgs& a, std::ostream& out) {
    Dataset ds = detail::prepare_dataset(a.dataset, a.validation, "validation", a.holdout, 4211);
    auto labels = detail::sorted_train_labels(ds);
    if (labels.empty()) throw Error(Errc::EmptyInput, "dataset has no train records");
    auto split = split_tasks(labels, std::min(a.tasks, labels.size()), a.split_seed);

    auto backends = detail::make_backends(a.common);
    if (backends.mock) detail::fill_truth_from(ds, "validation", *backends.mock);
    InCASystem system(backends.embedder, backends.cache, backends.tagger, backends.predictor,
                      a.config);
    detail::learn_split(system, ds, split);

    std::vector<DatasetRecord> validation;
    for (const auto& r : ds.records)
        if (r.split == "validation") validation.push_back(r);
    const std::size_t chosen = sweep_k(system, validation, a.k_values);
    out << "chosen k = " << chosen << "\n";

    nlohmann::json snapshot = detail::snapshot_common(a.common);
    snapshot["command"] = "sweep-k";
    snapshot["chosen_k"] = chosen;
    snapshot["config"] = config_to_json(a.config);
    snapshot["dataset"] = a.dataset;
    snapshot["k_values"] = a.k_values;
    snapshot["split_seed"] = a.split_seed;
    snapshot["tasks"] = a.tasks;
    detail::write_snapshot(a.out_prefix, snapshot);
    write_file_atomic(a.out_prefix + ".json", snapshot.dump(2) + "\n");
}

struct InspectArgs {
    std::string state;
};

inline void cmd_inspect(const InspectArgs& a, std::ostream& out) {
    auto loaded = load_state(a.state);
    out << "state file      : " << a.state << " (" << std::filesystem::file_size(a.state)
        << " bytes)\n";
    out << "embedder        : " << loaded.embedder_identity << " (h=" << loaded.dimension << ")\n";
    out << "classes         : " << loaded.registry.size() << "\n";
    out << "classes_folded  : " << loaded.registry.shared().classes_folded() << "\n";
    out << "epsilon         : " << loaded.registry.shared().epsilon() << "\n";
    if (!loaded.registry.empty()) {
        Mat reg = loaded.registry.shared().matrix();
        const double eps = loaded.registry.shared().epsilon();
        for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += eps;
        out << "condition number: " << spd_condition_number(reg) << " (regularized)\n";
    }
    out << "\nindex  tag_count  summary_bytes  name\n";
    for (const auto& p : loaded.registry.profiles())
        out << p.insertion_index << "  " << p.tag_count << "  " << p.summary.size() << "  "
            << p.name << "\n";
}

// Full command-line surface. Returns 0 on success, 1 on usage errors, 2 on
// runtime failures; diagnostics go to `err`, results to `out`.
inline int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
                   std::ostream& err) {
    CLI::App app{"InCA: replay-free class-incremental text classification"};
    app.require_subcommand(1);

    LearnArgs learn_args;
    PredictArgs predict_args;
    EvalArgs eval_args;
    RecallArgs recall_args;
    SweepKArgs sweep_args;
    InspectArgs inspect_args;

    auto add_common = [](CLI::App* cmd, CommonOptions& c) {
        cmd->add_flag("--mock", c.mock, "use deterministic mock backends (no network I/O)");
        cmd->add_option("--embed-seed", c.embed_seed, "mock embedder seed");
        cmd->add_option("--embed-dim", c.embed_dim, "mock embedder dimension")->check(CLI::Range(2, 4096));
        cmd->add_option("--cache", c.cache_path, "embedding cache file (JSONL, append-only)");
        cmd->add_option("--chat-model", c.chat_model, "chat model id for the HTTP backend");
        cmd->add_option("--embed-model", c.embed_model, "embedding model id for the HTTP backend");
        cmd->add_option("--context-window", c.context_window,
                        "declared context window of the chat client, in tokens (0 = unlimited)");
        cmd->add_option("--max-in-flight", c.max_in_flight, "backend concurrency bound")
            ->check(CLI::Range(1, 256));
    };
    auto add_config = [](CLI::App* cmd, InCAConfig& c) {
        cmd->add_option("--k", c.k, "number of candidate classes in the prediction prompt")
            ->check(CLI::Range(1, 1000));
        cmd->add_option("--summary-sample", c.summary_sample_size,
                        "training instances sampled into the summary prompt")
            ->check(CLI::Range(1, 1000));
        cmd->add_option("--sampler-seed", c.sampler_seed, "seed for the summary sampler");
        cmd->add_option("--task-word", c.task_word, "prompt wording, e.g. intent or topic");
        cmd->add_flag("--skip-llm-k1", c.skip_llm_when_k1,
                      "return the single candidate without an LLM call when k=1");
        cmd->add_option_function<std::string>(
               "--few-shot-file",
               [&c](const std::string& path) { c.tag_few_shot = detail::load_few_shot_file(path); },
               "JSON array of {query, tags} replacing the bundled tag-prompt examples")
            ->check(CLI::ExistingFile);
        cmd->add_flag_callback(
            "--no-few-shot", [&c] { c.tag_few_shot.clear(); },
            "render tag prompts without the few-shot examples block");
    };

    auto* learn = app.add_subcommand("learn", "ingest training JSONL, learn classes, save state");
    add_common(learn, learn_args.common);
    add_config(learn, learn_args.config);
    learn->add_option("--dataset", learn_args.dataset, "training JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    learn->add_option("--state", learn_args.state, "output state file");
    learn->add_option("--tasks", learn_args.tasks, "number of disjoint tasks")->check(CLI::Range(1, 100000));
    learn->add_option("--split-seed", learn_args.split_seed, "task split seed");
    learn->callback([&] { cmd_learn(learn_args, out); });

    auto* predict = app.add_subcommand("predict", "load state and classify --text or stdin lines");
    add_common(predict, predict_args.common);
    predict->add_option("--state", predict_args.state, "state file")->required()->check(CLI::ExistingFile);
    predict->add_option("--text", predict_args.text, "single query (otherwise reads stdin)");
    predict->add_flag("--long-context", predict_args.long_context,
                      "prompt with every class summary instead of the ECL top-k");
    predict->add_flag("--candidates", predict_args.show_candidates, "print candidate distances");
    predict->callback([&] { cmd_predict(predict_args, in, out); });

    auto* eval = app.add_subcommand("eval", "full class-incremental run: learn tasks, report accuracy and recall");
    add_common(eval, eval_args.common);
    add_config(eval, eval_args.config);
    eval->add_option("--dataset", eval_args.dataset, "JSONL file (train plus optional test/validation splits)")
        ->required()
        ->check(CLI::ExistingFile);
    auto* eval_test = eval->add_option("--test", eval_args.test, "separate test JSONL file")
                          ->check(CLI::ExistingFile);
    eval->add_option("--holdout", eval_args.holdout, "per-class test holdout fraction when no test split exists")
        ->check(CLI::Range(0.01, 0.9))
        ->excludes(eval_test);
    eval->add_option("--tasks", eval_args.tasks, "number of disjoint tasks")->check(CLI::Range(1, 100000));
    eval->add_option("--k-max", eval_args.k_max, "largest k in the recall curve")->check(CLI::Range(1, 1000));
    eval->add_option("--seeds", eval_args.seeds, "task split seeds")->delimiter(',');
    eval->add_option("--out", eval_args.out_prefix, "output file prefix");
    eval->add_flag("--long-context", eval_args.long_context,
                   "predict with every class summary in one prompt (no ECL)");
    eval->callback([&] { cmd_eval(eval_args, out); });

    auto* recall = app.add_subcommand("recall", "ECL and text-retriever recall curves");
    add_common(recall, recall_args.common);
    add_config(recall, recall_args.config);
    recall->add_option("--dataset", recall_args.dataset, "JSONL file")->required()->check(CLI::ExistingFile);
    auto* recall_test = recall->add_option("--test", recall_args.test, "separate test JSONL file")
                            ->check(CLI::ExistingFile);
    recall->add_option("--holdout", recall_args.holdout, "per-class test holdout fraction")
        ->check(CLI::Range(0.01, 0.9))
        ->excludes(recall_test);
    recall->add_option("--tasks", recall_args.tasks, "number of disjoint tasks")->check(CLI::Range(1, 100000));
    recall->add_option("--split-seed", recall_args.split_seed, "task split seed");
    recall->add_option("--k-max", recall_args.k_max, "largest k in the curves")->check(CLI::Range(1, 1000));
    recall->add_option("--tr-buffers", recall_args.tr_buffers,
                       "text-retriever buffer sizes (numbers or 'full'); 0 uses class-summary embeddings")
        ->delimiter(',');
    recall->add_option("--out", recall_args.out_prefix, "output file prefix");
    recall->callback([&] { cmd_recall(recall_args, out); });

    auto* sweep = app.add_subcommand("sweep-k", "choose k on a validation split");
    add_common(sweep, sweep_args.common);
    add_config(sweep, sweep_args.config);
    sweep->add_option("--dataset", sweep_args.dataset, "JSONL file")->required()->check(CLI::ExistingFile);
    auto* sweep_val = sweep->add_option("--validation", sweep_args.validation, "separate validation JSONL file")
                          ->check(CLI::ExistingFile);
    sweep->add_option("--holdout", sweep_args.holdout, "per-class validation holdout fraction")
        ->check(CLI::Range(0.01, 0.9))
        ->excludes(sweep_val);
    sweep->add_option("--tasks", sweep_args.tasks, "number of disjoint tasks")->check(CLI::Range(1, 100000));
    sweep->add_option("--split-seed", sweep_args.split_seed, "task split seed");
    sweep->add_option("--k-values", sweep_args.k_values, "candidate k values")->delimiter(',');
    sweep->add_option("--out", sweep_args.out_prefix, "output file prefix");
    sweep->callback([&] { cmd_sweep_k(sweep_args, out); });

    auto* inspect = app.add_subcommand("inspect", "print the class table and covariance diagnostics");
    inspect->add_option("--state", inspect_args.state, "state file")->required()->check(CLI::ExistingFile);
    inspect->callback([&] { cmd_inspect(inspect_args, out); });

    std::vector<const char*> argv;
    argv.push_back("inca");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace inca::cli
