// Acceptance suite: one criterion per function, one pass/fail line each.
// Exit code 0 only if every criterion holds.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "inca/ecl.hpp"
#include "inca/eval.hpp"
#include "inca/mock.hpp"
#include "inca/pipeline.hpp"
#include "inca/prompts.hpp"
#include "inca/rng.hpp"
#include "inca/store.hpp"

#include "helpers/oracles.hpp"
#include "helpers/synthetic.hpp"
#include "helpers/tmpdir.hpp"

using namespace inca;

namespace {

struct CheckFailed : std::runtime_error {
    explicit CheckFailed(const std::string& what) : std::runtime_error(what) {}
};

void require(bool condition, const std::string& what) {
    if (!condition) throw CheckFailed(what);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double rel_frobenius_diff(const Mat& a, const Mat& b) {
    Mat d = a;
    for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] -= b.data()[i];
    return frobenius_norm(d) / std::max(1e-300, frobenius_norm(b));
}

Mat random_spd(Rng& rng, std::size_t n) {
    Mat b(n, n);
    for (auto& v : b.data()) v = rng.uniform(-1.0, 1.0);
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b(k, i) * b(k, j);
            a(i, j) = s;
        }
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.1;
    return a;
}

std::vector<Vec> random_embeddings(Rng& rng, std::size_t count, std::size_t h) {
    std::vector<Vec> out(count, Vec(h));
    for (auto& v : out)
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- criteria

// h=8, J=10 synthetic classes: incremental shared covariance equals the
// batch mean of per-class deltas within relative 1e-10, in under a second.
void criterion_1_covariance_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(101);
    const std::size_t h = 8, classes = 10;
    std::vector<std::vector<Vec>> raw;
    EclRegistry reg(h);
    for (std::size_t c = 0; c < classes; ++c) {
        raw.push_back(random_embeddings(rng, 6 + (c % 5), h));
        reg.finalize_class("c" + std::to_string(c), "c" + std::to_string(c), raw.back());
    }
    const Mat batch = oracle::batch_shared_covariance(raw);
    const double diff = rel_frobenius_diff(reg.shared().matrix(), batch);
    require(diff < 1e-10, "relative difference " + std::to_string(diff));
    require(seconds_since(start) < 1.0, "took longer than 1 s");
}

// 20 random permutations of class order produce the same covariance within 1e-10.
void criterion_2_permutation_invariance() {
    Rng rng(202);
    const std::size_t h = 8, classes = 10;
    std::vector<std::vector<Vec>> raw;
    for (std::size_t c = 0; c < classes; ++c) raw.push_back(random_embeddings(rng, 7, h));

    EclRegistry reference(h);
    for (std::size_t c = 0; c < classes; ++c)
        reference.finalize_class("c" + std::to_string(c), "c" + std::to_string(c), raw[c]);

    std::vector<std::size_t> order(classes);
    for (std::size_t i = 0; i < classes; ++i) order[i] = i;
    for (int perm = 0; perm < 20; ++perm) {
        shuffle(order, rng);
        EclRegistry reg(h);
        for (auto c : order)
            reg.finalize_class("c" + std::to_string(c), "c" + std::to_string(c), raw[c]);
        const double diff = rel_frobenius_diff(reg.shared().matrix(), reference.shared().matrix());
        require(diff < 1e-10,
                "permutation " + std::to_string(perm) + ": difference " + std::to_string(diff));
    }
}

// 100 random SPD cases across h in {2, 8, 32}: mahalanobis through the
// Cholesky precision matches the direct-inverse quadratic-form oracle
// within relative 1e-8.
void criterion_3_mahalanobis_oracle() {
    Rng rng(303);
    const std::vector<std::pair<std::size_t, int>> plan = {{2, 34}, {8, 33}, {32, 33}};
    int cases = 0;
    for (const auto& [h, reps] : plan) {
        for (int rep = 0; rep < reps; ++rep) {
            const Mat sigma = random_spd(rng, h);
            auto cov = SharedCovariance::from_parts(sigma, 1, 0.0, 0.0);
            const Mat oracle_inv = oracle::gauss_jordan_inverse(sigma);
            Vec mu(h), z(h);
            for (auto& x : mu) x = rng.uniform(-2.0, 2.0);
            for (auto& x : z) x = rng.uniform(-2.0, 2.0);
            Vec d(h);
            for (std::size_t i = 0; i < h; ++i) d[i] = z[i] - mu[i];
            const double expected = std::sqrt(std::max(0.0, oracle::quad(d, oracle_inv)));
            const double got = mahalanobis(z, mu, cov.precision());
            const double rel = std::abs(got - expected) / std::max(1e-300, expected);
            require(rel < 1e-8, "case " + std::to_string(cases) + " (h=" + std::to_string(h) +
                                    "): relative error " + std::to_string(rel));
            ++cases;
        }
    }
    require(cases == 100, "expected 100 cases, ran " + std::to_string(cases));
}

// With epsilon = 0 and 10 random invertible transforms applied to every
// training and query embedding, top_k id sequences are identical for
// k in {1, 3, 5}.
void criterion_4_linear_transform_invariance() {
    Rng rng(404);
    const std::size_t h = 8;
    std::vector<std::vector<Vec>> raw;
    for (int c = 0; c < 6; ++c) raw.push_back(random_embeddings(rng, 20, h));
    std::vector<std::vector<Vec>> queries;
    for (int q = 0; q < 8; ++q) queries.push_back(random_embeddings(rng, 3, h));

    EclRegistry base(h, 0.0, 0.0);
    for (std::size_t c = 0; c < raw.size(); ++c)
        base.finalize_class("c" + std::to_string(c), "c" + std::to_string(c), raw[c]);

    for (int rep = 0; rep < 10; ++rep) {
        Mat a = Mat::identity(h);
        for (auto& v : a.data()) v += 0.3 * rng.uniform(-1.0, 1.0);
        EclRegistry transformed(h, 0.0, 0.0);
        for (std::size_t c = 0; c < raw.size(); ++c) {
            std::vector<Vec> tv;
            for (const auto& z : raw[c]) tv.push_back(matvec(a, z));
            transformed.finalize_class("c" + std::to_string(c), "c" + std::to_string(c), tv);
        }
        for (const auto& query : queries) {
            std::vector<Vec> tq;
            for (const auto& z : query) tq.push_back(matvec(a, z));
            for (std::size_t k : {1u, 3u, 5u}) {
                const auto expected = base.top_k(query, k);
                const auto got = transformed.top_k(tq, k);
                require(got == expected, "transform " + std::to_string(rep) + ", k=" +
                                             std::to_string(k) + ": id sequences differ");
            }
        }
    }
}

// With the oracle predictor mock, run_cil final accuracy equals recall@k
// exactly (zero tolerance), on a fixture whose recall is genuinely below 1.
void criterion_5_oracle_equality() {
    auto clusters = synth::make_clusters(505, 12, 6, 10, 6, 2.0);
    InCAConfig config;
    config.k = 3;
    auto fx = synth::make_fixture_system(clusters, 6, config);
    auto split = split_tasks(clusters.labels, 4, 0);
    const auto report = run_cil(*fx.system, clusters.dataset, split, {});
    require(report.recall_at_k.at(3) < 1.0,
            "fixture saturated at recall 1.0; equality would be vacuous");
    require(report.final_accuracy == report.recall_at_k.at(3),
            "accuracy " + std::to_string(report.final_accuracy) + " != recall@3 " +
                std::to_string(report.recall_at_k.at(3)));
}

// Pinned generator: 50 classes, h=16, inter-mean distance >= 10x within-class
// spread. ECL recall@1 >= 0.95 and recall@3 >= 0.99, full run < 30 s.
struct Criterion6Result {
    synth::Clusters clusters;
    std::map<std::size_t, double> ecl_recall;
    std::map<std::string, std::string> summaries;
    std::shared_ptr<FixtureEmbedder> embedder;
};

Criterion6Result run_criterion_6() {
    Criterion6Result result;
    result.clusters = synth::make_clusters(606, 50, 16, 20, 10, 0.1);
    require(result.clusters.min_inter_mean_distance >= 10.0 * result.clusters.max_within_spread,
            "generator violated the separation contract");

    InCAConfig config;
    config.k = 3;
    auto fx = synth::make_fixture_system(result.clusters, 16, config);
    auto split = split_tasks(result.clusters.labels, 10, 0);
    RunCilOptions options;
    options.k_max = 5;
    const auto report = run_cil(*fx.system, result.clusters.dataset, split, options);
    result.ecl_recall = report.recall_at_k;
    for (const auto& p : fx.system->registry().profiles())
        result.summaries[p.class_id] = p.summary;
    result.embedder = fx.embedder;
    return result;
}

void criterion_6_separable_recall(const Criterion6Result& result, double elapsed) {
    require(result.ecl_recall.at(1) >= 0.95,
            "recall@1 = " + std::to_string(result.ecl_recall.at(1)));
    require(result.ecl_recall.at(3) >= 0.99,
            "recall@3 = " + std::to_string(result.ecl_recall.at(3)));
    require(elapsed < 30.0, "run took " + std::to_string(elapsed) + " s");
}

// On the criterion-6 configuration, ECL recall >= TR recall at buffer 0 for
// k in {1, 3, 5}.
void criterion_7_ecl_dominates_tr(const Criterion6Result& result) {
    auto split = split_tasks(result.clusters.labels, 10, 0);
    TrBaselineOptions tr;
    tr.buffer_size = 0;
    tr.k_values = {1, 3, 5};
    tr.class_summaries = result.summaries;
    const auto tr_recall =
        run_tr_baseline(result.clusters.dataset, split, *result.embedder, nullptr, tr);
    for (std::size_t k : {1u, 3u, 5u})
        require(result.ecl_recall.at(k) >= tr_recall.at(k),
                "k=" + std::to_string(k) + ": ECL " + std::to_string(result.ecl_recall.at(k)) +
                    " < TR " + std::to_string(tr_recall.at(k)));
}

// Save/load round trip re-serializes byte-identically and preserves top-3
// rankings on 1000 random queries.
void criterion_8_persistence() {
    auto clusters = synth::make_clusters(808, 20, 12, 15, 0);
    auto fx = synth::make_fixture_system(clusters, 12, {});
    std::map<std::string, std::vector<std::string>> by_label;
    for (const auto& r : clusters.dataset.records) by_label[r.label].push_back(r.text);
    for (const auto& label : clusters.labels) fx.system->learn_class(label, by_label.at(label));

    testutil::TempDir dir;
    const auto p1 = dir.file("a.json");
    const auto p2 = dir.file("b.json");
    save_state(*fx.system, p1);
    auto loaded = load_state(p1, 12, fx.embedder->identity());
    InCASystem restored(std::move(loaded.registry), fx.embedder, nullptr, fx.llm, fx.llm,
                        loaded.config);
    save_state(restored, p2);
    require(read_file(p1.string()) == read_file(p2.string()),
            "save -> load -> save is not byte-identical");

    Rng rng(881);
    for (int i = 0; i < 1000; ++i) {
        Vec q(12);
        for (auto& x : q) x = rng.uniform(-2.0, 2.0);
        if (fx.system->registry().top_k({q}, 3) != restored.registry().top_k({q}, 3))
            throw CheckFailed("query " + std::to_string(i) + ": top-3 rankings differ");
    }
}

// The three bundled prompts render byte-identically to the golden files.
void criterion_9_prompt_goldens() {
    const std::string dir = INCA_TEST_GOLDEN_DIR;

    const std::string tag_prompt =
        render_tag_prompt("do i have to pay for carry-ons on delta", default_tag_examples());
    require(tag_prompt == read_file(dir + "/prompt_tags.txt"), "tag prompt differs from golden");

    const std::vector<std::string> queries = {
        "how would i apply for an american express",
        "show me the application for a visa card",
        "can you apply for idaho independent card for me",
        "do you have any information on how to open a new credit card",
        "is this where i apply for a new credit card",
        "is it possible to apply for a new credit card",
        "walk me through applying for a visa card",
        "what's the procedure to apply for a new credit card",
        "i want to put in an application for a line of a credit card how do i do that",
        "does bank of america give credit cards to people like me",
    };
    require(render_summary_prompt(queries) == read_file(dir + "/prompt_summary.txt"),
            "summary prompt differs from golden");

    const std::vector<Candidate> candidates = {
        {"direct_deposit", "direct_deposit",
         "The users are inquiring about the process of setting up a Direct Deposit for their "
         "paychecks or bank accounts. They want to know how to arrange for their checks to deposit "
         "directly into their accounts and are looking for instructions or guidance on how to do "
         "this. Some users are specifically interested in setting up Direct Deposit at certain "
         "banks, while others are seeking general information on how Direct Deposit works."},
        {"income", "income",
         "The users are inquiring about their current or past income, salary, or earnings from "
         "their job. They want to know how much money they make or earned, and sometimes they want "
         "to calculate their total income. Some users are also interested in knowing the amount "
         "they bring in annually or their compensation."},
        {"payday", "payday",
         "The users are inquiring about the timing of their next paycheck or payment. They want to "
         "know how often they are paid, when they can expect to be paid next, and when their next "
         "payment will be deposited. They are also interested in knowing the date or day on which "
         "they will receive their next check or be paid. Some users want to be informed about the "
         "date their most recent payment was made, while others want to plan for their next "
         "upcoming payment."},
    };
    require(render_prediction_prompt("get my paycheck to direct deposit", candidates) ==
                read_file(dir + "/prompt_prediction.txt"),
            "prediction prompt differs from golden");
}

// 150 classes x 256-token summaries against a 32k-token window: long-context
// mode raises TokenLimitExceeded while ECL mode with k=3 succeeds.
void criterion_10_token_limit() {
    const std::size_t h = 16;
    Rng rng(1010);
    EclRegistry registry(h);
    auto embedder = std::make_shared<FixtureEmbedder>(h, "fixture:h=16");
    for (int c = 0; c < 150; ++c) {
        const std::string name = "cls" + std::to_string(c);
        registry.finalize_class(name, name, random_embeddings(rng, 4, h));
        // exactly 1024 bytes -> 256 estimated tokens
        registry.profile_at(static_cast<std::size_t>(c)).summary = std::string(1024, 'a' + (c % 26));
    }
    const std::string query = "probe query";
    Vec probe(h, 0.1);
    embedder->set(query, probe);

    MockLLM::Options options;
    options.context_window = 32768;
    options.echo_query_as_tag = true;
    auto llm = std::make_shared<MockLLM>(options);
    InCAConfig config;
    config.k = 3;
    InCASystem system(std::move(registry), embedder, nullptr, llm, llm, config);

    bool threw = false;
    try {
        system.predict_long_context(query);
    } catch (const Error& e) {
        threw = e.code() == Errc::TokenLimitExceeded;
    }
    require(threw, "long-context mode did not raise TokenLimitExceeded");

    const auto pred = system.predict(query);
    require(pred.predicted.has_value(), "ECL mode with k=3 failed on the same state");
    require(pred.candidates.size() == 3, "ECL mode did not narrow to 3 candidates");
}

} // namespace

int main() {
    int failures = 0;
    auto run = [&](int index, const std::string& description, const std::function<void()>& fn) {
        try {
            fn();
            std::printf("[PASS] criterion %2d: %s\n", index, description.c_str());
        } catch (const std::exception& e) {
            ++failures;
            std::printf("[FAIL] criterion %2d: %s -- %s\n", index, description.c_str(), e.what());
        }
        std::fflush(stdout);
    };

    run(1, "incremental covariance equals batch mean of deltas (rel 1e-10, < 1 s)",
        criterion_1_covariance_equivalence);
    run(2, "covariance invariant under 20 class-order permutations (1e-10)",
        criterion_2_permutation_invariance);
    run(3, "mahalanobis matches direct-inverse oracle on 100 SPD cases (rel 1e-8)",
        criterion_3_mahalanobis_oracle);
    run(4, "top-k invariant under 10 invertible transforms (eps=0, k in {1,3,5})",
        criterion_4_linear_transform_invariance);
    run(5, "oracle predictor: final accuracy equals recall@k exactly",
        criterion_5_oracle_equality);

    const auto c6_start = std::chrono::steady_clock::now();
    Criterion6Result c6;
    bool c6_ok = false;
    try {
        c6 = run_criterion_6();
        c6_ok = true;
    } catch (const std::exception& e) {
        ++failures;
        std::printf("[FAIL] criterion  6: separable clusters: recall@1 >= 0.95, recall@3 >= 0.99 -- %s\n",
                    e.what());
        std::printf("[FAIL] criterion  7: ECL recall >= TR recall at buffer 0 (k in {1,3,5}) -- "
                    "criterion 6 setup failed\n");
    }
    if (c6_ok) {
        const double elapsed = seconds_since(c6_start);
        run(6, "separable clusters: recall@1 >= 0.95, recall@3 >= 0.99, < 30 s",
            [&] { criterion_6_separable_recall(c6, elapsed); });
        run(7, "ECL recall >= TR recall at buffer 0 (k in {1,3,5})",
            [&] { criterion_7_ecl_dominates_tr(c6); });
    }

    run(8, "persistence: byte-identical re-serialization, identical top-3 on 1000 queries",
        criterion_8_persistence);
    run(9, "prompt templates render byte-identically to goldens", criterion_9_prompt_goldens);
    run(10, "long-context 150x256 tokens overflows a 32k window; ECL k=3 succeeds",
        criterion_10_token_limit);

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
