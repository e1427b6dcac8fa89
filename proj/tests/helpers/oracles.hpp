#pragma once

// Test-only oracles, deliberately independent of the library's solve paths:
// a general-purpose Gauss-Jordan inverse, batch-definition class statistics,
// and a brute-force scorer that recomputes every per-tag distance naively.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "inca/ecl.hpp"
#include "inca/linalg.hpp"

namespace oracle {

// General inverse with partial pivoting; no SPD assumption, no Cholesky.
inline inca::Mat gauss_jordan_inverse(const inca::Mat& a) {
    const std::size_t n = a.rows();
    inca::Mat work = a;
    inca::Mat inv = inca::Mat::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
        if (work(pivot, col) == 0.0) throw std::runtime_error("oracle inverse: singular matrix");
        if (pivot != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(work(pivot, c), work(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        const double p = work(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            work(col, c) /= p;
            inv(col, c) /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                work(r, c) -= f * work(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

// mu and Delta computed directly from their definitions.
struct BatchStats {
    inca::Vec mean;
    inca::Mat delta;
};

inline BatchStats batch_stats(const std::vector<inca::Vec>& embeddings) {
    const std::size_t h = embeddings.at(0).size();
    const double r = static_cast<double>(embeddings.size());
    BatchStats out{inca::Vec(h, 0.0), inca::Mat(h, h)};
    for (const auto& z : embeddings)
        for (std::size_t i = 0; i < h; ++i) out.mean[i] += z[i] / r;
    for (const auto& z : embeddings)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < h; ++j)
                out.delta(i, j) += (z[i] - out.mean[i]) * (z[j] - out.mean[j]) / r;
    return out;
}

// Batch-style shared covariance: plain mean of per-class deltas.
inline inca::Mat batch_shared_covariance(const std::vector<std::vector<inca::Vec>>& per_class) {
    const std::size_t h = per_class.at(0).at(0).size();
    inca::Mat sigma(h, h);
    for (const auto& embeddings : per_class) {
        const auto stats = batch_stats(embeddings);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < h; ++j) sigma(i, j) += stats.delta(i, j);
    }
    for (auto& v : sigma.data()) v /= static_cast<double>(per_class.size());
    return sigma;
}

inline double quad(const inca::Vec& d, const inca::Mat& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) s += d[i] * m(i, j) * d[j];
    return s;
}

// Average Mahalanobis distance recomputed externally, with the same
// documented (distance, insertion order) tie rule.
struct BruteScored {
    std::string class_id;
    double distance;
};

inline std::vector<BruteScored> brute_force_scores(const std::vector<inca::ClassProfile>& profiles,
                                                   const inca::Mat& covariance, double epsilon,
                                                   const std::vector<inca::Vec>& queries) {
    inca::Mat reg = covariance;
    for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += epsilon;
    const inca::Mat precision = gauss_jordan_inverse(reg);
    std::vector<BruteScored> out;
    for (const auto& p : profiles) {
        double total = 0.0;
        for (const auto& z : queries) {
            inca::Vec d(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) d[i] = z[i] - p.mean[i];
            total += std::sqrt(std::max(0.0, quad(d, precision)));
        }
        out.push_back({p.class_id, total / static_cast<double>(queries.size())});
    }
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out[a].distance < out[b].distance;
    });
    std::vector<BruteScored> sorted;
    for (auto i : order) sorted.push_back(out[i]);
    return sorted;
}

} // namespace oracle
