#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "inca/errors.hpp"

namespace inca {

using Vec = std::vector<double>;

// Dense row-major matrix. Dimensions here are the embedding size h (a few
// hundred at most), so plain O(h^3) routines are all we need.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    std::vector<double>& data() { return a_; }
    const std::vector<double>& data() const { return a_; }

    bool operator==(const Mat& o) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double cosine_similarity(const Vec& a, const Vec& b) {
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

inline Vec matvec(const Mat& m, const Vec& v) {
    Vec out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

// m += w * d d^T. Both halves come from the same products, so the result
// stays bit-symmetric.
inline void add_scaled_outer(Mat& m, const Vec& d, double w) {
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) m(i, j) += w * d[i] * d[j];
}

inline double trace(const Mat& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
    return t;
}

inline double quad_form(const Vec& v, const Mat& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) row += m(i, j) * v[j];
        s += v[i] * row;
    }
    return s;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

inline double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

inline void symmetrize(Mat& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
}

// Lower-triangular Cholesky factor of an SPD matrix, or nullopt if the
// matrix is not numerically positive definite.
inline std::optional<Mat> cholesky_factor(const Mat& a) {
    const std::size_t n = a.rows();
    Mat l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

// Inverse of an SPD matrix via its Cholesky factor; the result is
// symmetrized before returning.
inline std::optional<Mat> spd_inverse(const Mat& a) {
    const auto l = cholesky_factor(a);
    if (!l) return std::nullopt;
    const std::size_t n = a.rows();
    Mat inv(n, n);
    // Solve L y = e_c (forward), then L^T x = y (backward), column by column.
    Vec y(n), x(n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= (*l)(i, k) * y[k];
            y[i] = s / (*l)(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= (*l)(k, ii) * x[k];
            x[ii] = s / (*l)(ii, ii);
        }
        for (std::size_t i = 0; i < n; ++i) inv(i, c) = x[i];
    }
    symmetrize(inv);
    return inv;
}

// Largest/smallest eigenvalue estimates for an SPD matrix by (inverse) power
// iteration. Only used for diagnostics (condition number in `inspect`).
inline double power_iteration_lambda_max(const Mat& a, std::size_t iters = 200) {
    const std::size_t n = a.rows();
    Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        Vec w = matvec(a, v);
        const double nw = norm(w);
        if (nw == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
        lambda = nw;
    }
    return lambda;
}

inline double spd_condition_number(const Mat& a) {
    const auto inv = spd_inverse(a);
    if (!inv) return std::numeric_limits<double>::infinity();
    const double lmax = power_iteration_lambda_max(a);
    const double lmin_inv = power_iteration_lambda_max(*inv);
    if (lmin_inv == 0.0) return std::numeric_limits<double>::infinity();
    return lmax * lmin_inv;
}

} // namespace inca
