#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "inca/errors.hpp"
#include "inca/linalg.hpp"
#include "inca/log.hpp"

namespace inca {

using ClassId = std::string;

// One learned class: a mean over its tag embeddings plus bookkeeping.
// The summary text is filled in by the pipeline once the class is learned.
struct ClassProfile {
    ClassId class_id;
    std::string name;
    Vec mean;
    std::size_t tag_count = 0;
    std::size_t insertion_index = 0;
    std::string summary;
};

struct ScoredClass {
    ClassId class_id;
    double distance = 0.0;
};

// Single covariance matrix shared by every class, maintained as the running
// mean of per-class deviation matrices. The regularized inverse is cached
// until the next fold.
class SharedCovariance {
public:
    SharedCovariance() = default;
    SharedCovariance(std::size_t h, double epsilon_abs, double epsilon_rel)
        : matrix_(h, h), epsilon_abs_(epsilon_abs), epsilon_rel_(epsilon_rel) {}

    // The mutex only guards the precision cache; copies and moves assume the
    // usual exclusive-access contract and take the data without it.
    SharedCovariance(const SharedCovariance& o)
        : matrix_(o.matrix_), classes_folded_(o.classes_folded_), epsilon_abs_(o.epsilon_abs_),
          epsilon_rel_(o.epsilon_rel_), cached_precision_(o.cached_precision_),
          cached_epsilon_(o.cached_epsilon_) {}
    SharedCovariance(SharedCovariance&& o) noexcept
        : matrix_(std::move(o.matrix_)), classes_folded_(o.classes_folded_),
          epsilon_abs_(o.epsilon_abs_), epsilon_rel_(o.epsilon_rel_),
          cached_precision_(std::move(o.cached_precision_)), cached_epsilon_(o.cached_epsilon_) {}
    SharedCovariance& operator=(const SharedCovariance& o) {
        if (this != &o) {
            matrix_ = o.matrix_;
            classes_folded_ = o.classes_folded_;
            epsilon_abs_ = o.epsilon_abs_;
            epsilon_rel_ = o.epsilon_rel_;
            cached_precision_ = o.cached_precision_;
            cached_epsilon_ = o.cached_epsilon_;
        }
        return *this;
    }
    SharedCovariance& operator=(SharedCovariance&& o) noexcept {
        matrix_ = std::move(o.matrix_);
        classes_folded_ = o.classes_folded_;
        epsilon_abs_ = o.epsilon_abs_;
        epsilon_rel_ = o.epsilon_rel_;
        cached_precision_ = std::move(o.cached_precision_);
        cached_epsilon_ = o.cached_epsilon_;
        return *this;
    }

    static SharedCovariance from_parts(Mat matrix, std::size_t classes_folded,
                                       double epsilon_abs, double epsilon_rel) {
        SharedCovariance c;
        c.matrix_ = std::move(matrix);
        c.classes_folded_ = classes_folded;
        c.epsilon_abs_ = epsilon_abs;
        c.epsilon_rel_ = epsilon_rel;
        return c;
    }

    std::size_t dimension() const { return matrix_.rows(); }
    const Mat& matrix() const { return matrix_; }
    std::size_t classes_folded() const { return classes_folded_; }
    double epsilon_abs() const { return epsilon_abs_; }
    double epsilon_rel() const { return epsilon_rel_; }

    double epsilon() const {
        const double h = static_cast<double>(matrix_.rows());
        return std::max(epsilon_abs_, epsilon_rel_ * trace(matrix_) / h);
    }

    // Sigma_j = ((j-1) Sigma_{j-1} + Delta_j) / j
    void fold(const Mat& delta) {
        const double j = static_cast<double>(classes_folded_ + 1);
        auto& s = matrix_.data();
        const auto& d = delta.data();
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = ((j - 1.0) * s[i] + d[i]) / j;
        ++classes_folded_;
        std::lock_guard lock(cache_mu_);
        cached_precision_.reset();
    }

    // Inverse of (matrix + eps I). Throws NoClasses before the first fold and
    // NumericalFailure if the SPD solve fails even after regularization.
    const Mat& precision() const {
        if (classes_folded_ == 0)
            throw Error(Errc::NoClasses, "covariance has no folded classes");
        std::lock_guard lock(cache_mu_);
        const double eps = epsilon();
        if (cached_precision_ && cached_epsilon_ == eps) return *cached_precision_;
        Mat reg = matrix_;
        for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += eps;
        auto inv = spd_inverse(reg);
        if (!inv)
            throw Error(Errc::NumericalFailure,
                        "SPD solve of regularized covariance failed (eps=" + std::to_string(eps) + ")");
        cached_precision_ = std::move(*inv);
        cached_epsilon_ = eps;
        return *cached_precision_;
    }

private:
    Mat matrix_;
    std::size_t classes_folded_ = 0;
    double epsilon_abs_ = 1e-10;
    double epsilon_rel_ = 1e-4;
    mutable std::mutex cache_mu_;
    mutable std::optional<Mat> cached_precision_;
    mutable double cached_epsilon_ = 0.0;
};

// sqrt((z - mu)^T P (z - mu)). Tiny negative quadratic forms (>= -1e-12) are
// rounding artifacts and clamp to zero; anything below that is corrupt state.
inline double mahalanobis(const Vec& z, const Vec& mu, const Mat& precision) {
    if (z.size() != mu.size() || precision.rows() != z.size() || precision.cols() != z.size())
        throw Error(Errc::DimensionMismatch, "mahalanobis operand dimensions disagree");
    Vec d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = z[i] - mu[i];
    double q = quad_form(d, precision);
    if (q < 0.0) {
        if (q < -1e-12)
            throw Error(Errc::NumericalFailure,
                        "quadratic form " + std::to_string(q) + " below -1e-12");
        q = 0.0;
    }
    return std::sqrt(q);
}

// The external continual learner: classes are finalized exactly once, each
// fold discards its Delta, and scoring routes a query to the top-k nearest
// class Gaussians by average Mahalanobis distance.
class EclRegistry {
public:
    explicit EclRegistry(std::size_t dimension, double epsilon_abs = 1e-10,
                         double epsilon_rel = 1e-4)
        : h_(dimension), shared_(dimension, epsilon_abs, epsilon_rel) {}

    std::size_t dimension() const { return h_; }
    std::size_t size() const { return profiles_.size(); }
    bool empty() const { return profiles_.empty(); }
    const std::vector<ClassProfile>& profiles() const { return profiles_; }
    const SharedCovariance& shared() const { return shared_; }

    const ClassProfile* find(const ClassId& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &profiles_[it->second];
    }

    ClassProfile& profile_at(std::size_t insertion_index) { return profiles_.at(insertion_index); }

    const ClassProfile& finalize_class(const ClassId& id, const std::string& name,
                                       const std::vector<Vec>& tag_embeddings) {
        if (tag_embeddings.empty())
            throw Error(Errc::EmptyInput, "finalize_class: no tag embeddings for '" + name + "'");
        for (const auto& z : tag_embeddings)
            if (z.size() != h_)
                throw Error(Errc::DimensionMismatch,
                            "finalize_class: embedding of dimension " + std::to_string(z.size()) +
                                ", expected " + std::to_string(h_));
        if (by_id_.count(id))
            throw Error(Errc::DuplicateClass, "class id '" + id + "' already finalized");
        if (names_.count(name))
            throw Error(Errc::DuplicateClass, "class name '" + name + "' already finalized");

        const double r = static_cast<double>(tag_embeddings.size());
        if (tag_embeddings.size() == 1)
            log_warning("class '" + name + "' has a single tag embedding; its covariance contribution is zero");

        Vec mean(h_, 0.0);
        for (const auto& z : tag_embeddings)
            for (std::size_t i = 0; i < h_; ++i) mean[i] += z[i];
        for (auto& v : mean) v /= r;

        Mat delta(h_, h_);
        Vec dev(h_);
        for (const auto& z : tag_embeddings) {
            for (std::size_t i = 0; i < h_; ++i) dev[i] = z[i] - mean[i];
            add_scaled_outer(delta, dev, 1.0 / r);
        }
        shared_.fold(delta);

        ClassProfile profile;
        profile.class_id = id;
        profile.name = name;
        profile.mean = std::move(mean);
        profile.tag_count = tag_embeddings.size();
        profile.insertion_index = profiles_.size();
        by_id_.emplace(id, profiles_.size());
        names_.insert(name);
        profiles_.push_back(std::move(profile));
        return profiles_.back();
    }

    const Mat& regularized_precision() const {
        if (profiles_.empty()) throw Error(Errc::NoClasses, "registry has no classes");
        return shared_.precision();
    }

    std::vector<ScoredClass> score_instance(const std::vector<Vec>& tag_embeddings) const {
        if (profiles_.empty()) throw Error(Errc::NoClasses, "registry has no classes");
        if (tag_embeddings.empty()) throw Error(Errc::EmptyInput, "score_instance: no tag embeddings");
        for (const auto& z : tag_embeddings)
            if (z.size() != h_)
                throw Error(Errc::DimensionMismatch,
                            "score_instance: embedding of dimension " + std::to_string(z.size()) +
                                ", expected " + std::to_string(h_));
        const Mat& p = shared_.precision();
        const double m = static_cast<double>(tag_embeddings.size());
        std::vector<ScoredClass> scored;
        scored.reserve(profiles_.size());
        for (const auto& profile : profiles_) {
            double sum = 0.0;
            for (const auto& z : tag_embeddings) sum += mahalanobis(z, profile.mean, p);
            scored.push_back({profile.class_id, sum / m});
        }
        std::sort(scored.begin(), scored.end(), [this](const ScoredClass& a, const ScoredClass& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            return by_id_.at(a.class_id) < by_id_.at(b.class_id);
        });
        return scored;
    }

    std::vector<ClassId> top_k(const std::vector<Vec>& tag_embeddings, std::size_t k) const {
        if (k < 1) throw Error(Errc::InvalidArgument, "top_k: k must be >= 1");
        auto scored = score_instance(tag_embeddings);
        const std::size_t n = std::min(k, scored.size());
        std::vector<ClassId> ids;
        ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) ids.push_back(scored[i].class_id);
        return ids;
    }

    // Rebuild from persisted parts. Validates the invariants the store
    // promises: dimensions agree, insertion indices are 0..n-1, ids and
    // names unique, classes_folded matches the profile count.
    static EclRegistry restore(std::size_t dimension, std::vector<ClassProfile> profiles,
                               SharedCovariance shared) {
        if (shared.dimension() != dimension)
            throw Error(Errc::IntegrityFailure, "covariance dimension does not match registry dimension");
        if (shared.classes_folded() != profiles.size())
            throw Error(Errc::IntegrityFailure, "classes_folded does not match number of class records");
        std::sort(profiles.begin(), profiles.end(),
                  [](const ClassProfile& a, const ClassProfile& b) {
                      return a.insertion_index < b.insertion_index;
                  });
        EclRegistry reg(dimension, shared.epsilon_abs(), shared.epsilon_rel());
        reg.shared_ = std::move(shared);
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            auto& p = profiles[i];
            if (p.insertion_index != i)
                throw Error(Errc::IntegrityFailure, "insertion indices are not contiguous from 0");
            if (p.mean.size() != dimension)
                throw Error(Errc::IntegrityFailure, "class '" + p.name + "' mean has wrong dimension");
            if (p.tag_count < 1)
                throw Error(Errc::IntegrityFailure, "class '" + p.name + "' has tag_count < 1");
            if (!reg.by_id_.emplace(p.class_id, i).second)
                throw Error(Errc::IntegrityFailure, "duplicate class id '" + p.class_id + "'");
            if (!reg.names_.insert(p.name).second)
                throw Error(Errc::IntegrityFailure, "duplicate class name '" + p.name + "'");
        }
        reg.profiles_ = std::move(profiles);
        return reg;
    }

private:
    std::size_t h_;
    std::vector<ClassProfile> profiles_;
    SharedCovariance shared_;
    std::unordered_map<ClassId, std::size_t> by_id_;
    std::unordered_set<std::string> names_;
};

} // namespace inca
