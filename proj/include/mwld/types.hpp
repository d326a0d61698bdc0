#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "mwld/errors.hpp"

namespace mwld {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Per-queue work amounts. Workloads and rate vectors share the representation;
// the aliases document intent at API boundaries.
using Workload = Vec;
using RateVector = Vec;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Absolute tolerance for membership, ties, and box boundaries, in normalized
// work units.
inline constexpr double kTol = 1e-9;

inline Vec make_vec(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

inline void require_dim(const Vec& v, Eigen::Index k, const char* what) {
    if (v.size() != k) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(k) +
                             ", got " + std::to_string(v.size()));
    }
}

inline bool all_finite_nonneg(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || v[i] < 0.0) return false;
    }
    return true;
}

// Work increments indexed by queue and slot. Slot s (1-based) carries the work
// that arrives at physical time -s, so slot t is the oldest and slot 1 the most
// recent.
class ArrivalPath {
public:
    ArrivalPath() = default;
    ArrivalPath(Eigen::Index queues, Eigen::Index horizon) : m_(Mat::Zero(queues, horizon)) {}
    explicit ArrivalPath(Mat increments) : m_(std::move(increments)) {
        for (Eigen::Index i = 0; i < m_.size(); ++i) {
            if (!std::isfinite(m_.data()[i]) || m_.data()[i] < 0.0) {
                throw DomainError("arrival increments must be finite and nonnegative");
            }
        }
    }

    // Every slot equal to `rate`.
    static ArrivalPath constant(const Vec& rate, Eigen::Index horizon) {
        Mat m(rate.size(), horizon);
        for (Eigen::Index s = 0; s < horizon; ++s) m.col(s) = rate;
        return ArrivalPath(std::move(m));
    }

    Eigen::Index queues() const { return m_.rows(); }
    Eigen::Index horizon() const { return m_.cols(); }

    Vec slot(Eigen::Index s) const { return m_.col(s - 1); }
    void set_slot(Eigen::Index s, const Vec& a) {
        require_dim(a, queues(), "ArrivalPath::set_slot");
        if (!all_finite_nonneg(a)) throw DomainError("arrival increments must be finite and nonnegative");
        m_.col(s - 1) = a;
    }
    double operator()(Eigen::Index queue, Eigen::Index s) const { return m_(queue, s - 1); }

    // a(m1, m2]: total work over slots m1+1..m2.
    Vec total(Eigen::Index from, Eigen::Index to) const {
        Vec sum = Vec::Zero(queues());
        for (Eigen::Index s = from + 1; s <= to; ++s) sum += m_.col(s - 1);
        return sum;
    }
    Vec total() const { return total(0, horizon()); }

    // Slots from+1..to renumbered as 1..to-from.
    ArrivalPath window(Eigen::Index from, Eigen::Index to) const {
        return ArrivalPath(Mat(m_.middleCols(from, to - from)));
    }

    // `older` is placed before this path in time: its slots follow ours.
    ArrivalPath followed_by_older(const ArrivalPath& older) const {
        Mat m(queues(), horizon() + older.horizon());
        m << m_, older.m_;
        return ArrivalPath(std::move(m));
    }

    const Mat& matrix() const { return m_; }

private:
    Mat m_;
};

}  // namespace mwld
