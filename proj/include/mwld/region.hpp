#pragma once

// Service-rate regions: the weighted simplex sum_k r^k / C^k <= 1 and the
// coordinate-convex hull of a vertex list. Both are compact, convex and
// closed under moving any coordinate toward zero.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "mwld/types.hpp"

namespace mwld {

enum class RegionKind { Simplex, VertexPolytope };

class RateRegion {
public:
    static RateRegion simplex(Vec capacities) {
        for (Eigen::Index k = 0; k < capacities.size(); ++k) {
            if (!(capacities[k] > 0.0) || !std::isfinite(capacities[k])) {
                throw DomainError("simplex capacities must be positive and finite");
            }
        }
        if (capacities.size() == 0) throw DimensionError("region needs at least one queue");
        RateRegion r;
        r.kind_ = RegionKind::Simplex;
        r.capacities_ = std::move(capacities);
        return r;
    }

    static RateRegion unit_simplex(Eigen::Index queues) { return simplex(Vec::Ones(queues)); }

    static RateRegion polytope(std::vector<Vec> vertices) {
        if (vertices.empty()) throw DimensionError("polytope needs at least one vertex");
        const Eigen::Index k = vertices.front().size();
        if (k == 0) throw DimensionError("region needs at least one queue");
        Vec caps = Vec::Zero(k);
        for (const Vec& v : vertices) {
            require_dim(v, k, "polytope vertex");
            if (!all_finite_nonneg(v)) throw DomainError("polytope vertices must be nonnegative and finite");
            caps = caps.cwiseMax(v);
        }
        if ((caps.array() <= 0.0).any()) throw DomainError("every queue needs a positive maximum rate");
        RateRegion r;
        r.kind_ = RegionKind::VertexPolytope;
        r.capacities_ = caps;
        r.vertices_ = std::move(vertices);
        return r;
    }

    RegionKind kind() const { return kind_; }
    bool is_simplex() const { return kind_ == RegionKind::Simplex; }
    Eigen::Index queues() const { return capacities_.size(); }

    // C^k, the largest rate queue k can receive.
    const Vec& capacities() const { return capacities_; }

    // Extreme points. For the simplex these are C^k e_k followed by the origin.
    std::vector<Vec> vertices() const {
        if (kind_ == RegionKind::VertexPolytope) return vertices_;
        std::vector<Vec> out;
        for (Eigen::Index k = 0; k < queues(); ++k) {
            Vec v = Vec::Zero(queues());
            v[k] = capacities_[k];
            out.push_back(v);
        }
        out.push_back(Vec::Zero(queues()));
        return out;
    }

    const std::vector<Vec>& vertex_list() const { return vertices_; }

private:
    RegionKind kind_ = RegionKind::Simplex;
    Vec capacities_;
    std::vector<Vec> vertices_;
};

namespace detail {

// min |A x - b| subject to x >= 0 (Lawson-Hanson active set).
inline Vec nnls(const Mat& A, const Vec& b) {
    const Eigen::Index n = A.cols();
    Vec x = Vec::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-11 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());
    const double zero = 1e-14;
    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        Mat Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) Ap.col(static_cast<Eigen::Index>(i)) = A.col(idx[i]);
        const Vec sp = Ap.colPivHouseholderQr().solve(b);
        Vec s = Vec::Zero(n);
        for (std::size_t i = 0; i < idx.size(); ++i) s[idx[i]] = sp[static_cast<Eigen::Index>(i)];
        return s;
    };
    for (int outer = 0; outer < 4 * static_cast<int>(n) + 10; ++outer) {
        const Vec grad = A.transpose() * (b - A * x);
        Eigen::Index enter = -1;
        double best = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && grad[j] > best) {
                best = grad[j];
                enter = j;
            }
        }
        if (enter < 0) break;
        passive[static_cast<std::size_t>(enter)] = true;
        for (int inner = 0; inner <= n; ++inner) {
            const Vec s = solve_passive();
            double alpha = 1.0;
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
                    feasible = false;
                    const double denom = x[j] - s[j];
                    if (denom > 0.0) alpha = std::min(alpha, x[j] / denom);
                }
            }
            if (feasible) {
                x = s;
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x[j] <= zero) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    return x;
}

// Euclidean projection onto the down-closed convex hull of the vertices:
//   min |V lambda - m - w|^2  over lambda, m >= 0 with sum lambda = 1,
// and p = V lambda - m. The equality enters as a heavily weighted row; the
// support found by NNLS is then re-solved with the equality imposed exactly.
inline Vec polytope_projection(const RateRegion& region, const Vec& w) {
    const auto& verts = region.vertex_list();
    const Eigen::Index k = region.queues();
    const Eigen::Index nv = static_cast<Eigen::Index>(verts.size());
    const Eigen::Index n = nv + k;
    Mat V(k, nv);
    for (Eigen::Index v = 0; v < nv; ++v) V.col(v) = verts[static_cast<std::size_t>(v)];
    Mat B(k, n);
    B << V, -Mat::Identity(k, k);

    const double weight = 1e3 * std::max(1.0, V.cwiseAbs().maxCoeff());
    Mat A(k + 1, n);
    A.topRows(k) = B;
    A.row(k).setZero();
    A.row(k).head(nv).setConstant(weight);
    Vec rhs(k + 1);
    rhs << w, weight;
    Vec x = nnls(A, rhs);

    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (x[j] > 0.0) support.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(support.size());
    Mat kkt = Mat::Zero(m + 1, m + 1);
    Vec r = Vec::Zero(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vec ci = B.col(support[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < m; ++j) kkt(i, j) = ci.dot(B.col(support[static_cast<std::size_t>(j)]));
        r[i] = ci.dot(w);
        if (support[static_cast<std::size_t>(i)] < nv) kkt(i, m) = kkt(m, i) = 1.0;
    }
    r[m] = 1.0;
    const Vec polished = kkt.fullPivLu().solve(r);
    if ((kkt * polished - r).cwiseAbs().maxCoeff() <= 1e-10 && (polished.head(m).array() >= 0.0).all()) {
        x.setZero();
        for (Eigen::Index i = 0; i < m; ++i) x[support[static_cast<std::size_t>(i)]] = polished[i];
    } else {
        x.head(nv) /= x.head(nv).sum();
    }
    return (B * x).cwiseMax(0.0);
}

}  // namespace detail

// sum_k x^k / C^k.
inline double normalized_sum(const RateRegion& region, const Vec& x) {
    if (!region.is_simplex()) throw UnsupportedRegion("normalized_sum needs a simplex region");
    require_dim(x, region.queues(), "normalized_sum");
    return x.cwiseQuotient(region.capacities()).sum();
}

inline bool contains(const RateRegion& region, const Vec& r) {
    require_dim(r, region.queues(), "contains");
    if ((r.array() < -kTol).any()) return false;
    if (region.is_simplex()) return normalized_sum(region, r.cwiseMax(0.0)) <= 1.0 + kTol;
    const Vec p = detail::polytope_projection(region, r.cwiseMax(0.0));
    return (p - r.cwiseMax(0.0)).cwiseQuotient(region.capacities()).cwiseAbs().maxCoeff() <= kTol;
}

// Euclidean projection of w >= 0 onto the region. Inside the region this is w
// itself. For the simplex the projection is the water-filling solution
// r^k = [w^k - theta / C^k]^+ with theta chosen so that sum r^k / C^k = 1.
inline Vec project(const RateRegion& region, const Vec& w) {
    require_dim(w, region.queues(), "project");
    const Vec wp = w.cwiseMax(0.0);
    if (!region.is_simplex()) {
        if (contains(region, wp)) return wp;
        return detail::polytope_projection(region, wp);
    }
    const Vec& c = region.capacities();
    if (wp.cwiseQuotient(c).sum() <= 1.0) return wp;

    const Eigen::Index k = region.queues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    // Coordinate q leaves the support once theta exceeds w^q C^q.
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return wp[a] * c[a] > wp[b] * c[b]; });
    double sum_w = 0.0, sum_inv = 0.0, theta = 0.0;
    for (std::size_t m = 0; m < order.size(); ++m) {
        const Eigen::Index q = order[m];
        sum_w += wp[q] / c[q];
        sum_inv += 1.0 / (c[q] * c[q]);
        theta = (sum_w - 1.0) / sum_inv;
        const double next = m + 1 < order.size() ? wp[order[m + 1]] * c[order[m + 1]] : 0.0;
        if (theta >= next) break;
    }
    Vec r(k);
    for (Eigen::Index q = 0; q < k; ++q) r[q] = std::max(0.0, wp[q] - theta / c[q]);
    return r;
}

// Extreme points of argmax_{R in region} <R, w>. With w = 0 the whole region
// maximizes, so every vertex is returned.
inline std::vector<Vec> max_weight_set(const RateRegion& region, const Vec& w) {
    require_dim(w, region.queues(), "max_weight_set");
    const std::vector<Vec> verts = region.vertices();
    if ((w.array() <= 0.0).all()) return verts;

    double best = -kInf;
    for (const Vec& v : verts) best = std::max(best, v.dot(w));
    const double slack = kTol * std::max(1.0, std::abs(best));
    std::vector<Vec> out;
    auto push_unique = [&out](const Vec& v) {
        for (const Vec& o : out) {
            if ((o - v).cwiseAbs().maxCoeff() <= kTol) return;
        }
        out.push_back(v);
    };
    for (const Vec& v : verts) {
        if (v.dot(w) < best - slack) continue;
        push_unique(v);
        // Coordinates with zero weight can be dropped without leaving the argmax.
        if (!region.is_simplex()) {
            Vec dropped = v;
            bool changed = false;
            for (Eigen::Index q = 0; q < w.size(); ++q) {
                if (w[q] <= 0.0 && dropped[q] != 0.0) {
                    dropped[q] = 0.0;
                    changed = true;
                }
            }
            if (changed) push_unique(dropped);
        }
    }
    return out;
}

}  // namespace mwld
