#pragma once

// Piecewise-affine form of a work-conserving policy on the unit simplex,
// restricted to workloads outside the region (hat W >= 1). Each piece is a
// closed polyhedron {W : G W <= h} on which the service is affine,
// R = M W + r0, and serves exactly one unit of normalized capacity with no
// idling, so the leftover W - R is affine and nonnegative. Closures of
// neighbouring pieces overlap on their shared boundary, which is how ties
// such as W^1 = W^2 get both branches.

#include <string>
#include <vector>

#include "mwld/policy.hpp"

namespace mwld {

struct AffinePiece {
    std::string label;
    Mat G;
    Vec h;
    Mat M;
    Vec r0;

    Vec service(const Vec& w) const { return M * w + r0; }
    Vec leftover(const Vec& w) const { return w - service(w); }
    // Largest constraint violation at w (<= 0 inside the piece).
    double excess(const Vec& w) const { return G.rows() ? (G * w - h).maxCoeff() : -kInf; }
};

namespace detail {

struct RowBuilder {
    Eigen::Index k;
    std::vector<Vec> rows;
    std::vector<double> rhs;

    void add(Vec row, double bound) {
        rows.push_back(std::move(row));
        rhs.push_back(bound);
    }
    void finish(AffinePiece& p) const {
        p.G.resize(static_cast<Eigen::Index>(rows.size()), k);
        p.h.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            p.G.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
            p.h[static_cast<Eigen::Index>(i)] = rhs[i];
        }
    }
};

inline Vec unit(Eigen::Index k, Eigen::Index i) {
    Vec e = Vec::Zero(k);
    e[i] = 1.0;
    return e;
}

inline std::string subset_label(const char* prefix, const std::vector<Eigen::Index>& members) {
    std::string s = prefix;
    s += '{';
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(members[i] + 1);
    }
    s += '}';
    return s;
}

inline std::vector<Eigen::Index> members_of(unsigned mask, Eigen::Index k) {
    std::vector<Eigen::Index> m;
    for (Eigen::Index i = 0; i < k; ++i) {
        if (mask & (1u << i)) m.push_back(i);
    }
    return m;
}

// Work-conserving max-weight: serve queue k whenever it holds the largest
// workload and the workload leaves the box, otherwise serve the projection
// onto the simplex. Each support pattern J of the projection is its own piece;
// single-queue patterns are skipped because their closure is the point e_j,
// already covered by the serve-j piece.
inline std::vector<AffinePiece> wc_max_weight_pieces(Eigen::Index k) {
    std::vector<AffinePiece> out;
    for (Eigen::Index q = 0; q < k; ++q) {
        AffinePiece p;
        p.label = "serve" + std::to_string(q + 1);
        RowBuilder rb{k, {}, {}};
        for (Eigen::Index j = 0; j < k; ++j) {
            if (j != q) rb.add(unit(k, j) - unit(k, q), 0.0);
        }
        rb.add(-unit(k, q), -1.0);
        rb.finish(p);
        p.M = Mat::Zero(k, k);
        p.r0 = unit(k, q);
        out.push_back(std::move(p));
    }
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        const auto members = members_of(mask, k);
        if (members.size() < 2) continue;
        const double n = static_cast<double>(members.size());
        Vec share = Vec::Zero(k);  // tau = share . W - 1/n
        for (Eigen::Index j : members) share[j] = 1.0 / n;
        AffinePiece p;
        p.label = subset_label("proj", members);
        RowBuilder rb{k, {}, {}};
        for (Eigen::Index j = 0; j < k; ++j) {
            if (mask & (1u << j)) {
                rb.add(share - unit(k, j), 1.0 / n);  // W_j - tau >= 0
            } else {
                rb.add(unit(k, j) - share, -1.0 / n);  // W_j - tau <= 0
            }
            rb.add(unit(k, j), 1.0);
        }
        rb.add(-Vec::Ones(k), -1.0);
        rb.finish(p);
        p.M = Mat::Zero(k, k);
        p.r0 = Vec::Zero(k);
        for (Eigen::Index j : members) {
            p.M.row(j) = (unit(k, j) - share).transpose();
            p.r0[j] = 1.0 / n;
        }
        out.push_back(std::move(p));
    }
    return out;
}

// Work-conserving GPS: S is the set of queues whose whole workload fits in its
// share; the remaining capacity 1 - sum_S W is split among the others in
// proportion to their weights.
inline std::vector<AffinePiece> gps_pieces(const Vec& weights) {
    const Eigen::Index k = weights.size();
    std::vector<AffinePiece> out;
    for (unsigned mask = 0; mask + 1 < (1u << k); ++mask) {
        const auto served_fully = members_of(mask, k);
        Vec in_s = Vec::Zero(k);
        double phi_rest = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (mask & (1u << j)) in_s[j] = 1.0;
            else phi_rest += weights[j];
        }
        AffinePiece p;
        p.label = subset_label("gps", served_fully);
        RowBuilder rb{k, {}, {}};
        for (Eigen::Index j = 0; j < k; ++j) {
            // W_j <=> phi_j (1 - in_s . W) / phi_rest
            const Vec row = phi_rest * unit(k, j) + weights[j] * in_s;
            if (mask & (1u << j)) rb.add(row, weights[j]);
            else rb.add(-row, -weights[j]);
        }
        rb.add(-Vec::Ones(k), -1.0);
        rb.finish(p);
        p.M = Mat::Zero(k, k);
        p.r0 = Vec::Zero(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            if (mask & (1u << j)) {
                p.M(j, j) = 1.0;
            } else {
                p.M.row(j) = (-weights[j] / phi_rest) * in_s.transpose();
                p.r0[j] = weights[j] / phi_rest;
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

// Strict priority: queues ahead of position p are emptied and the queue at
// position p absorbs the rest of the unit capacity.
inline std::vector<AffinePiece> priority_pieces(const std::vector<Eigen::Index>& order) {
    const Eigen::Index k = static_cast<Eigen::Index>(order.size());
    std::vector<AffinePiece> out;
    Vec ahead = Vec::Zero(k);
    for (Eigen::Index pos = 0; pos < k; ++pos) {
        const Eigen::Index q = order[static_cast<std::size_t>(pos)];
        AffinePiece p;
        p.label = "prio" + std::to_string(q + 1);
        RowBuilder rb{k, {}, {}};
        if (pos > 0) rb.add(ahead, 1.0);
        rb.add(-(ahead + unit(k, q)), -1.0);
        rb.finish(p);
        p.M = Mat::Zero(k, k);
        p.r0 = Vec::Zero(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            if (ahead[j] > 0.0) p.M(j, j) = 1.0;
        }
        p.M.row(q) = -ahead.transpose();
        p.r0[q] = 1.0;
        out.push_back(std::move(p));
        ahead[q] = 1.0;
    }
    return out;
}

}  // namespace detail

// Pieces for `policy` on the unit simplex with k queues. Plain max-weight can
// idle inside the box, so it has no piecewise-affine form without clipping and
// is rejected here.
inline std::vector<AffinePiece> affine_pieces(const Policy& policy, Eigen::Index k) {
    if (k < 1 || k > 8) throw DimensionError("affine pieces support 1..8 queues");
    if (policy.is_wc_max_weight()) return detail::wc_max_weight_pieces(k);
    if (const auto* g = std::get_if<Gps>(&policy.kind())) {
        require_dim(g->weights, k, "GPS weights");
        return detail::gps_pieces(g->weights);
    }
    if (const auto* pr = std::get_if<Priority>(&policy.kind())) {
        if (static_cast<Eigen::Index>(pr->order.size()) != k) throw DimensionError("priority order length");
        return detail::priority_pieces(pr->order);
    }
    throw DomainError("plain max-weight has no piecewise-affine decomposition; use the grid engine");
}

}  // namespace mwld
