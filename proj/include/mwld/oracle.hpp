#pragma once

// Brute-force ground truth for tiny instances. Every arrival slot is drawn
// from a delta-grid, every selection the policy allows is followed, and the
// cheapest path whose final workload lands within the target tolerance of b
// wins. Nothing here shares code with the rate-function engines beyond the
// policy and the source model.

#include <cstdint>
#include <functional>
#include <vector>

#include "mwld/policy.hpp"
#include "mwld/source.hpp"

namespace mwld {

struct OracleConfig {
    double delta = 0.02;
    Eigen::Index max_horizon = 3;
    double max_coordinate = 0.0;    // <= 0: use b^k + t - 1 per queue
    double target_tolerance = -1.0;  // < 0: delta / 2
    double state_budget = 1e8;

    double tolerance() const { return target_tolerance < 0.0 ? 0.5 * delta : target_tolerance; }
};

struct OracleResult {
    double value = kInf;
    ArrivalPath argmin_path;
    std::uint64_t leaves = 0;
};

namespace detail {

inline Vec oracle_box(const Vec& b, Eigen::Index t, const OracleConfig& cfg) {
    if (cfg.max_coordinate > 0.0) return Vec::Constant(b.size(), cfg.max_coordinate);
    return b.array() + static_cast<double>(t - 1);
}

}  // namespace detail

// Largest change of Lambda*_k over any step of length h inside [0, top]. For a
// convex function the increments are monotone, so the extremes sit at the ends.
inline double rate_modulus(const QueueSource& q, double h, double top) {
    const double at_zero = std::abs(q.rate_unchecked(h) - q.rate_unchecked(0.0));
    const double at_top = std::abs(q.rate_unchecked(top + h) - q.rate_unchecked(top));
    return std::max(at_zero, at_top);
}

// Agreement allowance between the oracle and an exact engine: rounding every
// slot of an optimal path to the grid moves each of the K t terms by at most
// the modulus at delta, and accepting terminal points within the tolerance
// moves the last slot by at most the modulus at that tolerance.
inline double oracle_slack(const SourceModel& model, const Vec& b, Eigen::Index t, const OracleConfig& cfg) {
    const Vec top = detail::oracle_box(b, t, cfg);
    double slack = 0.0;
    for (Eigen::Index k = 0; k < model.queues(); ++k) {
        slack += static_cast<double>(t) * rate_modulus(model[k], cfg.delta, top[k]);
        slack += rate_modulus(model[k], cfg.tolerance(), top[k]);
    }
    return slack;
}

inline OracleResult brute_force_it(const SourceModel& model, const Workload& b, Eigen::Index t,
                                   const OracleConfig& cfg = {}, const Policy& policy = Policy::wc_max_weight()) {
    const Eigen::Index k = model.queues();
    if (k != 2) throw DimensionError("the oracle handles two queues");
    require_dim(b, k, "target workload");
    if (t < 1 || t > cfg.max_horizon || cfg.max_horizon > 3) throw DomainError("oracle horizon must be in 1..3");
    if (!(cfg.delta > 0.0)) throw DomainError("oracle grid step must be positive");
    const RateRegion region = RateRegion::unit_simplex(k);
    const Vec top = detail::oracle_box(b, t, cfg);
    const double tol = cfg.tolerance();

    std::vector<int> n(static_cast<std::size_t>(k));
    double per_slot = 1.0;
    for (Eigen::Index q = 0; q < k; ++q) {
        n[static_cast<std::size_t>(q)] = static_cast<int>(std::floor(top[q] / cfg.delta + 1e-9)) + 1;
        per_slot *= n[static_cast<std::size_t>(q)];
    }
    if (std::pow(per_slot, static_cast<double>(t - 1)) > cfg.state_budget) {
        throw ResourceError("oracle enumeration needs " + std::to_string(std::pow(per_slot, double(t - 1))) +
                            " paths, over the budget of " + std::to_string(cfg.state_budget));
    }
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(k));
    for (Eigen::Index q = 0; q < k; ++q) {
        auto& c = cost[static_cast<std::size_t>(q)];
        c.resize(static_cast<std::size_t>(n[static_cast<std::size_t>(q)]));
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = model[q].rate_unchecked(static_cast<double>(i) * cfg.delta);
    }

    OracleResult best;
    Mat path = Mat::Zero(k, t);
    Mat best_path = Mat::Zero(k, t);

    // Leftovers reachable from w, one per distinct selection.
    auto leftovers = [&](const Vec& w) {
        std::vector<Vec> out;
        for (const Vec& r : selection_branches(policy, region, w)) {
            const Vec l = (w - r).cwiseMax(0.0);
            bool seen = false;
            for (const Vec& o : out) seen = seen || (o - l).cwiseAbs().maxCoeff() <= 1e-12;
            if (!seen) out.push_back(l);
        }
        return out;
    };

    std::function<void(const Vec&, Eigen::Index, double)> descend = [&](const Vec& w, Eigen::Index s, double acc) {
        for (const Vec& l : leftovers(w)) {
            if (s == 1) {
                // Terminal slot: grid arrivals g with |l + g - b| <= tol.
                int lo[2], hi[2];
                bool empty = false;
                for (Eigen::Index q = 0; q < 2; ++q) {
                    const double need = b[q] - l[q];
                    lo[q] = std::max(0, static_cast<int>(std::ceil((need - tol) / cfg.delta - 1e-9)));
                    hi[q] = std::min(n[static_cast<std::size_t>(q)] - 1,
                                     static_cast<int>(std::floor((need + tol) / cfg.delta + 1e-9)));
                    empty = empty || lo[q] > hi[q];
                }
                if (empty) continue;
                for (int i = lo[0]; i <= hi[0]; ++i) {
                    for (int j = lo[1]; j <= hi[1]; ++j) {
                        ++best.leaves;
                        const double c = acc + cost[0][static_cast<std::size_t>(i)] + cost[1][static_cast<std::size_t>(j)];
                        if (c < best.value) {
                            best.value = c;
                            path(0, 0) = i * cfg.delta;
                            path(1, 0) = j * cfg.delta;
                            best_path = path;
                        }
                    }
                }
                continue;
            }
            for (int i = 0; i < n[0]; ++i) {
                for (int j = 0; j < n[1]; ++j) {
                    const double c = acc + cost[0][static_cast<std::size_t>(i)] + cost[1][static_cast<std::size_t>(j)];
                    if (c >= best.value) continue;
                    const Vec a = make_vec({i * cfg.delta, j * cfg.delta});
                    path.col(s - 1) = a;
                    descend(l + a, s - 1, c);
                }
            }
        }
    };
    descend(Vec::Zero(k), t, 0.0);
    if (std::isfinite(best.value)) best.argmin_path = ArrivalPath(best_path);
    return best;
}

// Grid point of the region closest to w.
inline Vec brute_force_projection(const RateRegion& region, const Vec& w, double delta) {
    const Eigen::Index k = region.queues();
    require_dim(w, k, "brute_force_projection");
    if (!(delta > 0.0)) throw DomainError("grid step must be positive");
    std::vector<int> n(static_cast<std::size_t>(k));
    std::size_t total = 1;
    for (Eigen::Index q = 0; q < k; ++q) {
        n[static_cast<std::size_t>(q)] = static_cast<int>(std::floor(region.capacities()[q] / delta + 1e-9)) + 1;
        total *= static_cast<std::size_t>(n[static_cast<std::size_t>(q)]);
    }
    Vec best = Vec::Zero(k);
    double best_d = kInf;
    Vec p(k);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (Eigen::Index q = 0; q < k; ++q) {
            p[q] = static_cast<double>(rest % static_cast<std::size_t>(n[static_cast<std::size_t>(q)])) * delta;
            rest /= static_cast<std::size_t>(n[static_cast<std::size_t>(q)]);
        }
        if (!contains(region, p)) continue;
        const double d = (p - w).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = p;
        }
    }
    return best;
}

}  // namespace mwld
