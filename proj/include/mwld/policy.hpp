#pragma once

// Scheduler selections: rate vector served in a slot given the workload at its
// start.

#include <algorithm>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "mwld/region.hpp"

namespace mwld {

struct LowestIndex {};
struct ExplicitBranch {
    std::size_t index = 0;
};
using TieBreak = std::variant<LowestIndex, ExplicitBranch>;

struct MaxWeight {};
struct WorkConservingMaxWeight {};
struct Gps {
    Vec weights;
};
struct Priority {
    std::vector<Eigen::Index> order;  // zero-based queue indices, highest priority first
};

class Policy {
public:
    using Kind = std::variant<MaxWeight, WorkConservingMaxWeight, Gps, Priority>;

    Policy() : kind_(WorkConservingMaxWeight{}) {}
    Policy(Kind kind, TieBreak tie = LowestIndex{}) : kind_(std::move(kind)), tie_(tie) { validate(); }

    static Policy max_weight(TieBreak tie = LowestIndex{}) { return Policy(MaxWeight{}, tie); }
    static Policy wc_max_weight(TieBreak tie = LowestIndex{}) { return Policy(WorkConservingMaxWeight{}, tie); }
    static Policy gps(Vec weights) { return Policy(Gps{std::move(weights)}); }
    static Policy priority(std::vector<Eigen::Index> order) { return Policy(Priority{std::move(order)}); }

    const Kind& kind() const { return kind_; }
    const TieBreak& tie_break() const { return tie_; }

    bool is_max_weight() const { return std::holds_alternative<MaxWeight>(kind_); }
    bool is_wc_max_weight() const { return std::holds_alternative<WorkConservingMaxWeight>(kind_); }
    bool is_gps() const { return std::holds_alternative<Gps>(kind_); }
    bool is_priority() const { return std::holds_alternative<Priority>(kind_); }

    std::string name() const {
        if (is_max_weight()) return "mw";
        if (is_wc_max_weight()) return "wcmw";
        if (is_gps()) return "gps";
        return "prio";
    }

private:
    void validate() const {
        if (const auto* g = std::get_if<Gps>(&kind_)) {
            if (g->weights.size() == 0) throw DomainError("GPS needs weights");
            for (Eigen::Index k = 0; k < g->weights.size(); ++k) {
                if (!(g->weights[k] > 0.0) || !std::isfinite(g->weights[k])) {
                    throw DomainError("GPS weights must be positive and finite");
                }
            }
        }
        if (const auto* p = std::get_if<Priority>(&kind_)) {
            std::vector<Eigen::Index> sorted = p->order;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                if (sorted[i] != static_cast<Eigen::Index>(i)) throw DomainError("priority order must be a permutation");
            }
            if (sorted.empty()) throw DomainError("priority order is empty");
        }
    }

    Kind kind_;
    TieBreak tie_ = LowestIndex{};
};

namespace detail {

inline bool in_open_box(const RateRegion& region, const Vec& w) {
    return (w.array() < region.capacities().array()).all();
}

inline Vec pick_tie(const std::vector<Vec>& set, const TieBreak& tie) {
    if (const auto* e = std::get_if<ExplicitBranch>(&tie)) {
        if (e->index >= set.size()) {
            throw DomainError("explicit tie-break index " + std::to_string(e->index) + " out of range (" +
                              std::to_string(set.size()) + " branches)");
        }
        return set[e->index];
    }
    return set.front();
}

// Work-conserving GPS on the simplex, in normalized units: each backlogged queue
// gets a weight-proportional share of the leftover capacity, and any queue that
// needs less than its share hands the surplus back.
inline Vec gps_select(const RateRegion& region, const Vec& phi, const Vec& w) {
    const Vec& c = region.capacities();
    const Eigen::Index k = region.queues();
    require_dim(phi, k, "GPS weights");
    const Vec need = w.cwiseQuotient(c);
    Vec served = Vec::Zero(k);
    std::vector<bool> active(static_cast<std::size_t>(k), true);
    double capacity = 1.0;
    for (;;) {
        double weight = 0.0;
        for (Eigen::Index q = 0; q < k; ++q) {
            if (active[static_cast<std::size_t>(q)]) weight += phi[q];
        }
        if (weight <= 0.0 || capacity <= 0.0) break;
        bool capped = false;
        for (Eigen::Index q = 0; q < k; ++q) {
            if (!active[static_cast<std::size_t>(q)]) continue;
            if (need[q] <= capacity * phi[q] / weight) {
                served[q] = need[q];
                active[static_cast<std::size_t>(q)] = false;
                capped = true;
            }
        }
        if (capped) {
            capacity = 1.0;
            for (Eigen::Index q = 0; q < k; ++q) {
                if (!active[static_cast<std::size_t>(q)]) capacity -= served[q];
            }
            continue;
        }
        for (Eigen::Index q = 0; q < k; ++q) {
            if (active[static_cast<std::size_t>(q)]) served[q] = capacity * phi[q] / weight;
        }
        break;
    }
    return served.cwiseProduct(c);
}

inline Vec priority_select(const RateRegion& region, const std::vector<Eigen::Index>& order, const Vec& w) {
    const Vec& c = region.capacities();
    if (static_cast<Eigen::Index>(order.size()) != region.queues()) {
        throw DimensionError("priority order length does not match the number of queues");
    }
    Vec r = Vec::Zero(region.queues());
    double leftover = 1.0;
    for (Eigen::Index q : order) {
        const double s = std::min(w[q] / c[q], leftover);
        r[q] = s * c[q];
        leftover -= s;
    }
    return r;
}

}  // namespace detail

inline Vec select(const Policy& policy, const RateRegion& region, const Workload& w) {
    require_dim(w, region.queues(), "select");
    if (!all_finite_nonneg(w)) throw DomainError("workload must be finite and nonnegative");
    return std::visit(
        [&](const auto& kind) -> Vec {
            using K = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<K, MaxWeight>) {
                return detail::pick_tie(max_weight_set(region, w), policy.tie_break());
            } else if constexpr (std::is_same_v<K, WorkConservingMaxWeight>) {
                if (detail::in_open_box(region, w)) return project(region, w);
                return detail::pick_tie(max_weight_set(region, w), policy.tie_break());
            } else if constexpr (std::is_same_v<K, Gps>) {
                if (!region.is_simplex()) throw UnsupportedRegion("GPS needs a simplex region");
                return detail::gps_select(region, kind.weights, w);
            } else {
                if (!region.is_simplex()) throw UnsupportedRegion("priority needs a simplex region");
                return detail::priority_select(region, kind.order, w);
            }
        },
        policy.kind());
}

// Every selection the policy may make at w. The rate-function engines branch
// over all of them instead of committing to the tie-break.
inline std::vector<Vec> selection_branches(const Policy& policy, const RateRegion& region, const Workload& w) {
    require_dim(w, region.queues(), "selection_branches");
    if (policy.is_max_weight()) return max_weight_set(region, w);
    if (policy.is_wc_max_weight()) {
        if (detail::in_open_box(region, w)) return {project(region, w)};
        return max_weight_set(region, w);
    }
    return {select(policy, region, w)};
}

}  // namespace mwld
