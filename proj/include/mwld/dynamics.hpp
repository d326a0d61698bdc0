#pragma once

// Workload recursion W_{s-1} = [W_s - R_s]^+ + a_s, iterated from slot t down
// to slot 1, and the single-queue reduction of the normalized sum workload.

#include <optional>
#include <vector>

#include "mwld/policy.hpp"

namespace mwld {

inline Workload step(const Workload& w, const Vec& a_slot, const Policy& policy, const RateRegion& region) {
    require_dim(a_slot, region.queues(), "step arrivals");
    if (!all_finite_nonneg(a_slot)) throw DomainError("arrivals must be finite and nonnegative");
    const Vec r = select(policy, region, w);
    return (w - r).cwiseMax(0.0) + a_slot;
}

namespace detail {

inline Workload checked_initial(const ArrivalPath& path, const Policy& policy, const RateRegion& region,
                                const std::optional<Workload>& w_init) {
    if (path.queues() != region.queues()) throw DimensionError("arrival path and region disagree on the number of queues");
    if (!w_init) return Workload::Zero(region.queues());
    require_dim(*w_init, region.queues(), "initial workload");
    if (!all_finite_nonneg(*w_init)) throw InitError("initial workload must be finite and nonnegative");
    if (policy.is_wc_max_weight()) {
        if (!contains(region, *w_init)) throw InitError("initial workload must lie in the rate region");
    } else if (w_init->cwiseAbs().maxCoeff() > 0.0) {
        throw InitError("nonzero initial workload is only supported for work-conserving max-weight");
    }
    return *w_init;
}

}  // namespace detail

// (W_t, W_{t-1}, ..., W_0).
inline std::vector<Workload> trajectory(const ArrivalPath& path, const Policy& policy, const RateRegion& region,
                                        const std::optional<Workload>& w_init = std::nullopt) {
    std::vector<Workload> out;
    out.reserve(static_cast<std::size_t>(path.horizon() + 1));
    Workload w = detail::checked_initial(path, policy, region, w_init);
    out.push_back(w);
    for (Eigen::Index s = path.horizon(); s >= 1; --s) {
        w = step(w, path.slot(s), policy, region);
        out.push_back(w);
    }
    return out;
}

// W_0 = G_t(path), starting from w_init (default empty) at time -t.
inline Workload finite_horizon(const ArrivalPath& path, const Policy& policy, const RateRegion& region,
                               const std::optional<Workload>& w_init = std::nullopt) {
    Workload w = detail::checked_initial(path, policy, region, w_init);
    for (Eigen::Index s = path.horizon(); s >= 1; --s) w = step(w, path.slot(s), policy, region);
    return w;
}

// Replays a path with an explicit service vector per slot, service[i] applied
// at the start of slot t - i. Used to check branch sequences recorded by the
// rate-function engines.
inline std::vector<Workload> replay(const ArrivalPath& path, const std::vector<Vec>& service) {
    if (static_cast<Eigen::Index>(service.size()) != path.horizon()) {
        throw DimensionError("replay needs one service vector per slot");
    }
    std::vector<Workload> out;
    Workload w = Workload::Zero(path.queues());
    out.push_back(w);
    for (Eigen::Index s = path.horizon(); s >= 1; --s) {
        const Vec& r = service[static_cast<std::size_t>(path.horizon() - s)];
        w = (w - r).cwiseMax(0.0) + path.slot(s);
        out.push_back(w);
    }
    return out;
}

// max over 1 <= u <= t of hat a(0,u] - (u - 1): the normalized sum workload at
// time 0 under any work-conserving policy on the simplex.
inline double sum_workload(const ArrivalPath& path, const RateRegion& region) {
    if (!region.is_simplex()) throw UnsupportedRegion("sum_workload needs a simplex region");
    double best = 0.0;
    double acc = 0.0;
    for (Eigen::Index u = 1; u <= path.horizon(); ++u) {
        acc += normalized_sum(region, path.slot(u));
        best = std::max(best, acc - static_cast<double>(u - 1));
    }
    return best;
}

// Smallest s in [1, t-1] such that the workload at time -s, built from the
// slots older than s, lies in the region. A one-slot path returns 1 since W_1
// is the (empty) initial condition.
inline Eigen::Index settling_time(const ArrivalPath& path, const RateRegion& region) {
    if (!region.is_simplex()) throw UnsupportedRegion("settling_time needs a simplex region");
    const Eigen::Index t = path.horizon();
    if (t <= 1) return 1;
    for (Eigen::Index s = 1; s < t; ++s) {
        const Workload w = finite_horizon(path.window(s, t), Policy::wc_max_weight(), region);
        if (contains(region, w)) return s;
    }
    throw NoSettlingTime("workload never returns to the rate region within the supplied horizon");
}

}  // namespace mwld
