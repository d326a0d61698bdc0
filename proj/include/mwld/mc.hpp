#pragma once

// Plain Monte Carlo for P(W_0 >= B) under many-sources scaling: each
// replicate runs T slots from an empty system with L-averaged arrivals.
// Replicate r draws from its own engine derived from (seed, L, r), so results
// do not depend on the thread count.

#include <vector>

#include "mwld/dynamics.hpp"
#include "mwld/parallel.hpp"
#include "mwld/source.hpp"

namespace mwld {

struct OverflowEstimate {
    std::size_t L = 1;
    Eigen::Index T = 1;
    Vec B;
    std::size_t replicates = 0;
    std::size_t hits = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    double decay = kInf;
    // Largest deviation from the normalized-sum recursion seen on any slot
    // (work-conserving max-weight on a simplex only, else 0).
    double sum_identity_error = 0.0;
};

struct McOptions {
    std::size_t threads = 1;
    bool check_sum_identity = true;
};

// 95% Wilson interval; with no successes the one-sided upper limit
// 1 - 0.05^(1/n) is used.
inline std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    if (hits == 0) return {0.0, 1.0 - std::pow(0.05, 1.0 / nn)};
    const double z = 1.959963984540054;
    const double p = static_cast<double>(hits) / nn;
    const double denom = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline OverflowEstimate estimate_overflow(const SourceModel& model, const Policy& policy, const RateRegion& region,
                                          std::size_t L, Eigen::Index T, const Vec& B, std::size_t replicates,
                                          std::uint64_t seed, const McOptions& opt = {}) {
    const Eigen::Index k = model.queues();
    if (region.queues() != k) throw DimensionError("model and region disagree on the number of queues");
    require_dim(B, k, "overflow level");
    if (L < 1) throw DomainError("L must be at least 1");
    if (T < 1) throw DomainError("horizon must be at least 1");
    if (replicates < 1) throw DomainError("replicates must be at least 1");

    const bool check = opt.check_sum_identity && region.is_simplex() && policy.is_wc_max_weight();
    const std::size_t chunks = std::min<std::size_t>(replicates, 64 * std::max<std::size_t>(1, opt.threads));
    std::vector<std::size_t> hits(chunks, 0);
    std::vector<double> err(chunks, 0.0);
    const SeedStream stream{seed};
    parallel_for(chunks, opt.threads, [&](std::size_t c) {
        const std::size_t lo = replicates * c / chunks;
        const std::size_t hi = replicates * (c + 1) / chunks;
        Vec a(k);
        for (std::size_t r = lo; r < hi; ++r) {
            Engine rng = stream.engine(L, r);
            Workload w = Workload::Zero(k);
            for (Eigen::Index s = T; s >= 1; --s) {
                for (Eigen::Index q = 0; q < k; ++q) a[q] = model[q].sample(L, rng);
                const Workload next = step(w, a, policy, region);
                if (check) {
                    const double predicted =
                        std::max(normalized_sum(region, w) - 1.0, 0.0) + normalized_sum(region, a);
                    err[c] = std::max(err[c], std::abs(normalized_sum(region, next) - predicted));
                }
                w = next;
            }
            if ((w.array() >= B.array()).all()) ++hits[c];
        }
    });

    OverflowEstimate out;
    out.L = L;
    out.T = T;
    out.B = B;
    out.replicates = replicates;
    for (std::size_t c = 0; c < chunks; ++c) {
        out.hits += hits[c];
        out.sum_identity_error = std::max(out.sum_identity_error, err[c]);
    }
    out.p_hat = static_cast<double>(out.hits) / static_cast<double>(replicates);
    std::tie(out.ci_lo, out.ci_hi) = wilson_interval(out.hits, replicates);
    out.decay = out.hits == 0 ? kInf : -std::log(out.p_hat) / static_cast<double>(L);
    if (out.decay == 0.0) out.decay = 0.0;  // avoid -0
    return out;
}

inline std::vector<OverflowEstimate> decay_sweep(const SourceModel& model, const Policy& policy,
                                                 const RateRegion& region, const std::vector<std::size_t>& Ls,
                                                 Eigen::Index T, const Vec& B, std::size_t replicates,
                                                 std::uint64_t seed, const McOptions& opt = {}) {
    if (Ls.empty()) throw DomainError("decay sweep needs at least one L");
    for (std::size_t i = 1; i < Ls.size(); ++i) {
        if (Ls[i] <= Ls[i - 1]) throw DomainError("L values must be strictly increasing");
    }
    std::vector<OverflowEstimate> out;
    out.reserve(Ls.size());
    for (std::size_t L : Ls) out.push_back(estimate_overflow(model, policy, region, L, T, B, replicates, seed, opt));
    return out;
}

}  // namespace mwld
