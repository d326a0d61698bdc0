#pragma once

// Arrival models for the many-sources regime: the per-slot arrival to queue k
// is the average of L i.i.d. copies of a base source. Each model carries the
// convex conjugate Lambda* of its per-slot cumulant, which is the cost of
// sustaining a given per-slot rate, and a sampler for the L-averaged slot.

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mwld/types.hpp"

namespace mwld {

using Engine = std::mt19937_64;

// Counter-based seeding: the engine for a given (replicate, stream) pair depends
// only on the root seed and the counters, never on the order in which engines
// are created.
struct SeedStream {
    std::uint64_t seed = 0;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        return mix(mix(mix(seed ^ 0x6a09e667f3bcc908ULL) ^ a) + b * 0x2545f4914f6cdd1dULL) ^ mix(c);
    }

    Engine engine(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        return Engine(derive(a, b, c));
    }
};

// Compound Poisson arrivals with exponential packet sizes: Poisson(lambda)
// packets per slot, each of mean size 1/mu. The rate function is the closed
// form mu (sqrt(x) - sqrt(lambda))^2, which vanishes at x = lambda; note that
// the sampler's mean is lambda / mu.
struct CompoundPoissonExp {
    double lambda = 0.1;
    double mu = 0.01;
};

// i.i.d. exponential increments with rate nu (mean 1/nu).
struct ExpIncrement {
    double nu = 2.0;
};

struct Deterministic {
    double m = 0.0;
};

// Arbitrary convex rate function with its zero at `mean`. Derivatives are
// optional; missing ones fall back to finite differences.
struct Custom {
    std::string name = "custom";
    std::function<double(double)> rate;
    double mean = 0.0;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
    std::function<double(double)> cumulant;
    std::function<double(std::size_t, Engine&)> sampler;
    double sampler_mean = 0.0;
};

class QueueSource {
public:
    using Kind = std::variant<CompoundPoissonExp, ExpIncrement, Deterministic, Custom>;

    QueueSource() : kind_(CompoundPoissonExp{}) {}
    QueueSource(Kind kind) : kind_(std::move(kind)) { validate(); }

    const Kind& kind() const { return kind_; }

    std::string name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) return "cpe";
                else if constexpr (std::is_same_v<K, ExpIncrement>) return "expinc";
                else if constexpr (std::is_same_v<K, Deterministic>) return "det";
                else return k.name;
            },
            kind_);
    }

    // Zero of the rate function.
    double mean() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) return k.lambda;
                else if constexpr (std::is_same_v<K, ExpIncrement>) return 1.0 / k.nu;
                else if constexpr (std::is_same_v<K, Deterministic>) return k.m;
                else return k.mean;
            },
            kind_);
    }

    // Expected value of one sampled slot.
    double sampler_mean() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) return k.lambda / k.mu;
                else if constexpr (std::is_same_v<K, ExpIncrement>) return 1.0 / k.nu;
                else if constexpr (std::is_same_v<K, Deterministic>) return k.m;
                else return k.sampler_mean;
            },
            kind_);
    }

    // Lambda*(x) for x >= 0; +inf outside the effective domain.
    double rate(double x) const {
        if (x < 0.0 || std::isnan(x)) throw DomainError("rate function argument must be nonnegative");
        return rate_unchecked(x);
    }

    double rate_unchecked(double x) const {
        return std::visit(
            [x](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) {
                    const double d = std::sqrt(x) - std::sqrt(k.lambda);
                    return k.mu * d * d;
                } else if constexpr (std::is_same_v<K, ExpIncrement>) {
                    if (x <= 0.0) return kInf;
                    return k.nu * x - 1.0 - std::log(k.nu * x);
                } else if constexpr (std::is_same_v<K, Deterministic>) {
                    return std::abs(x - k.m) <= kTol ? 0.0 : kInf;
                } else {
                    return k.rate(x);
                }
            },
            kind_);
    }

    // First and second derivative on x > 0.
    std::pair<double, double> derivatives(double x) const {
        return std::visit(
            [this, x](const auto& k) -> std::pair<double, double> {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) {
                    const double sx = std::sqrt(x);
                    const double sl = std::sqrt(k.lambda);
                    return {k.mu * (1.0 - sl / sx), k.mu * sl / (2.0 * x * sx)};
                } else if constexpr (std::is_same_v<K, ExpIncrement>) {
                    return {k.nu - 1.0 / x, 1.0 / (x * x)};
                } else if constexpr (std::is_same_v<K, Deterministic>) {
                    throw DomainError("deterministic sources have no smooth rate function");
                } else {
                    if (k.d1 && k.d2) return {k.d1(x), k.d2(x)};
                    return finite_difference(x);
                }
            },
            kind_);
    }

    // One slot of the L-averaged process.
    double sample(std::size_t L, Engine& rng) const {
        if (L == 0) throw DomainError("number of sources must be at least 1");
        return std::visit(
            [L, &rng](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                const double l = static_cast<double>(L);
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) {
                    std::poisson_distribution<long long> packets(l * k.lambda);
                    const long long n = packets(rng);
                    if (n == 0) return 0.0;
                    std::gamma_distribution<double> work(static_cast<double>(n), 1.0 / k.mu);
                    return work(rng) / l;
                } else if constexpr (std::is_same_v<K, ExpIncrement>) {
                    std::gamma_distribution<double> avg(l, 1.0 / (l * k.nu));
                    return avg(rng);
                } else if constexpr (std::is_same_v<K, Deterministic>) {
                    return k.m;
                } else {
                    if (!k.sampler) throw DomainError("custom source '" + k.name + "' has no sampler");
                    return k.sampler(L, rng);
                }
            },
            kind_);
    }

private:
    void validate() const {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CompoundPoissonExp>) {
                    if (!(k.lambda > 0.0) || !(k.mu > 0.0)) throw DomainError("cpe needs lambda > 0 and mu > 0");
                } else if constexpr (std::is_same_v<K, ExpIncrement>) {
                    if (!(k.nu > 0.0)) throw DomainError("expinc needs nu > 0");
                } else if constexpr (std::is_same_v<K, Deterministic>) {
                    if (!(k.m >= 0.0)) throw DomainError("deterministic rate must be nonnegative");
                } else {
                    if (!k.rate) throw DomainError("custom source needs a rate function");
                }
            },
            kind_);
    }

    std::pair<double, double> finite_difference(double x) const {
        const double h = 1e-5 * std::max(1.0, x);
        const double lo = std::max(x - h, 0.5 * x);
        const double hi = x + h;
        const double f0 = rate_unchecked(x), fl = rate_unchecked(lo), fh = rate_unchecked(hi);
        const double d1 = (fh - fl) / (hi - lo);
        const double d2 = 2.0 * ((fh - f0) / (hi - x) - (f0 - fl) / (x - lo)) / (hi - lo);
        return {d1, std::max(d2, 0.0)};
    }

    Kind kind_;
};

// The Fenchel-Legendre conjugate of Lambda(theta) = lambda theta / (mu - theta),
// (sqrt(mu x) - sqrt(lambda))^2, with its zero at the compound-Poisson mean
// lambda / mu. Shares the compound-Poisson sampler.
inline QueueSource compound_poisson_exp_conjugate(double lambda, double mu) {
    if (!(lambda > 0.0) || !(mu > 0.0)) throw DomainError("cpe needs lambda > 0 and mu > 0");
    Custom c;
    c.name = "cpe-conjugate";
    c.mean = lambda / mu;
    c.sampler_mean = lambda / mu;
    c.rate = [lambda, mu](double x) {
        const double d = std::sqrt(mu * x) - std::sqrt(lambda);
        return d * d;
    };
    c.d1 = [lambda, mu](double x) { return mu - std::sqrt(mu * lambda / x); };
    c.d2 = [lambda, mu](double x) { return std::sqrt(mu * lambda) / (2.0 * x * std::sqrt(x)); };
    c.cumulant = [lambda, mu](double theta) { return theta < mu ? lambda * theta / (mu - theta) : kInf; };
    const QueueSource base(CompoundPoissonExp{lambda, mu});
    c.sampler = [base](std::size_t L, Engine& rng) { return base.sample(L, rng); };
    return QueueSource(std::move(c));
}

// Independent per-queue sources.
class SourceModel {
public:
    SourceModel() = default;
    explicit SourceModel(std::vector<QueueSource> queues) : queues_(std::move(queues)) {}

    static SourceModel identical(const QueueSource& q, Eigen::Index k) {
        return SourceModel(std::vector<QueueSource>(static_cast<std::size_t>(k), q));
    }

    Eigen::Index queues() const { return static_cast<Eigen::Index>(queues_.size()); }
    const QueueSource& operator[](Eigen::Index k) const { return queues_[static_cast<std::size_t>(k)]; }

    Vec mean() const {
        Vec m(queues());
        for (Eigen::Index k = 0; k < queues(); ++k) m[k] = queues_[static_cast<std::size_t>(k)].mean();
        return m;
    }

    Vec sampler_mean() const {
        Vec m(queues());
        for (Eigen::Index k = 0; k < queues(); ++k) m[k] = queues_[static_cast<std::size_t>(k)].sampler_mean();
        return m;
    }

    // Model in units where queue k's capacity is 1: the rate of a normalized
    // increment y is Lambda*_k(C^k y).
    SourceModel normalized(const Vec& capacities) const {
        require_dim(capacities, queues(), "capacities");
        std::vector<QueueSource> out;
        for (Eigen::Index k = 0; k < queues(); ++k) {
            const double c = capacities[k];
            const QueueSource& base = queues_[static_cast<std::size_t>(k)];
            if (c == 1.0) {
                out.push_back(base);
                continue;
            }
            Custom n;
            n.name = base.name() + "-normalized";
            n.mean = base.mean() / c;
            n.sampler_mean = base.sampler_mean() / c;
            n.rate = [base, c](double y) { return base.rate_unchecked(c * y); };
            n.d1 = [base, c](double y) { return c * base.derivatives(c * y).first; };
            n.d2 = [base, c](double y) { return c * c * base.derivatives(c * y).second; };
            n.sampler = [base, c](std::size_t L, Engine& rng) { return base.sample(L, rng) / c; };
            out.emplace_back(std::move(n));
        }
        return SourceModel(std::move(out));
    }

private:
    std::vector<QueueSource> queues_;
};

inline double rate_fn_point(const SourceModel& model, Eigen::Index k, double x) {
    if (k < 0 || k >= model.queues()) throw DimensionError("queue index out of range");
    return model[k].rate(x);
}

// Sum over queues and slots of Lambda*_k; +inf if any entry is outside the
// effective domain.
inline double path_cost(const SourceModel& model, const ArrivalPath& path) {
    if (path.queues() != model.queues()) throw DimensionError("path and model disagree on the number of queues");
    double total = 0.0;
    for (Eigen::Index s = 1; s <= path.horizon(); ++s) {
        for (Eigen::Index k = 0; k < path.queues(); ++k) {
            const double x = path(k, s);
            if (x < 0.0) return kInf;
            total += model[k].rate_unchecked(x);
        }
    }
    return total;
}

inline double sample_slot(const SourceModel& model, Eigen::Index k, std::size_t L, Engine& rng) {
    if (k < 0 || k >= model.queues()) throw DimensionError("queue index out of range");
    return model[k].sample(L, rng);
}

// sup_theta { theta x - Lambda(theta) } over [lo, hi] by Brent's method.
// Throws BracketError when the maximizer sits on the bracket boundary.
inline double fenchel_legendre(const std::function<double(double)>& cumulant, double x, double lo, double hi) {
    if (!(lo < hi)) throw BracketError("empty bracket");
    auto negated = [&](double theta) {
        const double v = cumulant(theta);
        if (!std::isfinite(v)) return 1e300;
        return v - theta * x;
    };
    std::uintmax_t iters = 500;
    const auto [theta, value] = boost::math::tools::brent_find_minima(negated, lo, hi, 52, iters);
    const double edge = 1e-6 * (hi - lo);
    if (theta - lo < edge || hi - theta < edge) {
        throw BracketError("maximizer at theta = " + std::to_string(theta) + " lies on the bracket boundary");
    }
    return -value;
}

}  // namespace mwld
