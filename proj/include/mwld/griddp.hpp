#pragma once

// Value iteration for I_t(b) straight from its definition: the cheapest
// t-slot arrival path that drives the workload from empty at time -t to b at
// time 0, branching over every selection the policy may make. Intermediate
// workloads live on a delta-grid in normalized units; arrivals are continuous,
// so the value returned is the cost of an actual feasible path and therefore an
// upper bound on I_t(b) that tightens as delta shrinks.

#include <cstdint>
#include <map>
#include <vector>

#include "mwld/outcome.hpp"
#include "mwld/parallel.hpp"
#include "mwld/policy.hpp"
#include "mwld/source.hpp"

namespace mwld {

struct GridOptions {
    double delta = 0.05;
    std::size_t memory_budget = std::size_t{1} << 30;  // bytes
    std::size_t threads = 1;
};

namespace detail {

class Grid {
public:
    Grid(const Vec& top, double delta) : delta_(delta) {
        const Eigen::Index k = top.size();
        n_.resize(static_cast<std::size_t>(k));
        stride_.resize(static_cast<std::size_t>(k));
        std::size_t total = 1;
        for (Eigen::Index q = 0; q < k; ++q) {
            n_[static_cast<std::size_t>(q)] = static_cast<std::size_t>(std::floor(top[q] / delta + 1e-9)) + 1;
            stride_[static_cast<std::size_t>(q)] = total;
            total *= n_[static_cast<std::size_t>(q)];
        }
        size_ = total;
    }

    std::size_t size() const { return size_; }
    Eigen::Index dims() const { return static_cast<Eigen::Index>(n_.size()); }
    std::size_t extent(Eigen::Index q) const { return n_[static_cast<std::size_t>(q)]; }
    std::size_t stride(Eigen::Index q) const { return stride_[static_cast<std::size_t>(q)]; }
    double delta() const { return delta_; }

    std::size_t coord(std::size_t idx, Eigen::Index q) const { return (idx / stride(q)) % extent(q); }

    Vec point(std::size_t idx) const {
        Vec w(dims());
        for (Eigen::Index q = 0; q < dims(); ++q) w[q] = static_cast<double>(coord(idx, q)) * delta_;
        return w;
    }

    // Index of the grid point equal to w (within 1e-9 per coordinate), or -1.
    std::int64_t snap(const Vec& w) const {
        std::size_t idx = 0;
        for (Eigen::Index q = 0; q < dims(); ++q) {
            const double r = std::round(w[q] / delta_);
            if (std::abs(r * delta_ - w[q]) > 1e-9 || r < 0.0 || r >= static_cast<double>(extent(q))) return -1;
            idx += static_cast<std::size_t>(r) * stride(q);
        }
        return static_cast<std::int64_t>(idx);
    }

private:
    double delta_;
    std::vector<std::size_t> n_;
    std::vector<std::size_t> stride_;
    std::size_t size_ = 1;
};

struct Source {
    std::int64_t state = -1;  // grid index of the workload served, -1 for the empty start
    std::int32_t branch = 0;
};

struct OffGridLeftover {
    Vec leftover;
    double value;
    Source src;
};

struct StepRecord {
    std::vector<std::vector<std::uint32_t>> axis_arg;  // per axis, source coordinate of the inf-convolution
    std::vector<std::int32_t> from_off;                // off-grid entry that won, or -1
    std::vector<Source> grid_src;                      // who produced each on-grid leftover
    std::vector<OffGridLeftover> off;
};

inline double clamped_rate(const QueueSource& q, double x) {
    if (x < -1e-12) return kInf;
    return q.rate_unchecked(std::max(0.0, x));
}

}  // namespace detail

inline RateFnOutcome grid_dp(const SourceModel& model, const Policy& policy, const Workload& b, Eigen::Index t,
                             const GridOptions& opt = {}) {
    const Eigen::Index k = model.queues();
    require_dim(b, k, "target workload");
    if (t < 1) throw DomainError("horizon must be at least 1");
    if (k < 1 || k > 4) throw DimensionError("grid DP supports 1..4 queues");
    if (!all_finite_nonneg(b)) throw DomainError("target workload must be finite and nonnegative");
    if (!(opt.delta > 0.0) || std::abs(1.0 / opt.delta - std::round(1.0 / opt.delta)) > 1e-9) {
        throw DomainError("grid resolution must divide the unit capacity");
    }
    const RateRegion region = RateRegion::unit_simplex(k);

    RateFnOutcome out;
    out.method = Method::GridDP;

    // Each queue receives at most one unit of service per slot, so W_s^k never
    // exceeds b^k + s <= b^k + t - 1 on a path that ends at b.
    const detail::Grid grid(b.array() + static_cast<double>(t - 1), opt.delta);
    const std::size_t n = grid.size();
    const std::size_t per_step = n * (4 * static_cast<std::size_t>(k) + 4 + sizeof(detail::Source));
    const std::size_t need = per_step * static_cast<std::size_t>(t) + 3 * n * sizeof(double);
    if (need > opt.memory_budget) {
        throw ResourceError("grid DP needs about " + std::to_string(need) + " bytes for " + std::to_string(n) +
                            " grid states over " + std::to_string(t) + " slots (budget " +
                            std::to_string(opt.memory_budget) + ")");
    }

    std::vector<std::vector<double>> axis_cost(static_cast<std::size_t>(k));
    for (Eigen::Index q = 0; q < k; ++q) {
        auto& c = axis_cost[static_cast<std::size_t>(q)];
        c.resize(grid.extent(q));
        for (std::size_t d = 0; d < c.size(); ++d) c[d] = model[q].rate_unchecked(static_cast<double>(d) * opt.delta);
    }

    std::vector<double> value;  // V over the grid for the current W_s; empty means the start point W_t = 0
    std::vector<detail::StepRecord> records;
    records.reserve(static_cast<std::size_t>(t));

    auto for_each_leftover = [&](auto&& visit) {
        if (value.empty()) {
            const Vec zero = Vec::Zero(k);
            const auto branches = selection_branches(policy, region, zero);
            for (std::size_t r = 0; r < branches.size(); ++r) {
                visit(Vec((zero - branches[r]).cwiseMax(0.0)), 0.0, detail::Source{-1, static_cast<std::int32_t>(r)});
            }
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(value[i])) continue;
            const Vec w = grid.point(i);
            const auto branches = selection_branches(policy, region, w);
            for (std::size_t r = 0; r < branches.size(); ++r) {
                visit(Vec((w - branches[r]).cwiseMax(0.0)), value[i],
                      detail::Source{static_cast<std::int64_t>(i), static_cast<std::int32_t>(r)});
            }
        }
    };

    for (Eigen::Index step = 0; step + 1 < t; ++step) {
        detail::StepRecord rec;
        std::vector<double> u(n, kInf);
        rec.grid_src.assign(n, detail::Source{});
        std::map<std::vector<long long>, std::size_t> off_index;
        for_each_leftover([&](const Vec& l, double v, detail::Source src) {
            const std::int64_t g = grid.snap(l);
            if (g >= 0) {
                if (v < u[static_cast<std::size_t>(g)]) {
                    u[static_cast<std::size_t>(g)] = v;
                    rec.grid_src[static_cast<std::size_t>(g)] = src;
                }
                return;
            }
            std::vector<long long> key(static_cast<std::size_t>(k));
            for (Eigen::Index q = 0; q < k; ++q) key[static_cast<std::size_t>(q)] = std::llround(l[q] * 1e12);
            auto [it, fresh] = off_index.emplace(key, rec.off.size());
            if (fresh) rec.off.push_back({l, v, src});
            else if (v < rec.off[it->second].value) rec.off[it->second] = {l, v, src};
        });

        // Separable inf-convolution with the arrival cost, one axis at a time.
        rec.axis_arg.assign(static_cast<std::size_t>(k), std::vector<std::uint32_t>(n, 0));
        for (Eigen::Index q = 0; q < k; ++q) {
            const std::size_t len = grid.extent(q);
            const std::size_t stride = grid.stride(q);
            const std::size_t lines = n / len;
            const auto& cost = axis_cost[static_cast<std::size_t>(q)];
            auto& arg = rec.axis_arg[static_cast<std::size_t>(q)];
            std::vector<double> next(n, kInf);
            parallel_for(lines, opt.threads, [&](std::size_t line) {
                const std::size_t base = (line / stride) * stride * len + (line % stride);
                for (std::size_t to = 0; to < len; ++to) {
                    double best = kInf;
                    std::uint32_t best_from = 0;
                    for (std::size_t from = 0; from <= to; ++from) {
                        const double v = u[base + from * stride];
                        if (!std::isfinite(v)) continue;
                        const double c = v + cost[to - from];
                        if (c < best) {
                            best = c;
                            best_from = static_cast<std::uint32_t>(from);
                        }
                    }
                    next[base + to * stride] = best;
                    arg[base + to * stride] = best_from;
                }
            });
            u.swap(next);
        }

        rec.from_off.assign(n, -1);
        for (std::size_t e = 0; e < rec.off.size(); ++e) {
            const auto& entry = rec.off[e];
            std::vector<std::vector<double>> c(static_cast<std::size_t>(k));
            for (Eigen::Index q = 0; q < k; ++q) {
                auto& cq = c[static_cast<std::size_t>(q)];
                cq.resize(grid.extent(q));
                for (std::size_t d = 0; d < cq.size(); ++d) {
                    cq[d] = detail::clamped_rate(model[q], static_cast<double>(d) * opt.delta - entry.leftover[q]);
                }
            }
            parallel_for(n, opt.threads, [&](std::size_t i) {
                double v = entry.value;
                for (Eigen::Index q = 0; q < k && std::isfinite(v); ++q) {
                    v += c[static_cast<std::size_t>(q)][grid.coord(i, q)];
                }
                if (v < u[i]) {
                    u[i] = v;
                    rec.from_off[i] = static_cast<std::int32_t>(e);
                }
            });
        }
        value.swap(u);
        records.push_back(std::move(rec));
    }

    // Last slot: land exactly on b.
    double best = kInf;
    detail::Source best_src;
    Vec best_leftover = Vec::Zero(k);
    for_each_leftover([&](const Vec& l, double v, detail::Source src) {
        double c = v;
        for (Eigen::Index q = 0; q < k && std::isfinite(c); ++q) c += detail::clamped_rate(model[q], b[q] - l[q]);
        if (c < best) {
            best = c;
            best_src = src;
            best_leftover = l;
        }
    });
    out.value = best;
    out.timescale = t;
    if (!std::isfinite(best)) {
        out.timescale = 0;
        return out;
    }

    // Walk the records back from time 0 to time -t.
    std::vector<Vec> arrivals;   // slot 1, 2, ..., t
    std::vector<Vec> workloads;  // W_1, W_2, ..., W_{t-1}
    std::vector<detail::Source> chosen;  // branch taken at W_1, ..., W_t
    arrivals.push_back((b - best_leftover).cwiseMax(0.0));
    chosen.push_back(best_src);
    detail::Source src = best_src;
    for (std::size_t r = records.size(); r-- > 0;) {
        const auto& rec = records[r];
        const std::size_t state = static_cast<std::size_t>(src.state);
        const Vec w = grid.point(state);
        workloads.push_back(w);
        Vec leftover;
        if (rec.from_off[state] >= 0) {
            const auto& e = rec.off[static_cast<std::size_t>(rec.from_off[state])];
            leftover = e.leftover;
            src = e.src;
        } else {
            std::size_t idx = state;
            for (Eigen::Index q = k; q-- > 0;) {
                const std::size_t c = grid.coord(idx, q);
                idx = idx - c * grid.stride(q) + rec.axis_arg[static_cast<std::size_t>(q)][idx] * grid.stride(q);
            }
            leftover = grid.point(idx);
            src = rec.grid_src[idx];
        }
        arrivals.push_back((w - leftover).cwiseMax(0.0));
        chosen.push_back(src);
    }

    Mat m(k, t);
    for (Eigen::Index s = 1; s <= t; ++s) m.col(s - 1) = arrivals[static_cast<std::size_t>(s - 1)];
    out.optimal_path = ArrivalPath(std::move(m));
    out.branch_sequence.resize(static_cast<std::size_t>(t));
    out.branch_labels.resize(static_cast<std::size_t>(t));
    for (Eigen::Index s = t; s >= 1; --s) {
        // chosen[s-1] is the selection made at W_s
        const Vec w = s == t ? Vec(Vec::Zero(k)) : workloads[static_cast<std::size_t>(s - 1)];
        const auto branches = selection_branches(policy, region, w);
        const auto& c = chosen[static_cast<std::size_t>(s - 1)];
        out.branch_sequence[static_cast<std::size_t>(t - s)] = branches[static_cast<std::size_t>(c.branch)];
        out.branch_labels[static_cast<std::size_t>(t - s)] = "branch" + std::to_string(c.branch);
    }
    out.timescale = t;
    for (Eigen::Index s = 1; s < t; ++s) {
        if (contains(region, workloads[static_cast<std::size_t>(s - 1)])) {
            out.timescale = s;
            break;
        }
    }
    return out;
}

}  // namespace mwld
