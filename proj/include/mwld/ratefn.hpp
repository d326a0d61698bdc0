#pragma once

// Finite- and infinite-horizon rate functions of the workload, in normalized
// units (every capacity scaled to 1, so the region is the unit simplex and
// hat x = sum_k x^k). Callers with general capacities normalize the model with
// SourceModel::normalized and divide b by C.
//
// I_t(b) = min( I_1(b), min_{1 < u <= t} inf { I#_u(x) : x in A(u, b) } )
//
// where A(u, b) holds the u-slot paths from empty that end at b and whose
// intermediate workloads W_{u-1}, ..., W_1 all stay outside the region.

#include <algorithm>
#include <limits>
#include <optional>

#include "mwld/convex.hpp"
#include "mwld/dynamics.hpp"
#include "mwld/griddp.hpp"
#include "mwld/pieces.hpp"

namespace mwld {

struct RateFnOptions {
    convex::Options solver{};
    double accept_violation = 1e-7;
    Eigen::Index max_affine_horizon = 12;  // longest u handled by branch enumeration
    GridOptions grid{};
    std::size_t threads = 1;
};

struct BoundPair {
    double lower = 0.0;
    double upper = kInf;
    Eigen::Index lower_u = 1;
    Eigen::Index upper_u = 1;
};

namespace detail {

// Golden-section search for a convex function on [lo, hi].
template <class F>
std::pair<double, double> argmin_convex(F&& f, double lo, double hi) {
    if (!(hi - lo > 1e-15)) {
        const double x = 0.5 * (lo + hi);
        return {x, f(x)};
    }
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 400 && b - a > 1e-14 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    double x = fc <= fd ? c : d;
    double fx = std::min(fc, fd);
    for (double e : {lo, hi}) {
        const double fe = f(e);
        if (fe < fx) {
            x = e;
            fx = fe;
        }
    }
    return {x, fx};
}

inline void require_rate_model(const SourceModel& model, const Vec& b) {
    require_dim(b, model.queues(), "target workload");
    if (!all_finite_nonneg(b)) throw DomainError("target workload must be finite and nonnegative");
    for (Eigen::Index k = 0; k < model.queues(); ++k) {
        if (std::holds_alternative<Deterministic>(model[k].kind())) {
            throw DomainError("rate functions need sources whose conjugate is finite on (0, inf)");
        }
    }
}

inline RateFnOutcome single_slot_outcome(const SourceModel& model, const Vec& b) {
    RateFnOutcome out;
    out.timescale = 1;
    Mat m(b.size(), 1);
    m.col(0) = b;
    out.optimal_path = ArrivalPath(std::move(m));
    out.value = path_cost(model, out.optimal_path);
    out.branch_sequence = {Vec::Zero(b.size())};
    out.branch_labels = {"start"};
    return out;
}

// Smallest cost of u slots of arrivals whose normalized total is b-hat + u - 1
// with every coordinate at least b^k. Any path in A(u, b) under a
// work-conserving policy has such a total, so this bounds the u-term of I_t
// from below.
inline double arrival_budget_bound(const SourceModel& model, const Vec& b, Eigen::Index u) {
    const Eigen::Index k = b.size();
    if (u == 1) return path_cost(model, ArrivalPath(Mat(b)));
    if (k == 1) return static_cast<double>(u) * model[0].rate_unchecked((b[0] + static_cast<double>(u - 1)) / u);
    const double ud = static_cast<double>(u);
    convex::Program prog;
    prog.n = k;
    prog.A = Mat::Ones(1, k);
    prog.c = Vec::Constant(1, ud - 1.0);
    auto cost = [&](Eigen::Index j, double v) -> convex::ScalarEval {
        const double y = (b[j] + v) / ud;
        const auto [d1, d2] = model[j].derivatives(y);
        return {ud * model[j].rate_unchecked(y), d1, d2 / ud};
    };
    const Vec x0 = Vec::Constant(k, (ud - 1.0) / static_cast<double>(k));
    convex::Options opt;
    opt.tol_residual = 1e-13;
    opt.tol_gap = 1e-15;
    const convex::Result r = convex::solve(prog, cost, x0, opt);
    return r.objective - 1e-9;
}

// The program for one piece sequence: variables are the u arrival vectors,
// block j holding slot u - j. seq[i] is the piece active at W_{u-1-i}.
inline convex::Program sequence_program(const std::vector<AffinePiece>& pieces, const std::vector<int>& seq,
                                        const Vec& b, Eigen::Index u) {
    const Eigen::Index k = b.size();
    const Eigen::Index n = k * u;
    Mat phi = Mat::Zero(k, n);
    Vec off = Vec::Zero(k);
    phi.leftCols(k) = Mat::Identity(k, k);
    std::vector<Mat> g_blocks;
    std::vector<Vec> h_blocks;
    Eigen::Index rows = 0;
    for (Eigen::Index i = 0; i + 1 < u; ++i) {
        const AffinePiece& p = pieces[static_cast<std::size_t>(seq[static_cast<std::size_t>(i)])];
        g_blocks.push_back(p.G * phi);
        h_blocks.push_back(p.h - p.G * off);
        rows += p.G.rows();
        const Mat keep = Mat::Identity(k, k) - p.M;
        phi = keep * phi;
        off = keep * off - p.r0;
        phi.middleCols(k * (i + 1), k) += Mat::Identity(k, k);
    }
    convex::Program prog;
    prog.n = n;
    prog.G.resize(rows, n);
    prog.h.resize(rows);
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < g_blocks.size(); ++i) {
        prog.G.middleRows(r, g_blocks[i].rows()) = g_blocks[i];
        prog.h.segment(r, h_blocks[i].size()) = h_blocks[i];
        r += g_blocks[i].rows();
    }
    prog.A = phi;
    prog.c = b - off;
    return prog;
}

struct SequenceResult {
    double value = kInf;
    Vec x;
};

inline SequenceResult solve_sequence(const SourceModel& model, const std::vector<AffinePiece>& pieces,
                                     const std::vector<int>& seq, const Vec& b, Eigen::Index u,
                                     const RateFnOptions& opt) {
    const Eigen::Index k = b.size();
    const convex::Program prog = sequence_program(pieces, seq, b, u);
    auto cost = [&](Eigen::Index j, double x) -> convex::ScalarEval {
        const QueueSource& q = model[j % k];
        const auto [d1, d2] = q.derivatives(x);
        return {q.rate_unchecked(x), d1, d2};
    };
    // Start from the constant-speed path carrying the minimal total.
    Vec x0(prog.n);
    for (Eigen::Index j = 0; j < u; ++j) {
        for (Eigen::Index q = 0; q < k; ++q) {
            x0[j * k + q] = std::max(0.05, (b[q] + static_cast<double>(u - 1) / static_cast<double>(k)) / u);
        }
    }
    const convex::Result r = convex::solve(prog, cost, x0, opt.solver);
    SequenceResult out;
    if (r.violation <= opt.accept_violation && std::isfinite(r.objective)) {
        out.value = r.objective;
        out.x = r.x;
    }
    return out;
}

inline std::vector<int> sequence_digits(std::size_t index, std::size_t base, std::size_t len) {
    std::vector<int> seq(len);
    for (std::size_t i = len; i-- > 0;) {
        seq[i] = static_cast<int>(index % base);
        index /= base;
    }
    return seq;
}

inline std::size_t checked_power(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r > std::numeric_limits<std::size_t>::max() / base) return std::numeric_limits<std::size_t>::max();
        r *= base;
    }
    return r;
}

// Term u of the rate function by enumerating every piece sequence.
inline std::optional<RateFnOutcome> affine_term(const SourceModel& model, const std::vector<AffinePiece>& pieces,
                                                const Vec& b, Eigen::Index u, const RateFnOptions& opt) {
    const Eigen::Index k = b.size();
    const std::size_t len = static_cast<std::size_t>(u - 1);
    const std::size_t count = checked_power(pieces.size(), len);
    std::vector<SequenceResult> results(count);
    parallel_for(count, opt.threads, [&](std::size_t i) {
        results[i] = solve_sequence(model, pieces, sequence_digits(i, pieces.size(), len), b, u, opt);
    });
    std::size_t best = count;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(results[i].value)) continue;
        if (best == count || results[i].value < results[best].value - 1e-12 * (1.0 + results[best].value)) best = i;
    }
    if (best == count) return std::nullopt;

    RateFnOutcome out;
    out.method = Method::BranchConvex;
    out.timescale = u;
    const Vec& x = results[best].x;
    Mat m(k, u);
    for (Eigen::Index j = 0; j < u; ++j) m.col(u - 1 - j) = x.segment(j * k, k).cwiseMax(0.0);
    out.optimal_path = ArrivalPath(std::move(m));
    out.value = results[best].value;
    const auto seq = sequence_digits(best, pieces.size(), len);
    out.branch_sequence.push_back(Vec::Zero(k));
    out.branch_labels.push_back("start");
    Vec w = out.optimal_path.slot(u);
    for (std::size_t i = 0; i < len; ++i) {
        const AffinePiece& p = pieces[static_cast<std::size_t>(seq[i])];
        const Vec r = p.service(w).cwiseMax(0.0).cwiseMin(w);
        out.branch_sequence.push_back(r);
        out.branch_labels.push_back(p.label);
        w = w - r + out.optimal_path.slot(u - 1 - static_cast<Eigen::Index>(i));
    }
    return out;
}

inline bool better(const RateFnOutcome& cand, const RateFnOutcome& incumbent) {
    return cand.value < incumbent.value - 1e-12 * (1.0 + std::abs(incumbent.value));
}

}  // namespace detail

// I_1(b) = sum_k Lambda*_k(b^k).
inline double one_slot_cost(const SourceModel& model, const Workload& b) {
    require_dim(b, model.queues(), "target workload");
    if (!all_finite_nonneg(b)) throw DomainError("target workload must be finite and nonnegative");
    return path_cost(model, ArrivalPath(Mat(b)));
}

// Two-queue bounds on I_t(b) from the reachable totals of A(u, b). The lower
// bound spreads the cheapest total in {b + v : v >= 0, v^1 + v^2 = u - 1}
// evenly over u slots; the upper bound is the constant-speed path that keeps
// serving the longer queue. Upper is +inf when b lies in [0,1)^2, where that
// path would enter the region.
inline BoundPair it_bounds(const SourceModel& model, const Workload& b, Eigen::Index t) {
    if (model.queues() != 2) throw DimensionError("bounds are defined for two queues");
    require_dim(b, 2, "target workload");
    if (!all_finite_nonneg(b)) throw DomainError("target workload must be finite and nonnegative");
    if (t < 1) throw DomainError("horizon must be at least 1");
    const bool upper_defined = !(b[0] < 1.0 && b[1] < 1.0);
    const Vec h = b[0] >= b[1] ? make_vec({1.0, 0.0}) : make_vec({0.0, 1.0});
    BoundPair out;
    out.lower = kInf;
    for (Eigen::Index u = 1; u <= t; ++u) {
        const double ud = static_cast<double>(u);
        const double v1 = std::clamp((b[1] - b[0] + ud - 1.0) / 2.0, 0.0, ud - 1.0);
        const Vec lo = make_vec({b[0] + v1, b[1] + (ud - 1.0 - v1)}) / ud;
        const double lower = ud * (model[0].rate_unchecked(lo[0]) + model[1].rate_unchecked(lo[1]));
        if (lower < out.lower) {
            out.lower = lower;
            out.lower_u = u;
        }
        if (upper_defined) {
            const Vec hi = (b + (ud - 1.0) * h) / ud;
            const double upper = ud * (model[0].rate_unchecked(hi[0]) + model[1].rate_unchecked(hi[1]));
            if (upper < out.upper) {
                out.upper = upper;
                out.upper_u = u;
            }
        }
    }
    return out;
}

inline double it_upper_bound(const SourceModel& model, const Workload& b, Eigen::Index t) {
    require_dim(b, 2, "target workload");
    if (b[0] < 1.0 && b[1] < 1.0) throw UpperBoundUndefined("upper bound needs b outside [0,1)^2");
    return it_bounds(model, b, t).upper;
}

// I_2(b) for two queues by splitting A(2, b) by the selection made at W_1:
// serve queue 1, serve queue 2, or project (W_1 in the unit box). Each part
// reduces to nested one-dimensional convex searches.
inline RateFnOutcome exact_i2(const SourceModel& model, const Workload& b) {
    if (model.queues() != 2) throw DimensionError("exact I_2 is defined for two queues");
    detail::require_rate_model(model, b);
    auto f = [&](Eigen::Index k, double x) { return x < 0.0 ? kInf : model[k].rate_unchecked(x); };

    RateFnOutcome best = detail::single_slot_outcome(model, b);
    best.method = Method::ClosedFormI2;

    auto consider = [&](double value, const Vec& a2, const Vec& a1, const Vec& service, const std::string& label) {
        if (!(value < best.value - 1e-12 * (1.0 + best.value))) return;
        best.value = value;
        best.timescale = 2;
        Mat m(2, 2);
        m.col(0) = a1.cwiseMax(0.0);
        m.col(1) = a2.cwiseMax(0.0);
        best.optimal_path = ArrivalPath(std::move(m));
        best.branch_sequence = {Vec::Zero(2), service};
        best.branch_labels = {"start", label};
    };

    // Serve queue q at W_1 = a_2: a_2^q >= a_2^o, a_2^q >= 1, a_1 = b + e_q - a_2.
    for (Eigen::Index q = 0; q < 2; ++q) {
        const Eigen::Index o = 1 - q;
        Vec total = b;
        total[q] += 1.0;
        auto g = [&](Eigen::Index k, double y) { return f(k, y) + f(k, total[k] - y); };
        const double y_other_free = detail::argmin_convex([&](double y) { return g(o, y); }, 0.0, total[o]).first;
        auto other_at = [&](double yq) { return std::clamp(y_other_free, 0.0, std::min(yq, total[o])); };
        const auto [yq, value] =
            detail::argmin_convex([&](double y) { return g(q, y) + g(o, other_at(y)); }, 1.0, total[q]);
        Vec a2(2);
        a2[q] = yq;
        a2[o] = other_at(yq);
        Vec service = Vec::Zero(2);
        service[q] = 1.0;
        consider(value, a2, total - a2, service, "serve" + std::to_string(q + 1));
    }

    // Project at W_1 = a_2 in [0,1]^2 with s = a_2^1 + a_2^2 in [1, 2]: both
    // coordinates keep (s - 1)/2, so a_1 = b - (s - 1)/2 (1, 1).
    {
        const double s_hi = std::min(2.0, 1.0 + 2.0 * b.minCoeff());
        auto inner = [&](double s) {
            return detail::argmin_convex([&](double y1) { return f(0, y1) + f(1, s - y1); }, std::max(0.0, s - 1.0),
                                         std::min(1.0, s));
        };
        auto outer = [&](double s) {
            const double d = 0.5 * (s - 1.0);
            return inner(s).second + f(0, b[0] - d) + f(1, b[1] - d);
        };
        const auto [s, value] = detail::argmin_convex(outer, 1.0, s_hi);
        const double y1 = inner(s).first;
        const Vec a2 = make_vec({y1, s - y1});
        const double d = 0.5 * (s - 1.0);
        consider(value, a2, b.array() - d, a2.array() - d, "proj{1,2}");
    }
    return best;
}

namespace detail {

// Running computation of I_t(b) term by term, shared by it_exact, it_policy
// and j_rate_fn.
class TermScanner {
public:
    TermScanner(const SourceModel& model, const Policy& policy, const Vec& b, const RateFnOptions& opt)
        : model_(model), policy_(policy), b_(b), opt_(opt) {
        require_rate_model(model, b);
        if (!policy.is_max_weight()) pieces_ = affine_pieces(policy, model.queues());
        best_ = single_slot_outcome(model, b);
    }

    bool affine() const { return !pieces_.empty(); }

    // Adds the u-term (u >= 2). Returns false if it was skipped because it
    // needs more than the affine horizon allows.
    bool add_term(Eigen::Index u) {
        if (arrival_budget_bound(model_, b_, u) >= best_.value) return true;
        if (u > opt_.max_affine_horizon) return false;
        if (auto cand = affine_term(model_, pieces_, b_, u, opt_); cand && better(*cand, best_)) best_ = *cand;
        return true;
    }

    void merge(const RateFnOutcome& cand) {
        if (better(cand, best_)) best_ = cand;
    }

    const RateFnOutcome& best() const { return best_; }
    RateFnOutcome& best() { return best_; }

private:
    const SourceModel& model_;
    Policy policy_;
    Vec b_;
    RateFnOptions opt_;
    std::vector<AffinePiece> pieces_;
    RateFnOutcome best_;
};

inline RateFnOutcome policy_rate(const SourceModel& model, const Policy& policy, const Workload& b, Eigen::Index t,
                                 Method method, const RateFnOptions& opt) {
    if (t < 1) throw DomainError("horizon must be at least 1");
    detail::require_rate_model(model, b);
    if (method == Method::GridDP || policy.is_max_weight()) {
        GridOptions g = opt.grid;
        g.threads = opt.threads;
        return grid_dp(model, policy, b, t, g);
    }
    if (method != Method::BranchConvex) throw DomainError("rate function method must be branch-convex or grid-dp");
    TermScanner scan(model, policy, b, opt);
    bool complete = true;
    for (Eigen::Index u = 2; u <= t; ++u) complete = scan.add_term(u) && complete;
    if (!complete) {
        GridOptions g = opt.grid;
        g.threads = opt.threads;
        scan.merge(grid_dp(model, policy, b, t, g));
    }
    return scan.best();
}

}  // namespace detail

// I_t(b) under work-conserving max-weight, or under plain max-weight through
// the grid engine (whose rate function is not covered by the A(u, b) form).
inline RateFnOutcome it_exact(const SourceModel& model, const Workload& b, Eigen::Index t,
                              Method method = Method::BranchConvex, const RateFnOptions& opt = {},
                              const Policy& policy = Policy::wc_max_weight()) {
    if (!policy.is_wc_max_weight() && !policy.is_max_weight()) {
        throw DomainError("it_exact covers max-weight policies; use it_policy for GPS or priority");
    }
    return detail::policy_rate(model, policy, b, t, method, opt);
}

// I_t(b) under GPS or strict priority, whose service maps are single-valued.
inline RateFnOutcome it_policy(const SourceModel& model, const Workload& b, Eigen::Index t, const Policy& policy,
                               Method method = Method::BranchConvex, const RateFnOptions& opt = {}) {
    if (!policy.is_gps() && !policy.is_priority()) throw DomainError("it_policy expects a GPS or priority policy");
    return detail::policy_rate(model, policy, b, t, method, opt);
}

// J(b) = inf_t I_t(b), adding one timescale at a time and stopping once the
// best timescale is shorter than the one just added. `truncated` is set when
// t_cap is reached first.
inline RateFnOutcome j_rate_fn(const SourceModel& model, const Workload& b, Eigen::Index t_cap,
                               const RateFnOptions& opt = {}, const Policy& policy = Policy::wc_max_weight()) {
    if (t_cap < 1) throw DomainError("t_cap must be at least 1");
    detail::require_rate_model(model, b);
    if (policy.is_max_weight()) throw DomainError("J is computed for work-conserving policies");
    const Vec m = model.mean();
    if (!(m.sum() < 1.0)) throw DomainError("the mean arrival vector must lie strictly inside the region");
    detail::TermScanner scan(model, policy, b, opt);
    Eigen::Index t = 1;
    while (scan.best().timescale == t && t < t_cap) {
        ++t;
        if (!scan.add_term(t)) {
            GridOptions g = opt.grid;
            g.threads = opt.threads;
            scan.merge(grid_dp(model, policy, b, t, g));
        }
    }
    scan.best().truncated = scan.best().timescale == t_cap && t_cap > 1;
    return scan.best();
}

struct PathPropertyReport {
    double cost = 0.0;
    double constant_speed_cost = 0.0;
    double ratio = 1.0;
    bool constant_speed_cheaper = true;
};

// Compares a path with the constant-speed path to the same total.
inline PathPropertyReport path_properties_check(const SourceModel& model, const ArrivalPath& path) {
    PathPropertyReport r;
    r.cost = path_cost(model, path);
    const Vec speed = path.total() / static_cast<double>(path.horizon());
    r.constant_speed_cost = path_cost(model, ArrivalPath::constant(speed, path.horizon()));
    r.ratio = r.constant_speed_cost > 0.0 ? r.cost / r.constant_speed_cost : (r.cost > 0.0 ? kInf : 1.0);
    r.constant_speed_cheaper = r.constant_speed_cost <= r.cost + 1e-12 * (1.0 + std::abs(r.cost));
    return r;
}

// Single-slot split check for identical queues: with total d and
// d/2 <= x <= y, the split (x, d - x) costs no more than (y, d - y).
inline bool schur_split_holds(const QueueSource& q, double d, double x, double y) {
    const double cx = q.rate_unchecked(x) + q.rate_unchecked(d - x);
    const double cy = q.rate_unchecked(y) + q.rate_unchecked(d - y);
    return cx <= cy + 1e-12 * (1.0 + std::abs(cy));
}

// inf of I_t over the orthant {b >= B}, searched on a grid of its boundary
// faces {b >= B, b^k = B^k for some k} with the given step and extent.
inline std::pair<double, Vec> overflow_exponent(const SourceModel& model, const Vec& B, Eigen::Index t,
                                                double step = 0.25, double extent = 3.0,
                                                const RateFnOptions& opt = {}) {
    const Eigen::Index k = B.size();
    require_dim(B, model.queues(), "overflow level");
    double best = kInf;
    Vec arg = B;
    const Eigen::Index m = static_cast<Eigen::Index>(std::floor(extent / step + 1e-9)) + 1;
    std::size_t total = 1;
    for (Eigen::Index q = 0; q < k; ++q) total *= static_cast<std::size_t>(m);
    for (std::size_t idx = 0; idx < total; ++idx) {
        Vec b = B;
        std::size_t rest = idx;
        bool on_face = false;
        for (Eigen::Index q = 0; q < k; ++q) {
            const auto c = static_cast<Eigen::Index>(rest % static_cast<std::size_t>(m));
            rest /= static_cast<std::size_t>(m);
            b[q] += static_cast<double>(c) * step;
            on_face = on_face || c == 0;
        }
        if (!on_face) continue;
        const double v = it_exact(model, b, t, Method::BranchConvex, opt).value;
        if (v < best - 1e-15) {
            best = v;
            arg = b;
        }
    }
    return {best, arg};
}

}  // namespace mwld
