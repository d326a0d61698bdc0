#pragma once

// Primal-dual interior-point solver for
//
//     minimize   sum_j f_j(x_j)
//     subject to A x = c,  G x <= h,  x >= 0
//
// with each f_j convex and twice differentiable on x_j > 0. Every general
// constraint row is made elastic with an l1 penalty rho, so the barrier
// subproblems always have a strict interior even when the feasible set is a
// single point or empty. With rho above the largest multiplier the elastic
// optimum coincides with the constrained one; `violation` reports how far the
// returned x is from feasibility and callers decide what to accept.

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mwld/types.hpp"

namespace mwld::convex {

// Value, first and second derivative of f_j at x.
struct ScalarEval {
    double value;
    double d1;
    double d2;
};

using SeparableCost = std::function<ScalarEval(Eigen::Index j, double x)>;

struct Program {
    Eigen::Index n = 0;
    Mat G;  // inequality rows, G x <= h
    Vec h;
    Mat A;  // equality rows, A x = c
    Vec c;
};

struct Options {
    double rho = 1e4;
    int max_iter = 200;
    double tol_residual = 1e-11;
    double tol_gap = 1e-13;
};

struct Result {
    Vec x;
    double objective = kInf;
    double violation = kInf;
    bool converged = false;
    int iterations = 0;
};

inline double max_violation(const Program& p, const Vec& x) {
    double v = 0.0;
    if (p.G.rows() > 0) v = std::max(v, (p.G * x - p.h).cwiseMax(0.0).maxCoeff());
    if (p.A.rows() > 0) v = std::max(v, (p.A * x - p.c).cwiseAbs().maxCoeff());
    return v;
}

namespace detail {

inline Result solve_ipm(const Program& prog, const SeparableCost& cost, const Vec& x0, const Options& opt) {
    const Eigen::Index n = prog.n;
    const Eigen::Index mi = prog.G.rows();
    const Eigen::Index me = prog.A.rows();
    const Eigen::Index m = mi + 2 * me;

    // Equalities enter as a pair of opposite elastic inequalities.
    Mat G(m, n);
    Vec h(m);
    if (mi > 0) {
        G.topRows(mi) = prog.G;
        h.head(mi) = prog.h;
    }
    if (me > 0) {
        G.middleRows(mi, me) = prog.A;
        h.segment(mi, me) = prog.c;
        G.bottomRows(me) = -prog.A;
        h.tail(me) = -prog.c;
    }
    const double rho = opt.rho;

    Vec x = x0.cwiseMax(1e-3);
    Vec grad(n), hess(n);
    auto evaluate = [&](const Vec& at) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const ScalarEval e = cost(j, at[j]);
            total += e.value;
            grad[j] = e.d1;
            hess[j] = e.d2;
        }
        return total;
    };
    evaluate(x);

    const double mu0 = std::max(1e-4, grad.cwiseAbs().maxCoeff() * std::max(1.0, x.maxCoeff()));
    Vec z = Vec::Constant(n, mu0).cwiseQuotient(x);
    Vec lam = Vec::Constant(m, std::min(mu0, rho / 2));
    Vec s = Vec::Constant(m, 1.0);
    Vec tau = Vec::Constant(m, rho) - lam;
    Vec t = Vec::Constant(m, mu0).cwiseQuotient(tau);
    {
        // Start primal-feasible for the elastic rows.
        const Vec r0 = G * x - h;
        for (Eigen::Index i = 0; i < m; ++i) {
            s[i] = std::max(-r0[i], 0.0) + 1.0;
            t[i] = std::max(r0[i], 0.0) + mu0 / tau[i];
        }
    }

    const double denom = static_cast<double>(n + 2 * m);
    Result res;
    Eigen::LLT<Mat> llt;
    Mat M(n, n);
    Vec dx(n), dz(n), dlam(m), ds(m), dt(m), rt(m), rhs(n), D(m), scale(n), x_prev(n);

    int it = 0;
    for (; it < opt.max_iter; ++it) {
        tau = Vec::Constant(m, rho) - lam;
        const Vec rd = grad + G.transpose() * lam - z;
        const Vec rp = G * x + s - t - h;
        const double mu = (x.dot(z) + s.dot(lam) + t.dot(tau)) / denom;
        const double scale_d = 1.0 + grad.cwiseAbs().maxCoeff();
        if (rd.cwiseAbs().maxCoeff() <= opt.tol_residual * scale_d &&
            (m == 0 || rp.cwiseAbs().maxCoeff() <= opt.tol_residual) && mu <= opt.tol_gap) {
            res.converged = true;
            break;
        }

        for (Eigen::Index i = 0; i < m; ++i) D[i] = s[i] / lam[i] + t[i] / tau[i];
        M.noalias() = G.transpose() * D.cwiseInverse().asDiagonal() * G;
        for (Eigen::Index j = 0; j < n; ++j) M(j, j) += hess[j] + z[j] / x[j];
        // Near a bound the diagonal spans many orders of magnitude; factor the
        // Jacobi-scaled matrix and add a tiny ridge if rounding broke definiteness.
        for (Eigen::Index j = 0; j < n; ++j) scale[j] = 1.0 / std::sqrt(std::max(M(j, j), 1e-300));
        M = scale.asDiagonal() * M * scale.asDiagonal();
        llt.compute(M);
        for (double ridge = 1e-14; llt.info() != Eigen::Success && ridge < 1e-6; ridge *= 100.0) {
            M.diagonal().array() += ridge;
            llt.compute(M);
        }
        if (llt.info() != Eigen::Success) break;

        auto direction = [&](double target) {
            for (Eigen::Index i = 0; i < m; ++i) {
                rt[i] = rp[i] + (target - s[i] * lam[i]) / lam[i] - (target - t[i] * tau[i]) / tau[i];
            }
            rhs = -rd - G.transpose() * rt.cwiseQuotient(D);
            for (Eigen::Index j = 0; j < n; ++j) rhs[j] += (target - x[j] * z[j]) / x[j];
            dx = scale.cwiseProduct(llt.solve(scale.cwiseProduct(rhs)));
            dlam = (G * dx + rt).cwiseQuotient(D);
            for (Eigen::Index j = 0; j < n; ++j) dz[j] = (target - x[j] * z[j] - z[j] * dx[j]) / x[j];
            for (Eigen::Index i = 0; i < m; ++i) {
                ds[i] = (target - s[i] * lam[i] - s[i] * dlam[i]) / lam[i];
                dt[i] = (target - t[i] * tau[i] + t[i] * dlam[i]) / tau[i];
            }
        };
        auto max_step = [&]() {
            double a = 1.0;
            auto limit = [&a](const Vec& v, const Vec& dv) {
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
                }
            };
            limit(x, dx);
            limit(z, dz);
            limit(s, ds);
            limit(t, dt);
            limit(lam, dlam);
            const Vec dtau = -dlam;
            limit(tau, dtau);
            return a;
        };

        direction(0.0);
        const double a_aff = max_step();
        const double mu_aff = ((x + a_aff * dx).dot(z + a_aff * dz) + (s + a_aff * ds).dot(lam + a_aff * dlam) +
                               (t + a_aff * dt).dot(tau - a_aff * dlam)) /
                              denom;
        const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 1e-6, 0.9);
        direction(sigma * mu);
        const double alpha = std::min(1.0, 0.995 * max_step());

        x_prev = x;
        x += alpha * dx;
        z += alpha * dz;
        s += alpha * ds;
        t += alpha * dt;
        lam += alpha * dlam;
        evaluate(x);
        if (!x.allFinite() || !z.allFinite() || !lam.allFinite() || !grad.allFinite() || !hess.allFinite()) {
            // Steps toward a bound where the cost has infinite slope can
            // underflow; keep the last finite iterate.
            x = x_prev;
            evaluate(x);
            break;
        }
        // With an unbounded slope at a bound the dual residual cannot vanish;
        // stop once the gap is closed and x no longer moves.
        if (mu <= opt.tol_gap && alpha * dx.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + x.cwiseAbs().maxCoeff())) {
            res.converged = true;
            ++it;
            break;
        }
    }

    res.iterations = it;
    res.x = x;
    double obj = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) obj += cost(j, x[j]).value;
    res.objective = obj;
    res.violation = max_violation(prog, x);
    return res;
}

}  // namespace detail

inline Result solve(const Program& prog, const SeparableCost& cost, const Vec& x0, const Options& opt = {}) {
    Result r = detail::solve_ipm(prog, cost, x0, opt);
    if (!r.x.allFinite()) return r;

    // Coordinates driven to zero against an unbounded slope leave the rest of
    // the Newton system badly conditioned. Fix them at zero and re-solve.
    std::vector<Eigen::Index> keep, drop;
    const double floor = 1e-9 * (1.0 + r.x.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < prog.n; ++j) (r.x[j] <= floor ? drop : keep).push_back(j);
    if (drop.empty() || keep.empty()) return r;

    double fixed = 0.0, gained = 0.0;
    for (Eigen::Index j : drop) {
        fixed += cost(j, 0.0).value;
        gained += cost(j, r.x[j]).value;
    }
    if (!std::isfinite(fixed)) return r;
    // Compare against the first pass with those coordinates snapped to zero.
    const double snapped = r.objective - gained + fixed;
    const auto nk = static_cast<Eigen::Index>(keep.size());
    Program red;
    red.n = nk;
    red.G.resize(prog.G.rows(), nk);
    red.A.resize(prog.A.rows(), nk);
    Vec xk(nk);
    for (Eigen::Index i = 0; i < nk; ++i) {
        const Eigen::Index j = keep[static_cast<std::size_t>(i)];
        if (prog.G.rows() > 0) red.G.col(i) = prog.G.col(j);
        if (prog.A.rows() > 0) red.A.col(i) = prog.A.col(j);
        xk[i] = r.x[j];
    }
    red.h = prog.h;
    red.c = prog.c;
    const SeparableCost sub = [&](Eigen::Index i, double v) { return cost(keep[static_cast<std::size_t>(i)], v); };
    const Result rr = detail::solve_ipm(red, sub, xk, opt);
    if (!rr.x.allFinite() || !(rr.objective + fixed <= snapped + 1e-15 * (1.0 + std::abs(snapped)))) return r;
    Vec x = Vec::Zero(prog.n);
    for (Eigen::Index i = 0; i < nk; ++i) x[keep[static_cast<std::size_t>(i)]] = rr.x[i];
    const double viol = max_violation(prog, x);
    if (viol > std::max(r.violation, 1e-10)) return r;
    Result out = rr;
    out.x = x;
    out.objective = rr.objective + fixed;
    out.violation = viol;
    return out;
}

}  // namespace mwld::convex
