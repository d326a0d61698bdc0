// mwld: command-line front end for the rate-function library.
//
//   mwld ratefn  --b 3,1 --t 10 --lambda 0.2 --mu 0.01
//   mwld bounds  --b 3,1 --t 10 --lambda 0.1
//   mwld compare --grid 0:5:0.25 --t 2 --lambda 0.3 --csv fig5.csv
//   mwld mc      --L 20,40,80 --B 0.65 --source expinc --nu 2 --capacities 1
//
// Every command prints one JSON document that embeds the resolved
// configuration and its SHA-256 digest. Exit codes: 0 success, 2 bad
// configuration or input, 3 resource limit.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "mwld/config.hpp"
#include "mwld/mwld.hpp"

using json = nlohmann::ordered_json;
using namespace mwld;

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string fmt17(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct Setup {
    Config cfg;
    RateRegion region;
    Policy policy;
    SourceModel model;  // in physical units
    Vec caps;
    std::size_t threads = 1;

    Eigen::Index queues() const { return region.queues(); }
    SourceModel normalized() const { return model.normalized(caps); }
};

Setup resolve(const Config& cfg, std::size_t threads) {
    Setup s{cfg, build_region(cfg), Policy(), SourceModel(), Vec(), threads};
    s.policy = build_policy(cfg, s.region.queues());
    s.model = build_model(cfg, s.region.queues());
    s.caps = s.region.capacities();
    return s;
}

Vec target_b(const Setup& s) {
    const std::string& text = s.cfg.get("run.b");
    if (text == "mean") return s.model.mean();
    const Vec b = Config::parse_vector(text, "run.b");
    if (b.size() != s.queues()) throw ConfigError("run.b needs one value per queue");
    if (!all_finite_nonneg(b)) throw ConfigError("run.b must be nonnegative");
    return b;
}

Method parse_method(const std::string& m) {
    if (m == "branch-convex") return Method::BranchConvex;
    if (m == "grid-dp") return Method::GridDP;
    throw ConfigError("run.method must be branch-convex or grid-dp");
}

RateFnOptions ratefn_options(const Setup& s) {
    RateFnOptions o;
    o.threads = s.threads;
    o.grid.delta = s.cfg.number("run.delta");
    o.grid.threads = s.threads;
    return o;
}

void require_simplex(const Setup& s) {
    if (!s.region.is_simplex()) throw ConfigError("rate functions are computed on simplex regions");
}

RateFnOutcome policy_outcome(const Setup& s, const SourceModel& nm, const Vec& bn, Eigen::Index t, Method method) {
    const RateFnOptions opt = ratefn_options(s);
    if (s.policy.is_gps() || s.policy.is_priority()) return it_policy(nm, bn, t, s.policy, method, opt);
    return it_exact(nm, bn, t, method, opt, s.policy);
}

json outcome_json(const RateFnOutcome& r, const Vec& caps) {
    json j;
    j["value"] = number_or_null(r.value);
    j["t_star"] = r.timescale;
    j["method"] = to_string(r.method);
    j["truncated"] = r.truncated;
    json path = json::array();
    for (Eigen::Index s = r.optimal_path.horizon(); s >= 1; --s) {
        path.push_back(vec_json(r.optimal_path.slot(s).cwiseProduct(caps)));
    }
    j["path"] = path;  // oldest slot first
    json branches = json::array();
    for (std::size_t i = 0; i < r.branch_sequence.size(); ++i) {
        branches.push_back({{"label", r.branch_labels[i]}, {"service", vec_json(r.branch_sequence[i].cwiseProduct(caps))}});
    }
    j["branch_sequence"] = branches;
    return j;
}

std::pair<ArrivalPath, std::vector<Vec>> physical(const RateFnOutcome& r, const Vec& caps) {
    ArrivalPath path(Mat(r.optimal_path.matrix().array().colwise() * caps.array()));
    std::vector<Vec> service;
    for (const Vec& v : r.branch_sequence) service.push_back(v.cwiseProduct(caps));
    return {path, service};
}

void write_trajectory_csv(const std::string& file, const ArrivalPath& path, const std::vector<Workload>& traj) {
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write '" + file + "'");
    out << "slot,queue,arrival,workload_after\n";
    for (Eigen::Index s = path.horizon(); s >= 1; --s) {
        const Workload& w = traj[static_cast<std::size_t>(path.horizon() - s + 1)];
        for (Eigen::Index k = 0; k < path.queues(); ++k) {
            out << s << ',' << k + 1 << ',' << fmt17(path(k, s)) << ',' << fmt17(w[k]) << '\n';
        }
    }
}

json header(const Setup& s, const std::string& command) {
    json j;
    j["command"] = command;
    json c;
    for (const auto& [k, v] : s.cfg.values()) c[k] = v;
    j["config"] = c;
    j["config_digest"] = s.cfg.digest();
    return j;
}

json cmd_ratefn(const Setup& s, const std::string& csv) {
    require_simplex(s);
    const Vec b = target_b(s);
    const Eigen::Index t = s.cfg.integer("run.t");
    const SourceModel nm = s.normalized();
    const Vec bn = b.cwiseQuotient(s.caps);
    const RateFnOutcome r = policy_outcome(s, nm, bn, t, parse_method(s.cfg.get("run.method")));
    json j = header(s, "ratefn");
    j["b"] = vec_json(b);
    j["t"] = t;
    j.update(outcome_json(r, s.caps));
    if (!s.policy.is_max_weight() && nm.mean().sum() < 1.0) {
        const long long cap = s.cfg.integer("run.t_cap");
        const RateFnOutcome jr = j_rate_fn(nm, bn, cap > 0 ? cap : t, ratefn_options(s), s.policy);
        j["J"] = {{"value", number_or_null(jr.value)}, {"t_star", jr.timescale}, {"truncated", jr.truncated}};
    }
    if (!csv.empty() && std::isfinite(r.value)) {
        const auto [path, service] = physical(r, s.caps);
        write_trajectory_csv(csv, path, replay(path, service));
    }
    return j;
}

json cmd_bounds(const Setup& s) {
    require_simplex(s);
    const Vec b = target_b(s);
    if (s.queues() != 2) throw ConfigError("bounds need two queues");
    const Eigen::Index t = s.cfg.integer("run.t");
    const BoundPair bp = it_bounds(s.normalized(), b.cwiseQuotient(s.caps), t);
    json j = header(s, "bounds");
    j["b"] = vec_json(b);
    j["t"] = t;
    j["lower"] = bp.lower;
    j["lower_u"] = bp.lower_u;
    j["upper"] = number_or_null(bp.upper);
    j["upper_u"] = std::isfinite(bp.upper) ? json(bp.upper_u) : json(nullptr);
    return j;
}

json cmd_i2(const Setup& s) {
    require_simplex(s);
    const Vec b = target_b(s);
    if (s.queues() != 2) throw ConfigError("i2 needs two queues");
    const RateFnOutcome r = exact_i2(s.normalized(), b.cwiseQuotient(s.caps));
    json j = header(s, "i2");
    j["b"] = vec_json(b);
    j.update(outcome_json(r, s.caps));
    return j;
}

std::vector<double> parse_range(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(Config::parse_number(Config::trim(item), "run.grid"));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
        throw ConfigError("run.grid must be lo:hi:step with step > 0");
    }
    std::vector<double> out;
    const auto n = static_cast<long long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return out;
}

json cmd_compare(const Setup& s, const std::string& csv) {
    require_simplex(s);
    if (s.queues() != 2) throw ConfigError("compare needs two queues");
    const Eigen::Index t = s.cfg.integer("run.t");
    const std::vector<double> axis = parse_range(s.cfg.get("run.grid"));
    const SourceModel nm = s.normalized();
    const RateFnOptions opt = ratefn_options(s);
    const Method method = parse_method(s.cfg.get("run.method"));
    const Policy gps = Policy::gps(Vec::Ones(2));
    const Policy prio = Policy::priority({0, 1});
    std::ostringstream rows;
    rows << "b1,b2,mw,gps,prio\n";
    std::size_t mw_ge_gps = 0, cells = 0;
    for (double b2 : axis) {
        for (double b1 : axis) {
            const Vec bn = make_vec({b1, b2}).cwiseQuotient(s.caps);
            const double mw = it_exact(nm, bn, t, method, opt).value;
            const double g = it_policy(nm, bn, t, gps, method, opt).value;
            const double p = it_policy(nm, bn, t, prio, method, opt).value;
            rows << fmt17(b1) << ',' << fmt17(b2) << ',' << fmt17(mw) << ',' << fmt17(g) << ',' << fmt17(p) << '\n';
            ++cells;
            if (mw >= g - 1e-9) ++mw_ge_gps;
        }
    }
    json j = header(s, "compare");
    j["t"] = t;
    j["cells"] = cells;
    j["cells_mw_ge_gps"] = mw_ge_gps;
    if (csv.empty()) {
        j["csv"] = rows.str();
    } else {
        std::ofstream out(csv);
        if (!out) throw ConfigError("cannot write '" + csv + "'");
        out << rows.str();
        j["csv_file"] = csv;
    }
    return j;
}

json cmd_mc(const Setup& s, const std::string& csv) {
    const Vec Lv = s.cfg.vector("run.L");
    std::vector<std::size_t> Ls;
    for (Eigen::Index i = 0; i < Lv.size(); ++i) {
        if (!(Lv[i] >= 1.0) || Lv[i] != std::floor(Lv[i])) throw ConfigError("run.L entries must be positive integers");
        Ls.push_back(static_cast<std::size_t>(Lv[i]));
    }
    Vec B = s.cfg.vector("run.B");
    if (B.size() == 1 && s.queues() > 1) B = Vec::Constant(s.queues(), B[0]);
    if (B.size() != s.queues()) throw ConfigError("run.B needs one value per queue (or a single value)");
    const long long T = s.cfg.integer("run.T");
    const long long reps = s.cfg.integer("run.replicates");
    const long long seed = s.cfg.integer("run.seed");
    if (T < 1 || reps < 1 || seed < 0) throw ConfigError("run.T and run.replicates must be >= 1, run.seed >= 0");
    McOptions mo;
    mo.threads = s.threads;
    const auto sweep = decay_sweep(s.model, s.policy, s.region, Ls, T, B, static_cast<std::size_t>(reps),
                                   static_cast<std::uint64_t>(seed), mo);
    std::ostringstream rows;
    rows << "L,T";
    for (Eigen::Index k = 0; k < s.queues(); ++k) rows << ",B" << k + 1;
    rows << ",replicates,p_hat,ci_lo,ci_hi,decay\n";
    json ests = json::array();
    for (const auto& e : sweep) {
        rows << e.L << ',' << e.T;
        for (Eigen::Index k = 0; k < s.queues(); ++k) rows << ',' << fmt17(e.B[k]);
        rows << ',' << e.replicates << ',' << fmt17(e.p_hat) << ',' << fmt17(e.ci_lo) << ',' << fmt17(e.ci_hi) << ','
             << fmt17(e.decay) << '\n';
        ests.push_back({{"L", e.L},
                        {"T", e.T},
                        {"B", vec_json(e.B)},
                        {"replicates", e.replicates},
                        {"hits", e.hits},
                        {"p_hat", e.p_hat},
                        {"ci95", {e.ci_lo, e.ci_hi}},
                        {"decay", number_or_null(e.decay)},
                        {"sum_identity_error", e.sum_identity_error}});
    }
    json j = header(s, "mc");
    j["estimates"] = ests;
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw ConfigError("cannot write '" + csv + "'");
        out << rows.str();
        j["csv_file"] = csv;
    }
    return j;
}

json cmd_trajectory(const Setup& s, const std::string& csv) {
    json j = header(s, "trajectory");
    const std::string& arrivals = s.cfg.get("run.arrivals");
    ArrivalPath path;
    std::vector<Workload> traj;
    if (!arrivals.empty()) {
        // Slots listed oldest first, separated by ';'.
        std::vector<Vec> slots;
        std::stringstream ss(arrivals);
        std::string item;
        while (std::getline(ss, item, ';')) slots.push_back(Config::parse_vector(item, "run.arrivals"));
        Mat m(s.queues(), static_cast<Eigen::Index>(slots.size()));
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i].size() != s.queues()) throw ConfigError("run.arrivals: each slot needs one value per queue");
            m.col(static_cast<Eigen::Index>(slots.size() - 1 - i)) = slots[i];
        }
        try {
            path = ArrivalPath(m);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("run.arrivals: ") + e.what());
        }
        traj = trajectory(path, s.policy, s.region);
    } else {
        require_simplex(s);
        const Vec bn = target_b(s).cwiseQuotient(s.caps);
        const RateFnOutcome r =
            policy_outcome(s, s.normalized(), bn, s.cfg.integer("run.t"), parse_method(s.cfg.get("run.method")));
        if (!std::isfinite(r.value)) throw ConfigError("target workload is unreachable");
        std::vector<Vec> service;
        std::tie(path, service) = physical(r, s.caps);
        traj = replay(path, service);
        j["value"] = r.value;
    }
    json w = json::array();
    for (const Workload& x : traj) w.push_back(vec_json(x));
    json a = json::array();
    for (Eigen::Index sl = path.horizon(); sl >= 1; --sl) a.push_back(vec_json(path.slot(sl)));
    j["arrivals"] = a;
    j["workloads"] = w;
    if (!csv.empty()) write_trajectory_csv(csv, path, traj);
    return j;
}

json cmd_oracle(const Setup& s) {
    require_simplex(s);
    if (s.queues() != 2) throw ConfigError("the oracle needs two queues");
    const Vec b = target_b(s);
    const Eigen::Index t = s.cfg.integer("run.t");
    OracleConfig oc;
    oc.delta = s.cfg.number("oracle.delta");
    oc.target_tolerance = s.cfg.number("oracle.tolerance");
    const SourceModel nm = s.normalized();
    const Vec bn = b.cwiseQuotient(s.caps);
    const OracleResult r = brute_force_it(nm, bn, t, oc, s.policy);
    json j = header(s, "oracle");
    j["instance"] = {{"b", vec_json(b)}, {"t", t}, {"policy", s.policy.name()}};
    j["delta"] = oc.delta;
    j["value"] = number_or_null(r.value);
    j["slack"] = oracle_slack(nm, bn, t, oc);
    json path = json::array();
    if (std::isfinite(r.value)) {
        for (Eigen::Index sl = r.argmin_path.horizon(); sl >= 1; --sl) {
            path.push_back(vec_json(r.argmin_path.slot(sl).cwiseProduct(s.caps)));
        }
    }
    j["argmin_path"] = path;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Large-deviations rate functions for max-weight scheduling"};
    app.require_subcommand(1);
    std::string config_file, out_file, csv_file;
    std::size_t threads = 0;
    std::map<std::string, std::string> overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "configuration file (key = value lines)");
        sub->add_option("--out", out_file, "write the JSON result here instead of stdout");
        sub->add_option("--csv", csv_file, "CSV output file");
        sub->add_option("--threads", threads, "worker threads (default: MWLD_THREADS or hardware)");
        const std::vector<std::pair<std::string, std::string>> flags = {
            {"--b", "run.b"},           {"--t", "run.t"},
            {"--t-cap", "run.t_cap"},   {"--method", "run.method"},
            {"--delta", "run.delta"},   {"--grid", "run.grid"},
            {"--L", "run.L"},           {"--B", "run.B"},
            {"--T", "run.T"},           {"--replicates", "run.replicates"},
            {"--seed", "run.seed"},     {"--arrivals", "run.arrivals"},
            {"--lambda", "source.lambda"}, {"--mu", "source.mu"},
            {"--nu", "source.nu"},      {"--m", "source.m"},
            {"--source", "source.kind"}, {"--policy", "policy.kind"},
            {"--gps-weights", "policy.gps_weights"}, {"--prio-order", "policy.prio_order"},
            {"--tie-break", "policy.tie_break"}, {"--capacities", "region.capacities"},
            {"--region", "region.kind"}, {"--vertices", "region.vertices"},
            {"--oracle-delta", "oracle.delta"}, {"--oracle-tolerance", "oracle.tolerance"},
        };
        for (const auto& [flag, key] : flags) {
            const std::string k = key;
            sub->add_option_function<std::string>(flag, [&overrides, k](const std::string& v) { overrides[k] = v; },
                                                  "overrides " + key);
        }
    };

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"ratefn", "finite-horizon rate function I_t(b) and J(b)"},
        {"bounds", "two-queue lower/upper bounds on I_t(b)"},
        {"i2", "exact two-slot rate function by set decomposition"},
        {"mc", "Monte Carlo overflow probabilities and decay exponents"},
        {"compare", "I_t over a b-grid for max-weight, GPS and priority"},
        {"trajectory", "arrival and workload trajectory of a path"},
        {"oracle", "brute-force grid value of I_t(b)"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, desc] : commands) {
        subs[name] = app.add_subcommand(name, desc);
        add_common(subs[name]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        Config cfg = config_file.empty() ? Config() : Config::load(config_file);
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        const std::size_t nthreads = threads > 0 ? threads : default_threads();
        const Setup s = resolve(cfg, nthreads);

        json result;
        if (subs["ratefn"]->parsed()) result = cmd_ratefn(s, csv_file);
        else if (subs["bounds"]->parsed()) result = cmd_bounds(s);
        else if (subs["i2"]->parsed()) result = cmd_i2(s);
        else if (subs["mc"]->parsed()) result = cmd_mc(s, csv_file);
        else if (subs["compare"]->parsed()) result = cmd_compare(s, csv_file);
        else if (subs["trajectory"]->parsed()) result = cmd_trajectory(s, csv_file);
        else result = cmd_oracle(s);

        const std::string text = result.dump(2) + "\n";
        if (out_file.empty()) {
            std::cout << text;
        } else {
            std::ofstream out(out_file);
            if (!out) throw ConfigError("cannot write '" + out_file + "'");
            out << text;
        }
        return 0;
    } catch (const ResourceError& e) {
        std::cerr << "resource limit: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
