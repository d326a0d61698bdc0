#pragma once

// Flat dotted-key run configuration ("key = value" lines, '#' comments) and
// the builders that turn it into library objects. Every key has a default, so
// a resolved configuration is always complete and its canonical text (sorted
// keys) identifies a run; the digest is the SHA-256 of that text.

#include <openssl/evp.h>

#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "mwld/policy.hpp"
#include "mwld/source.hpp"

namespace mwld {

class Config {
public:
    Config() : values_(defaults()) {}

    static const std::map<std::string, std::string>& defaults() {
        static const std::map<std::string, std::string> d = {
            {"region.kind", "simplex"},
            {"region.capacities", "1,1"},
            {"region.vertices", ""},
            {"policy.kind", "wcmw"},
            {"policy.gps_weights", ""},
            {"policy.prio_order", ""},
            {"policy.tie_break", "lowest"},
            {"source.kind", "cpe"},
            {"source.lambda", "0.1"},
            {"source.mu", "0.01"},
            {"source.nu", "2"},
            {"source.m", "0.5"},
            {"run.b", "3,1"},
            {"run.t", "2"},
            {"run.t_cap", "0"},
            {"run.method", "branch-convex"},
            {"run.delta", "0.05"},
            {"run.grid", "0:5:0.25"},
            {"run.L", "10"},
            {"run.B", "0,0"},
            {"run.T", "4"},
            {"run.replicates", "100000"},
            {"run.seed", "1"},
            {"run.arrivals", ""},
            {"oracle.delta", "0.02"},
            {"oracle.tolerance", "-1"},
        };
        return d;
    }

    static bool known(const std::string& key) {
        if (defaults().count(key)) return true;
        static const std::regex per_queue(R"(source\.[1-8]\.(kind|lambda|mu|nu|m))");
        return std::regex_match(key, per_queue);
    }

    void set(const std::string& key, const std::string& value) {
        if (!known(key)) throw ConfigError("unknown configuration key '" + key + "'");
        values_[key] = value;
    }

    static Config parse(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string body = trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
            }
            const std::string key = trim(body.substr(0, eq));
            if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
            c.set(key, trim(body.substr(eq + 1)));
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    const std::string& get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("configuration key '" + key + "' is not set");
        return it->second;
    }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    double number(const std::string& key) const { return parse_number(get(key), key); }
    long long integer(const std::string& key) const {
        const double v = number(key);
        if (v != std::floor(v)) throw ConfigError(key + " must be an integer");
        return static_cast<long long>(v);
    }
    Vec vector(const std::string& key) const { return parse_vector(get(key), key); }

    const std::map<std::string, std::string>& values() const { return values_; }

    std::string canonical_text() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

    std::string digest() const {
        const std::string text = canonical_text();
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
            throw Error("SHA-256 digest failed");
        }
        static const char* hex = "0123456789abcdef";
        std::string s;
        for (unsigned int i = 0; i < len; ++i) {
            s += hex[md[i] >> 4];
            s += hex[md[i] & 15];
        }
        return s;
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static double parse_number(const std::string& s, const std::string& what) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (trim(s.substr(used)).empty() && std::isfinite(v)) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(what + ": '" + s + "' is not a number");
    }

    static Vec parse_vector(const std::string& s, const std::string& what) {
        std::vector<double> xs;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) xs.push_back(parse_number(trim(item), what));
        if (xs.empty()) throw ConfigError(what + ": empty list");
        Vec v(static_cast<Eigen::Index>(xs.size()));
        for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
        return v;
    }

private:
    std::map<std::string, std::string> values_;
};

inline RateRegion build_region(const Config& c) {
    const std::string& kind = c.get("region.kind");
    if (kind == "simplex") {
        try {
            return RateRegion::simplex(c.vector("region.capacities"));
        } catch (const DomainError& e) {
            throw ConfigError(std::string("region.capacities: ") + e.what());
        }
    }
    if (kind == "polytope") {
        std::vector<Vec> verts;
        std::stringstream ss(c.get("region.vertices"));
        std::string item;
        while (std::getline(ss, item, ';')) {
            if (!Config::trim(item).empty()) verts.push_back(Config::parse_vector(item, "region.vertices"));
        }
        try {
            return RateRegion::polytope(verts);
        } catch (const Error& e) {
            throw ConfigError(std::string("region.vertices: ") + e.what());
        }
    }
    throw ConfigError("region.kind must be simplex or polytope");
}

inline Policy build_policy(const Config& c, Eigen::Index k) {
    const std::string& kind = c.get("policy.kind");
    TieBreak tie = LowestIndex{};
    const std::string& tb = c.get("policy.tie_break");
    if (tb != "lowest") {
        const long long idx = static_cast<long long>(Config::parse_number(tb, "policy.tie_break"));
        if (idx < 0) throw ConfigError("policy.tie_break must be 'lowest' or a branch index >= 0");
        tie = ExplicitBranch{static_cast<std::size_t>(idx)};
    }
    try {
        if (kind == "mw") return Policy::max_weight(tie);
        if (kind == "wcmw") return Policy::wc_max_weight(tie);
        if (kind == "gps") {
            const std::string& w = c.get("policy.gps_weights");
            const Vec weights = w.empty() ? Vec(Vec::Ones(k)) : Config::parse_vector(w, "policy.gps_weights");
            if (weights.size() != k) throw ConfigError("policy.gps_weights needs one weight per queue");
            return Policy::gps(weights);
        }
        if (kind == "prio") {
            const std::string& o = c.get("policy.prio_order");
            std::vector<Eigen::Index> order;
            if (o.empty()) {
                for (Eigen::Index q = 0; q < k; ++q) order.push_back(q);
            } else {
                const Vec v = Config::parse_vector(o, "policy.prio_order");
                for (Eigen::Index i = 0; i < v.size(); ++i) order.push_back(static_cast<Eigen::Index>(v[i]) - 1);
            }
            if (static_cast<Eigen::Index>(order.size()) != k) throw ConfigError("policy.prio_order needs every queue");
            return Policy::priority(order);
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("policy: ") + e.what());
    }
    throw ConfigError("policy.kind must be one of mw, wcmw, gps, prio");
}

inline QueueSource build_queue_source(const Config& c, Eigen::Index k) {
    const std::string prefix = "source." + std::to_string(k + 1) + ".";
    auto field = [&](const std::string& name) -> const std::string& {
        return c.has(prefix + name) ? c.get(prefix + name) : c.get("source." + name);
    };
    auto num = [&](const std::string& name) { return Config::parse_number(field(name), "source." + name); };
    const std::string& kind = field("kind");
    try {
        if (kind == "cpe") return QueueSource(CompoundPoissonExp{num("lambda"), num("mu")});
        if (kind == "cpe-derived") return compound_poisson_exp_conjugate(num("lambda"), num("mu"));
        if (kind == "expinc") return QueueSource(ExpIncrement{num("nu")});
        if (kind == "det") return QueueSource(Deterministic{num("m")});
    } catch (const DomainError& e) {
        throw ConfigError(std::string("source: ") + e.what());
    }
    throw ConfigError("source.kind must be one of cpe, cpe-derived, expinc, det");
}

inline SourceModel build_model(const Config& c, Eigen::Index k) {
    std::vector<QueueSource> qs;
    for (Eigen::Index q = 0; q < k; ++q) qs.push_back(build_queue_source(c, q));
    return SourceModel(std::move(qs));
}

}  // namespace mwld
