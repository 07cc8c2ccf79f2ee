#pragma once
// Run configuration: JSON with nested sections, validated in full before any computation.

#include "gluing.hpp"
#include "io.hpp"
#include "limits.hpp"

namespace kflow {

struct RunTriple {
    double s = 1e-3;
    double R2 = 1.0;
    double lambda = 10.0;
};

struct TangentConfig {
    double s = 1e-5;
    double alpha = 1.5;  // perturbation exponent of the tangent run
    double R2 = 1.0;
    double lambda = 4.0;
    double lambda0 = 4.0;
    std::vector<double> t_sequence{0.08, 0.04, 0.02, 0.01};
    std::vector<double> gh_delta1{0.05, 0.1, 0.2};
    double gh_delta2 = 0.1;
};

struct RefinementConfig {
    double t0 = 0.05;
    double delta2 = 0.01;
    double R2 = 1.0;
};

struct RunConfig {
    ConeModel cone = ConeModel::flat_quotient(2, 3);
    double exp_x_min = -6.0, exp_x_max = 8.0;
    std::size_t exp_N = 561;
    PerturbationSpec u1;
    std::vector<RunTriple> runs{{1e-3, 1.0, 10.0}, {1e-4, 1.0, 10.0}};
    double x_lo = -2.0, margin = 4.0, h = 0.025;
    Gauge gauge = Gauge::Drift;
    double dt = 0.01;
    int max_halvings = 12;
    double t_end_fraction = 0.5;  // fraction of the drift horizon T_s'
    std::size_t store_stride = 1;
    std::vector<std::string> monitors{"all"};
    TangentConfig tangent;
    RefinementConfig refinement;
    std::string out_dir = "runs/default";
    io::json canonical;  // normalised config, hashed for the manifest

    static const std::vector<std::string>& monitor_names() {
        static const std::vector<std::string> names{"fpsi", "potential", "barrier", "c2", "c3",
                                                    "curvature", "bochner", "hamiltonian", "maxp"};
        return names;
    }
    bool monitor(const std::string& m) const {
        return std::find(monitors.begin(), monitors.end(), "all") != monitors.end() ||
               std::find(monitors.begin(), monitors.end(), m) != monitors.end();
    }

    ExpanderProfile solve() const { return solve_expander(cone, Grid(exp_x_min, exp_x_max, exp_N)); }
    Grid grid_for(const RunTriple& r) const {
        return drift_grid(cone, {r.s, r.R2, r.lambda}, x_lo, margin, h);
    }
    /// SHA-256 of the normalised config without the output section.
    std::string hash() const {
        io::json j = canonical;
        j.erase("output");
        return io::sha256_hex(j.dump());
    }

    static RunConfig from_json(const io::json& j);
    static RunConfig from_file(const std::string& path);
    io::json to_json() const;
};

namespace detail {

/// Rejects keys outside `allowed` so that typos fail loudly.
inline void check_keys(const io::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get_or(const io::json& j, const char* key, T dflt, const std::string& where) {
    if (!j.contains(key)) return dflt;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
    }
}

inline std::vector<double> number_list(const io::json& j, const char* key, std::vector<double> dflt,
                                       const std::string& where) {
    if (!j.contains(key)) return dflt;
    const auto& v = j.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError("'" + std::string(key) + "' in " + where + " must be a number or list");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("non-numeric entry in '" + std::string(key) + "'");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const io::json& j) {
    using detail::get_or;
    RunConfig c;
    detail::check_keys(j, "config", {"cone", "expander", "perturbation", "runs", "grid", "gauge", "integrator",
                                      "monitors", "tangent", "refinement", "output"});
    try {
        if (j.contains("cone")) {
            const auto& q = j["cone"];
            detail::check_keys(q, "cone", {"family", "n", "k", "gamma", "c"});
            const auto fam = get_or<std::string>(q, "family", "flat_quotient", "cone");
            const int n = get_or<int>(q, "n", 2, "cone");
            if (fam == "flat_quotient") c.cone = ConeModel::flat_quotient(n, get_or<int>(q, "k", 1, "cone"));
            else if (fam == "cone_angle")
                c.cone = ConeModel::cone_angle(n, get_or<double>(q, "gamma", 1.0, "cone"), get_or<double>(q, "c", 0.5, "cone"));
            else throw ConfigError("unknown cone family '" + fam + "'");
        }
        if (j.contains("expander")) {
            const auto& q = j["expander"];
            detail::check_keys(q, "expander", {"x_min", "x_max", "N"});
            c.exp_x_min = get_or(q, "x_min", c.exp_x_min, "expander");
            c.exp_x_max = get_or(q, "x_max", c.exp_x_max, "expander");
            c.exp_N = get_or(q, "N", c.exp_N, "expander");
            if (!(c.exp_x_min < c.exp_x_max) || c.exp_N < 16) throw ConfigError("expander grid needs x_min < x_max, N >= 16");
        }
        if (j.contains("perturbation")) {
            const auto& q = j["perturbation"];
            detail::check_keys(q, "perturbation", {"eps0", "alpha", "r0"});
            c.u1.eps0 = get_or(q, "eps0", c.u1.eps0, "perturbation");
            c.u1.alpha = get_or(q, "alpha", c.u1.alpha, "perturbation");
            if (q.contains("r0") && !q["r0"].is_null()) c.u1.r0 = get_or(q, "r0", c.u1.r0, "perturbation");
            c.u1.validate();
        }
        if (j.contains("runs")) {
            const auto& q = j["runs"];
            detail::check_keys(q, "runs", {"s", "R2", "lambda"});
            const auto s = detail::number_list(q, "s", {1e-3}, "runs");
            auto R2 = detail::number_list(q, "R2", {1.0}, "runs");
            auto lam = detail::number_list(q, "lambda", {10.0}, "runs");
            auto widen = [&](std::vector<double>& v, const char* name) {
                if (v.size() == 1) v.assign(s.size(), v[0]);
                if (v.size() != s.size()) throw ConfigError(std::string("runs.") + name + " must be scalar or match runs.s");
            };
            widen(R2, "R2");
            widen(lam, "lambda");
            c.runs.clear();
            for (std::size_t i = 0; i < s.size(); ++i) c.runs.push_back({s[i], R2[i], lam[i]});
        }
        if (j.contains("grid")) {
            const auto& q = j["grid"];
            detail::check_keys(q, "grid", {"x_lo", "margin", "h"});
            c.x_lo = get_or(q, "x_lo", c.x_lo, "grid");
            c.margin = get_or(q, "margin", c.margin, "grid");
            c.h = get_or(q, "h", c.h, "grid");
            if (!(c.h > 0.0 && c.margin > 0.0)) throw ConfigError("grid needs h > 0 and margin > 0");
        }
        if (j.contains("gauge")) c.gauge = gauge_from_name(j["gauge"].get<std::string>());
        if (j.contains("integrator")) {
            const auto& q = j["integrator"];
            detail::check_keys(q, "integrator", {"dt", "max_halvings", "t_end_fraction", "store_stride"});
            c.dt = get_or(q, "dt", c.dt, "integrator");
            c.max_halvings = get_or(q, "max_halvings", c.max_halvings, "integrator");
            c.t_end_fraction = get_or(q, "t_end_fraction", c.t_end_fraction, "integrator");
            c.store_stride = get_or(q, "store_stride", c.store_stride, "integrator");
            if (!(c.dt > 0.0) || !(c.t_end_fraction > 0.0 && c.t_end_fraction <= 1.0) || c.store_stride < 1)
                throw ConfigError("integrator needs dt > 0, 0 < t_end_fraction <= 1, store_stride >= 1");
        }
        if (j.contains("monitors")) {
            c.monitors = j["monitors"].get<std::vector<std::string>>();
            for (const auto& m : c.monitors)
                if (m != "all" && std::find(monitor_names().begin(), monitor_names().end(), m) == monitor_names().end())
                    throw ConfigError("unknown monitor '" + m + "'");
        }
        if (j.contains("tangent")) {
            const auto& q = j["tangent"];
            detail::check_keys(q, "tangent", {"s", "alpha", "R2", "lambda", "lambda0", "t_sequence", "gh_delta1", "gh_delta2"});
            auto& t = c.tangent;
            t.s = get_or(q, "s", t.s, "tangent");
            t.alpha = get_or(q, "alpha", t.alpha, "tangent");
            t.R2 = get_or(q, "R2", t.R2, "tangent");
            t.lambda = get_or(q, "lambda", t.lambda, "tangent");
            t.lambda0 = get_or(q, "lambda0", t.lambda0, "tangent");
            t.t_sequence = detail::number_list(q, "t_sequence", t.t_sequence, "tangent");
            t.gh_delta1 = detail::number_list(q, "gh_delta1", t.gh_delta1, "tangent");
            t.gh_delta2 = get_or(q, "gh_delta2", t.gh_delta2, "tangent");
        }
        if (j.contains("refinement")) {
            const auto& q = j["refinement"];
            detail::check_keys(q, "refinement", {"t0", "delta2", "R2"});
            c.refinement.t0 = get_or(q, "t0", c.refinement.t0, "refinement");
            c.refinement.delta2 = get_or(q, "delta2", c.refinement.delta2, "refinement");
            c.refinement.R2 = get_or(q, "R2", c.refinement.R2, "refinement");
        }
        if (j.contains("output")) {
            const auto& q = j["output"];
            detail::check_keys(q, "output", {"dir"});
            c.out_dir = get_or(q, "dir", c.out_dir, "output");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    } catch (const std::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }

    // standing constraints, checked before anything is computed
    if (c.runs.empty()) throw ConfigError("runs.s is empty");
    for (const auto& r : c.runs) {
        const std::string tag = " (s=" + io::num(r.s) + ", R2=" + io::num(r.R2) + ", lambda=" + io::num(r.lambda) + ")";
        if (!(r.s > 0.0 && r.s <= 1.0)) throw ConfigError("s must lie in (0,1]" + tag);
        if (!(r.R2 > 4.0 * std::sqrt(r.s))) throw ConfigError("constraint R^2 > 4 sqrt(s) violated" + tag);
        if (!(r.lambda > 0.0 && r.lambda <= 1.0 / std::sqrt(r.s))) throw ConfigError("constraint lambda <= 1/sqrt(s) violated" + tag);
    }
    {
        const auto& t = c.tangent;
        if (!(t.R2 > 4.0 * std::sqrt(t.s)) || !(t.lambda > 0.0 && t.lambda <= 1.0 / std::sqrt(t.s)))
            throw ConfigError("tangent run violates R^2 > 4 sqrt(s) or lambda <= 1/sqrt(s)");
        TangentProbe p{t.t_sequence, t.lambda0, {}};
        try {
            p.validate_window(t.R2, t.lambda);
        } catch (const WindowError& e) {
            throw ConfigError(e.what());
        }
    }
    if (!(c.refinement.t0 > 0.0 && c.refinement.delta2 > 0.0)) throw ConfigError("refinement needs t0 > 0, delta2 > 0");
    c.canonical = c.to_json();
    return c;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    io::json j;
    try {
        j = io::json::parse(io::read_file(path));
    } catch (const MissingArtifacts&) {
        throw ConfigError("cannot read config " + path);
    } catch (const std::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

inline io::json RunConfig::to_json() const {
    using io::jnum;
    io::json cone_j = {{"family", cone.family == ConeFamily::FlatQuotient ? "flat_quotient" : "cone_angle"}, {"n", cone.n}};
    if (cone.family == ConeFamily::FlatQuotient) cone_j["k"] = cone.k;
    else cone_j["gamma"] = cone.gamma, cone_j["c"] = cone.c;
    io::json s = io::json::array(), R2 = io::json::array(), lam = io::json::array();
    for (const auto& r : runs) s.push_back(r.s), R2.push_back(r.R2), lam.push_back(r.lambda);
    return {{"cone", cone_j},
            {"expander", {{"x_min", exp_x_min}, {"x_max", exp_x_max}, {"N", exp_N}}},
            {"perturbation", {{"eps0", u1.eps0}, {"alpha", u1.alpha}, {"r0", jnum(u1.r0)}}},
            {"runs", {{"s", s}, {"R2", R2}, {"lambda", lam}}},
            {"grid", {{"x_lo", x_lo}, {"margin", margin}, {"h", h}}},
            {"gauge", gauge_name(gauge)},
            {"integrator", {{"dt", dt}, {"max_halvings", max_halvings}, {"t_end_fraction", t_end_fraction},
                            {"store_stride", store_stride}}},
            {"monitors", monitors},
            {"tangent", {{"s", tangent.s}, {"alpha", tangent.alpha}, {"R2", tangent.R2}, {"lambda", tangent.lambda},
                         {"lambda0", tangent.lambda0}, {"t_sequence", tangent.t_sequence},
                         {"gh_delta1", tangent.gh_delta1}, {"gh_delta2", tangent.gh_delta2}}},
            {"refinement", {{"t0", refinement.t0}, {"delta2", refinement.delta2}, {"R2", refinement.R2}}},
            {"output", {{"dir", out_dir}}}};
}

}  // namespace kflow
