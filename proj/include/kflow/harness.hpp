#pragma once
// Experiment stages behind the command-line tool. Each stage writes CSV series, a
// reports.json per run and optional SVG plots under the output directory, and records its
// files in manifest.json. Outputs depend only on the config; wall-clock timings go to a
// separate timings.json so manifests stay bit-identical across reruns.

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "config.hpp"

namespace kflow {

namespace fs = std::filesystem;
using io::json;

/// Runs f(0..n-1) on up to `jobs` threads; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, jobs > 0 ? jobs : 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto work = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(m);
                if (!err) err = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> ts;
        for (std::size_t w = 0; w < workers; ++w) ts.emplace_back(work);
        for (auto& t : ts) t.join();
    }
    if (err) std::rethrow_exception(err);
}

inline std::string s_tag(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s_%.3e", s);
    return buf;
}

/// One CLI invocation: config, output root, expander and the manifest being built.
class Session {
public:
    Session(RunConfig cfg, fs::path out, int jobs = 1) : cfg_(std::move(cfg)), out_(std::move(out)), jobs_(jobs) {
        fs::create_directories(out_);
    }

    const RunConfig& config() const { return cfg_; }
    const fs::path& out() const { return out_; }
    int jobs() const { return jobs_; }

    std::shared_ptr<const ExpanderProfile> expander() {
        std::lock_guard<std::mutex> lk(m_);
        if (!e_) e_ = std::make_shared<const ExpanderProfile>(cfg_.solve());
        return e_;
    }

    /// Writes text to a path relative to the output root and records it.
    void write(const fs::path& rel, const std::string& text) {
        io::write_file(out_ / rel, text);
        std::lock_guard<std::mutex> lk(m_);
        files_[rel.generic_string()] = io::sha256_hex(text);
    }
    void write_json(const fs::path& rel, const json& j) { write(rel, j.dump(2) + "\n"); }
    void write_csv(const fs::path& rel, const io::CsvTable& t) { write(rel, t.str()); }
    void write_svg(const fs::path& rel, const std::string& svg) { write(rel, svg); }
    /// Records a file written by other means (checkpoints).
    void record(const fs::path& rel) {
        const std::string text = io::read_file(out_ / rel);
        std::lock_guard<std::mutex> lk(m_);
        files_[rel.generic_string()] = io::sha256_hex(text);
    }

    void stage(const std::string& name, double seconds, const ReportList& reports) {
        json fails = json::array();
        for (const auto& r : reports)
            if (!r.pass()) fails.push_back(r.name);
        std::lock_guard<std::mutex> lk(m_);
        verdicts_[name] = {{"reports", reports.size()}, {"failures", fails}};
        timings_[name] = seconds;
        failures_ += fails.size();
    }
    std::size_t failures() const { return failures_; }

    /// manifest.json merges with an existing manifest of the same config hash.
    void write_manifest() {
        const fs::path mp = out_ / "manifest.json";
        std::map<std::string, std::string> files;
        std::map<std::string, json> verdicts;
        if (fs::exists(mp)) {
            try {
                const json old = json::parse(io::read_file(mp));
                if (old.value("config_hash", "") == cfg_.hash()) {
                    for (const auto& [k, v] : old.at("files").items()) files[k] = v.get<std::string>();
                    for (const auto& [k, v] : old.at("verdicts").items()) verdicts[k] = v;
                }
            } catch (const std::exception&) {
                // unreadable manifest: start over
            }
        }
        for (const auto& [k, v] : files_) files[k] = v;
        for (const auto& [k, v] : verdicts_) verdicts[k] = v;
        json jf = json::object(), jv = json::object();
        for (const auto& [k, v] : files) jf[k] = v;
        for (const auto& [k, v] : verdicts) jv[k] = v;
        const json man = {{"format_version", io::kFormatVersion},
                          {"artifact_version", io::kArtifactVersion},
                          {"config_hash", cfg_.hash()},
                          {"config", cfg_.canonical},
                          {"timings_file", "timings.json"},
                          {"files", jf},
                          {"verdicts", jv}};
        io::write_file(mp, man.dump(2) + "\n");
        json tj = json::object();
        const fs::path tp = out_ / "timings.json";
        if (fs::exists(tp)) {
            try {
                tj = json::parse(io::read_file(tp));
            } catch (const std::exception&) {
                tj = json::object();
            }
        }
        for (const auto& [k, v] : timings_) tj[k] = v;
        io::write_file(tp, tj.dump(2) + "\n");
    }

private:
    RunConfig cfg_;
    fs::path out_;
    int jobs_;
    std::mutex m_;
    std::shared_ptr<const ExpanderProfile> e_;
    std::map<std::string, std::string> files_;
    std::map<std::string, json> verdicts_;
    std::map<std::string, double> timings_;
    std::size_t failures_ = 0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json run_context(const RunTriple& r) { return {{"s", r.s}, {"R2", r.R2}, {"lambda", r.lambda}}; }

/// Glued drift-gauge problem for one (s, R, lambda) triple.
inline FlowProblem glued_problem(const ExpanderProfile& e, const RunConfig& c, const RunTriple& r,
                                 const PerturbationSpec& u1, Gauge gauge = Gauge::Drift) {
    const auto d = glue_initial(e, u1, r.s, gluing_grid(e.cone, u1, r.s, c.x_lo, c.h));
    return FlowProblem(e, gauge, {r.s, r.R2, r.lambda}, {}, d.phi0_at);
}

inline RunResult run_or_throw(FlowState& st, const FlowProblem& prob, const RunOptions& o) {
    RunResult res = run_flow(st, prob, o);
    if (res.stop_reason.rfind("unrecoverable", 0) == 0) throw StepRejected(res.stop_reason);
    return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// solve-expander

inline ReportList stage_solve_expander(Session& S) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = S.expander();
    const Grid& g = e->grid;
    const GridFunction R = ricci_scalar(e->P, e->n);
    const GridFunction rm = riem_norm(e->P, e->n);
    io::CsvTable prof("profile", {"x", "P", "dP", "d2P", "f", "scalar", "riem"});
    for (std::size_t i = 0; i < g.N; ++i)
        prof.row({g.x(i), e->P.d[0][i], e->P.d[1][i], e->P.d[2][i], e->f[i], R[i], rm[i]});
    S.write_csv("expander/profile.csv", prof);
    S.write_svg("expander/profile.svg",
                io::svg_plot("expander profile", "x", "", {{"P''", g.nodes(), e->P.d[2]}, {"|Rm|", g.nodes(), rm.v}}, false, true));
    ReportList rs{soliton_residuals(*e)};
    EstimateReport k = EstimateReport::record("expander_constants");
    k.measured = {{"a0", e->a0},   {"b", e->b},         {"c", e->c},
                  {"c_norm", e->c_norm}, {"amp", e->amp}, {"match_mismatch", e->match_mismatch},
                  {"frozen_ode_residual", frozen_ode_residual(*e)}, {"sup_scalar_plus_n", sup_scalar_plus_n(*e)}};
    rs.push_back(k);
    S.write_json("expander/reports.json", io::report_document(rs, {{"stage", "solve-expander"}}));
    S.stage("solve-expander", detail::seconds_since(t0), rs);
    return rs;
}

// ---------------------------------------------------------------------------------------
// glue

inline ReportList stage_glue(Session& S) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = S.expander();
    const RunConfig& c = S.config();
    ReportList rs;
    const double s0 = find_s0(*e, c.u1, [&](double s) { return gluing_grid(e->cone, c.u1, s, c.x_lo, c.h); });
    EstimateReport s0r = EstimateReport::lower("s0", s0, 0.0);
    s0r.worst_violation = s0 > 0.0 ? 0.0 : -1.0;
    s0r.measured["s0"] = s0;
    rs.push_back(s0r);
    io::CsvTable ann("annulus", {"s", "sup_k0", "sup_k1", "sup_k2"});
    std::vector<double> ss;
    for (const auto& r : c.runs) ss.push_back(r.s);
    std::sort(ss.begin(), ss.end(), std::greater<>());
    ss.erase(std::unique(ss.begin(), ss.end()), ss.end());
    std::vector<double> k0;
    for (double s : ss) {
        const auto d = glue_initial(*e, c.u1, s, gluing_grid(e->cone, c.u1, s, c.x_lo, c.h));
        auto a = annulus_closeness(d);
        ann.row({s, a.measured["sup_k0"], a.measured["sup_k1"], a.measured["sup_k2"]});
        k0.push_back(a.measured["sup_k0"]);
        a.name += "_" + s_tag(s);
        rs.push_back(a);
        io::CsvTable init("initial", {"x", "P", "phi0"});
        for (std::size_t i = 0; i < d.grid.N; ++i) init.row({d.grid.x(i), d.P[i], d.phi0[i]});
        S.write_csv(fs::path("glue") / s_tag(s) / "initial.csv", init);
    }
    if (k0.size() >= 2) {
        double worst = INFINITY;
        for (std::size_t i = 0; i + 1 < k0.size(); ++i) worst = std::min(worst, k0[i] - k0[i + 1]);
        EstimateReport m = EstimateReport::lower("annulus_monotone", worst, 0.0);
        rs.push_back(m);
    }
    S.write_csv("glue/annulus.csv", ann);
    S.write_json("glue/reports.json", io::report_document(rs, {{"stage", "glue"}}));
    S.stage("glue", detail::seconds_since(t0), rs);
    return rs;
}

// ---------------------------------------------------------------------------------------
// flow

inline ReportList stage_flow(Session& S) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = S.expander();
    const RunConfig& c = S.config();
    std::vector<ReportList> per(c.runs.size());
    parallel_for(c.runs.size(), S.jobs(), [&](std::size_t k) {
        const RunTriple& r = c.runs[k];
        const FlowProblem prob = detail::glued_problem(*e, c, r, c.u1, c.gauge);
        const Grid gd = c.grid_for(r);
        const Grid g = c.gauge == Gauge::Unnormalised ? gd.shifted(std::log(r.s)) : gd;
        FlowState st = prob.initial_state(g);
        RunOptions o;
        const double rate = c.gauge == Gauge::Unnormalised ? r.s : 1.0;  // gauge time per drift time at 0
        o.dt = c.dt * rate;
        o.t_end = gauge_time(c.gauge, c.t_end_fraction * st.params.horizon1(), r.s);
        o.max_halvings = c.max_halvings;
        o.store_stride = c.store_stride;
        const RunResult res = detail::run_or_throw(st, prob, o);
        const fs::path dir = fs::path("flow") / s_tag(r.s);
        fs::create_directories(S.out() / dir);
        write_checkpoint((S.out() / dir / "final.ckpt").string(), st);
        S.record(dir / "final.ckpt");
        io::CsvTable ser("flow-series", {"tau", "t", "sup_psi", "max_rm_drift", "t_max_rm"});
        const FlowProblem drift(*e, Gauge::Drift, RegionParams{r.s, r.R2, r.lambda}, {});
        for (const auto& sn : res.snapshots) {
            FlowState snap = st;
            snap.time = sn.time;
            snap.psi = sn.psi;
            const FlowState d = transport(snap, Gauge::Drift);
            const GridFunction rm = riem_norm(perturb(drift.reference(d.psi.grid, 0.0), d.psi), e->n);
            double mx = 0.0;
            for (std::size_t i = 3; i + 3 < rm.size(); ++i) mx = std::max(mx, rm[i]);
            const double t = r.s * std::expm1(d.time);
            ser.row({d.time, t, sup_abs(sn.psi), mx, t / (t + r.s) * mx});
        }
        S.write_csv(dir / "series.csv", ser);
        EstimateReport rr = EstimateReport::record("flow_run");
        rr.measured = {{"steps", res.steps}, {"rejected", res.rejected}, {"horizon_capped", res.horizon_capped},
                       {"final_time", st.time}, {"final_tau", st.tau()}, {"N", static_cast<double>(g.N)}};
        rr.note = res.stop_reason;
        // truncation error of the outer boundary: rerun with it one unit further out and
        // difference on the shared nodes (same x_min and h, so node i coincides)
        RunConfig wide = c;
        wide.margin += 1.0;
        const Grid gwd = wide.grid_for(r);
        FlowState sw = prob.initial_state(c.gauge == Gauge::Unnormalised ? gwd.shifted(std::log(r.s)) : gwd);
        detail::run_or_throw(sw, prob, o);
        double all_nodes = 0.0, inner = 0.0;
        const double x_lam = g.x_max - c.margin;
        for (std::size_t i = 0; i < g.N; ++i) {
            const double d = std::abs(st.psi[i] - sw.psi[i]);
            all_nodes = std::max(all_nodes, d);
            if (g.x(i) <= x_lam) inner = std::max(inner, d);
        }
        EstimateReport ob = EstimateReport::record("outer_boundary_error");
        ob.measured = {{"sup_shared", all_nodes}, {"sup_inside_lambda", inner}, {"extra_margin", 1.0}};
        per[k] = {rr, ob};
        json ctx = detail::run_context(r);
        ctx["stage"] = "flow";
        ctx["gauge"] = gauge_name(c.gauge);
        S.write_json(dir / "reports.json", io::report_document(per[k], ctx));
    });
    ReportList all;
    for (auto& p : per) all.insert(all.end(), p.begin(), p.end());
    S.stage("flow", detail::seconds_since(t0), all);
    return all;
}

// ---------------------------------------------------------------------------------------
// estimates

/// Ledger of one drift-gauge run restricted to the selected monitors.
struct EstimateRun {
    RunTriple triple;
    ReportList reports;
    std::vector<CurvatureSample> c_over_t;
    std::vector<std::pair<double, double>> c2;
    double C_M = NAN, C = NAN, D = NAN;
};

inline ReportList select_monitors(const DriftLedger& L, const RunConfig& c) {
    ReportList out;
    auto add = [&](ReportList r) { out.insert(out.end(), r.begin(), r.end()); };
    const ReportList fp = fpsi_ledger(L);
    if (c.monitor("fpsi")) add(fp);
    if (c.monitor("potential")) add(potential_bounds(L));
    if (c.monitor("barrier")) add(barrier(L, measured_D(fp)));
    if (c.monitor("c2")) out.push_back(c2_monitor(L));
    if (c.monitor("c3")) add(c3_interp_monitors(L));
    if (c.monitor("curvature")) add(curvature_ledger(L));
    if (c.monitor("bochner")) out.push_back(bochner_check(L));
    if (c.monitor("hamiltonian")) out.push_back(hamiltonian_check(L));
    if (c.monitor("maxp")) add(max_principle_shadows(L));
    return out;
}

inline EstimateRun estimate_run(const ExpanderProfile& e, const RunConfig& c, const RunTriple& r,
                                double h_override = 0.0) {
    RunConfig cc = c;
    if (h_override > 0.0) cc.h = h_override;
    const FlowProblem prob = detail::glued_problem(e, cc, r, cc.u1);
    FlowState st = prob.initial_state(cc.grid_for(r));
    RunOptions o;
    o.dt = cc.dt;
    o.t_end = cc.t_end_fraction * st.params.horizon1();
    o.max_halvings = cc.max_halvings;
    o.store_stride = cc.store_stride;
    const RunResult res = detail::run_or_throw(st, prob, o);
    const DriftLedger L(prob, res);
    EstimateRun out;
    out.triple = r;
    out.reports = select_monitors(L, cc);
    out.c_over_t = c_over_t_series(L);
    out.c2 = c2_series(L);
    const ReportList fp = fpsi_ledger(L);
    out.D = measured_D(fp);
    out.C = 1.0;
    for (const auto& [tau, C] : out.c2) out.C = std::max(out.C, C);
    out.C_M = 0.0;
    for (const auto& cs : out.c_over_t) out.C_M = std::max(out.C_M, cs.t_rm);
    return out;
}

inline void write_estimate_run(Session& S, const EstimateRun& er) {
    const fs::path dir = fs::path("estimates") / s_tag(er.triple.s);
    io::CsvTable ct("c-over-t", {"t", "t_max_rm"});
    for (const auto& p : er.c_over_t) ct.row({p.t, p.t_rm});
    io::CsvTable c2("c2", {"tau", "C"});
    for (const auto& [tau, C] : er.c2) c2.row({tau, C});
    S.write_csv(dir / "c_over_t.csv", ct);
    S.write_csv(dir / "c2.csv", c2);
    json ctx = detail::run_context(er.triple);
    ctx["stage"] = "estimates";
    ctx["C_M"] = io::jnum(er.C_M);
    ctx["C"] = io::jnum(er.C);
    ctx["D"] = io::jnum(er.D);
    S.write_json(dir / "reports.json", io::report_document(er.reports, ctx));
}

inline std::vector<EstimateRun> run_estimates(Session& S) {
    const auto e = S.expander();
    const RunConfig& c = S.config();
    std::vector<EstimateRun> runs(c.runs.size());
    parallel_for(c.runs.size(), S.jobs(), [&](std::size_t k) {
        runs[k] = estimate_run(*e, c, c.runs[k]);
        write_estimate_run(S, runs[k]);
    });
    return runs;
}

inline ReportList stage_estimates(Session& S) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = run_estimates(S);
    ReportList all;
    for (const auto& r : runs) all.insert(all.end(), r.reports.begin(), r.reports.end());
    S.stage("estimates", detail::seconds_since(t0), all);
    return all;
}

// ---------------------------------------------------------------------------------------
// tangent

inline ReportList stage_tangent(Session& S) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = S.expander();
    const RunConfig& c = S.config();
    const TangentConfig& tc = c.tangent;
    TangentProbe probe{tc.t_sequence, tc.lambda0, {}};
    probe.validate_window(tc.R2, tc.lambda);
    PerturbationSpec u = c.u1;
    u.alpha = tc.alpha;
    const RunTriple r{tc.s, tc.R2, tc.lambda};
    const FlowProblem prob = detail::glued_problem(*e, c, r, u);
    FlowState st = prob.initial_state(c.grid_for(r));
    RunOptions o;
    o.dt = c.dt;
    o.max_halvings = c.max_halvings;
    for (double t : tc.t_sequence) o.targets.push_back(std::log1p(t / tc.s));
    o.t_end = *std::max_element(o.targets.begin(), o.targets.end());
    o.store_stride = 1u << 30;
    const RunResult res = detail::run_or_throw(st, prob, o);
    // probes are computed from the checkpoints, not from memory
    std::vector<PotentialSlice> slices;
    for (std::size_t i = 0; i < tc.t_sequence.size(); ++i) {
        FlowState snap = st;
        snap.time = o.targets[i];
        snap.psi = res.at(o.targets[i]).psi;
        const fs::path rel = fs::path("tangent") / ("t_" + std::to_string(i) + ".ckpt");
        fs::create_directories((S.out() / rel).parent_path());
        write_checkpoint((S.out() / rel).string(), snap);
        S.record(rel);
        slices.emplace_back(e, read_checkpoint((S.out() / rel).string()));
    }
    ReportList rs = tangent_flow(slices, probe, tc.R2, tc.lambda);
    io::CsvTable tt("tangent", {"t", "d_j0", "d_j1"});
    for (std::size_t i = 0; i < probe.distances.size(); ++i)
        tt.row({tc.t_sequence[i], probe.distances[i][0], probe.distances[i][1]});
    S.write_csv("tangent/tangent.csv", tt);
    io::CsvTable gh("gh", {"t", "delta1", "diameter", "cone_diameter", "distortion"});
    for (const auto& sl : slices)
        for (double d1 : tc.gh_delta1) {
            try {
                auto g = gh_probes(sl, d1, tc.gh_delta2, {tc.R2});
                gh.row({sl.t(), d1, g.measured["diameter"], g.measured["cone_diameter"], g.measured["distortion"]});
            } catch (const GridUnderflow&) {
                gh.row({sl.t(), d1, NAN, NAN, NAN});  // level below the slice grid
            }
        }
    S.write_csv("tangent/gh.csv", gh);
    S.write_svg("tangent/tangent.svg", io::svg_from_table(tt, "distance to the expander", true, true));
    json ctx = detail::run_context(r);
    ctx["stage"] = "tangent";
    ctx["alpha"] = tc.alpha;
    ctx["lambda0"] = tc.lambda0;
    S.write_json("tangent/reports.json", io::report_document(rs, ctx));
    S.stage("tangent", detail::seconds_since(t0), rs);
    return rs;
}

// ---------------------------------------------------------------------------------------
// sweep

/// Slices of g_s(t0) for the distinct s of the config, ordered by decreasing s.
inline std::vector<PotentialSlice> refinement_slices(Session& S, std::vector<RunTriple> runs, double t0,
                                                     std::vector<std::vector<PotentialSlice>>* early = nullptr) {
    const auto e = S.expander();
    const RunConfig& c = S.config();
    std::sort(runs.begin(), runs.end(), [](auto& a, auto& b) { return a.s > b.s; });
    runs.erase(std::unique(runs.begin(), runs.end(), [](auto& a, auto& b) { return a.s == b.s; }), runs.end());
    std::vector<std::optional<PotentialSlice>> out(runs.size());
    if (early) early->assign(runs.size(), {});
    parallel_for(runs.size(), S.jobs(), [&](std::size_t k) {
        const RunTriple& r = runs[k];
        const FlowProblem prob = detail::glued_problem(*e, c, r, c.u1);
        FlowState st = prob.initial_state(c.grid_for(r));
        RunOptions o;
        o.dt = c.dt;
        o.max_halvings = c.max_halvings;
        o.t_end = std::log1p(t0 / r.s);
        if (o.t_end > st.params.horizon1()) throw ConfigError("refinement time t0 lies past the horizon for s=" + io::num(r.s));
        const RunResult res = detail::run_or_throw(st, prob, o);
        out[k].emplace(e, st);
        if (early)
            for (const auto& sn : res.snapshots) {
                FlowState snap = st;
                snap.time = sn.time;
                snap.psi = sn.psi;
                (*early)[k].emplace_back(e, snap);
            }
    });
    std::vector<PotentialSlice> sl;
    for (auto& o : out) sl.push_back(std::move(*o));
    return sl;
}

inline ReportList stage_sweep(Session& S) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig& c = S.config();
    const auto runs = run_estimates(S);
    ReportList all;
    json table = json::array();
    double cm_lo = INFINITY, cm_hi = 0, c_lo = INFINITY, c_hi = 0;
    for (const auto& r : runs) {
        all.insert(all.end(), r.reports.begin(), r.reports.end());
        table.push_back({{"s", r.triple.s}, {"R2", r.triple.R2}, {"lambda", r.triple.lambda},
                         {"C_M", io::jnum(r.C_M)}, {"C", io::jnum(r.C)}, {"D", io::jnum(r.D)},
                         {"pass", all_pass(r.reports)}});
        cm_lo = std::min(cm_lo, r.C_M), cm_hi = std::max(cm_hi, r.C_M);
        c_lo = std::min(c_lo, r.C), c_hi = std::max(c_hi, r.C);
    }
    ReportList sweep;
    if (runs.size() >= 2) {
        sweep.push_back(EstimateReport::upper("c_over_t_uniform", cm_hi / cm_lo, 2.0));
        sweep.push_back(EstimateReport::upper("c2_variation", (c_hi - c_lo) / c_lo, 0.1));
    }
    std::vector<std::vector<PotentialSlice>> early;
    const auto slices = refinement_slices(S, c.runs, c.refinement.t0, &early);
    if (slices.size() >= 2) {
        RefinementOptions ro;
        ro.delta2 = c.refinement.delta2;
        ro.R2 = c.refinement.R2;
        sweep.push_back(s_refinement(slices, ro));
    }
    io::CsvTable ic("initial-convergence", {"s", "k", "a", "b"});
    for (std::size_t k = 0; k < early.size(); ++k)
        for (int kk = 0; kk <= 1; ++kk) {
            InitialConvergenceOptions io_;
            io_.delta2 = c.refinement.delta2;
            io_.R2 = c.refinement.R2;
            io_.t_max = c.refinement.t0;
            const double s = early[k][0].s();
            const auto d = glue_initial(*S.expander(), c.u1, s, gluing_grid(c.cone, c.u1, s, c.x_lo, c.h));
            const InitialPotential g0(S.expander(), s, d.phi0_at);
            try {
                auto r = initial_convergence(g0, early[k], kk, io_);
                ic.row({s, double(kk), r.measured["a"], r.measured["b"]});
                r.name += "_" + s_tag(s);
                sweep.push_back(r);
            } catch (const ParamError&) {
                // fewer than two snapshots inside the fit window
            }
        }
    S.write_csv("sweep/initial_convergence.csv", ic);
    all.insert(all.end(), sweep.begin(), sweep.end());
    json sj = {{"format_version", io::kFormatVersion}, {"kind", "sweep"}, {"runs", table},
               {"C_M_ratio", io::jnum(runs.size() >= 2 ? cm_hi / cm_lo : NAN)},
               {"C_variation", io::jnum(runs.size() >= 2 ? (c_hi - c_lo) / c_lo : NAN)}};
    S.write_json("sweep/sweep.json", sj);
    S.write_json("sweep/reports.json", io::report_document(sweep, {{"stage", "sweep"}}));
    S.stage("sweep", detail::seconds_since(t0), all);
    return all;
}

// ---------------------------------------------------------------------------------------
// report

struct ReportSummary {
    json summary;
    std::size_t failures = 0;
};

/// Aggregates every reports.json under `dir` into summary.json, gathers the per-run series into
/// report/*.csv and renders them as SVG. Throws MissingArtifacts without a manifest.
inline ReportSummary stage_report(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw MissingArtifacts("no manifest.json in " + dir.string());
    const json man = json::parse(io::read_file(dir / "manifest.json"));
    std::vector<fs::path> docs;
    for (const auto& ent : fs::recursive_directory_iterator(dir))
        if (ent.is_regular_file() && ent.path().filename() == "reports.json") docs.push_back(ent.path());
    std::sort(docs.begin(), docs.end());
    ReportSummary out;
    json sources = json::object(), fails = json::array();
    std::size_t n = 0;
    for (const auto& p : docs) {
        const json d = json::parse(io::read_file(p));
        if (d.value("format_version", 0) != io::kFormatVersion) throw ConfigError("unsupported report version in " + p.string());
        const std::string rel = fs::relative(p, dir).generic_string();
        std::size_t nf = 0;
        for (const auto& rj : d.at("reports")) {
            const EstimateReport r = io::report_from_json(rj);
            ++n;
            if (!r.pass()) {
                ++nf;
                fails.push_back({{"source", rel}, {"name", r.name}, {"worst_violation", io::jnum(r.worst_violation)},
                                 {"value", io::jnum(r.value())}, {"budget", io::jnum(r.budget)}});
            }
        }
        sources[rel] = {{"context", d.at("context")}, {"reports", d.at("reports").size()}, {"failures", nf}};
        out.failures += nf;
    }
    // gathered series
    auto gather = [&](const std::string& sub, const std::string& file, const std::string& kind, const std::vector<std::string>& cols,
                      const std::string& title, bool logx, bool logy) {
        io::CsvTable t(kind, cols);
        std::vector<io::Series> ss;
        if (!fs::exists(dir / sub)) return;
        std::vector<fs::path> runs;
        for (const auto& ent : fs::directory_iterator(dir / sub))
            if (ent.is_directory() && fs::exists(ent.path() / file)) runs.push_back(ent.path());
        std::sort(runs.begin(), runs.end());
        for (const auto& rp : runs) {
            const io::CsvTable src = io::CsvTable::parse(io::read_file(rp / file));
            const double s = std::stod(rp.filename().string().substr(2));
            io::Series se{rp.filename().string(), {}, {}};
            for (const auto& row : src.rows()) {
                t.row({s, row[0], row[1]});
                se.x.push_back(row[0]);
                se.y.push_back(row[1]);
            }
            ss.push_back(std::move(se));
        }
        if (ss.empty()) return;
        io::write_file(dir / "report" / (kind + ".csv"), t.str());
        io::write_file(dir / "report" / (kind + ".svg"), io::svg_plot(title, cols[1], cols[2], ss, logx, logy));
    };
    gather("estimates", "c_over_t.csv", "c-over-t-by-s", {"s", "t", "t_max_rm"}, "t max|Rm|", true, false);
    gather("estimates", "c2.csv", "c2-by-s", {"s", "tau", "C"}, "C^2 constant", false, false);
    if (fs::exists(dir / "tangent" / "tangent.csv")) {
        const auto t = io::CsvTable::parse(io::read_file(dir / "tangent" / "tangent.csv"));
        io::write_file(dir / "report" / "tangent.csv", t.str());
        io::write_file(dir / "report" / "tangent.svg", io::svg_from_table(t, "distance to the expander", true, true));
    }
    json sweep = nullptr;
    if (fs::exists(dir / "sweep" / "sweep.json")) sweep = json::parse(io::read_file(dir / "sweep" / "sweep.json"));
    out.summary = {{"format_version", io::kFormatVersion},
                   {"kind", "summary"},
                   {"config_hash", man.value("config_hash", "")},
                   {"reports", n},
                   {"failures", out.failures},
                   {"all_pass", out.failures == 0},
                   {"failed", fails},
                   {"sources", sources},
                   {"sweep", sweep}};
    io::write_file(dir / "summary.json", out.summary.dump(2) + "\n");
    return out;
}

}  // namespace kflow
