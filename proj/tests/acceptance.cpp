// Acceptance run: every criterion at its stated tolerance and runtime budget, one line each.
// Exit status is nonzero when any criterion fails.

#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include <kflow/harness.hpp>

#include "oracles.hpp"

using namespace kflow;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

RunConfig baseline_config() {
    return RunConfig::from_file(KFLOW_SOURCE_DIR "/configs/baseline.json");
}

const ExpanderProfile& baseline_expander() {
    static const ExpanderProfile e = baseline_config().solve();
    return e;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / "kflow_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

const EstimateReport& need(const ReportList& rs, const std::string& name) {
    const auto* r = find_report(rs, name);
    if (!r) throw MissingArtifacts("report " + name + " missing");
    return *r;
}

// ---------------------------------------------------------------------------------------

Outcome gaussian_exactness() {
    double res = 0.0, prof = 0.0;
    for (int n : {1, 2}) {
        const auto e = solve_expander(ConeModel::flat_quotient(n, 1), Grid(-10.0, 8.0, 721));
        res = std::max(res, soliton_residuals(e).value());
        for (std::size_t i = 0; i < e.grid.N; ++i) {
            const double ex = 0.5 * std::exp(e.grid.x(i));
            prof = std::max({prof, std::abs(e.P.d[1][i] - ex) / (1 + ex), std::abs(e.P.d[2][i] - ex) / (1 + ex)});
        }
    }
    const RegionParams p{1e-3, 1.0, 10.0};
    const auto g = solve_expander(ConeModel::flat_quotient(2, 1), Grid(-10.0, 8.0, 721));
    const FlowProblem prob(g, Gauge::Drift, p, {});
    FlowState st = prob.initial_state(drift_grid(g.cone, p, -4.0, 4.0, 0.05));
    Stepper S(prob);
    double drift = 0.0;
    for (int k = 0; k < 1000; ++k) {
        S.step(st, 0.004);
        drift = std::max(drift, sup_abs(st.psi));
    }
    return {res < 1e-10 && prof < 1e-10 && drift < 1e-12,
            "residual " + fmt(res) + ", |P'-e^x/2|,|P''-e^x/2| " + fmt(prof) + ", sup|psi| over 1000 steps " + fmt(drift)};
}

Outcome oracle_equivalence() {
    const Grid g(-2.0, 2.0, 21);
    oracle::TestPotential pot;
    const Jet P = exact_jet(g, [&](double x) { return pot.derivs_d(x); });
    auto H = [](oracle::ld x) { return std::sin(x) + 0.3L * x * x; };
    const Jet h = exact_jet(g, [](double x) {
        return std::array<double, 5>{std::sin(x) + 0.3 * x * x, std::cos(x) + 0.6 * x, -std::sin(x) + 0.6,
                                     -std::cos(x), std::sin(x)};
    });
    double worst = 0.0;
    int nodes = 0;
    for (int n : {1, 2}) {
        oracle::FullMetric<oracle::TestPotential> M{pot, n};
        const auto rm = riem_norm(P, n);
        const auto R = ricci_scalar(P, n);
        const auto lap = laplacian(P, h, n);
        const auto gr = grad_norm_sq(P, h);
        for (std::size_t i = 0; i < g.N; i += 2) {
            const auto pt = M.point(g.x(i));
            const auto c = M.curvature(pt);
            const auto lg = M.laplace_grad(pt, H);
            worst = std::max({worst, rel(rm[i], double(c.rm_norm)), rel(2 * R[i], double(c.scalar)),
                              rel(2 * lap[i], double(lg[0])), rel(2 * gr[i], double(lg[1]))});
            ++nodes;
        }
    }
    return {worst < 1e-5 && nodes >= 20, std::to_string(nodes) + " node samples over n=1,2, max rel err " + fmt(worst)};
}

Outcome one_dimensional_cross_check() {
    double worst = 0.0;
    int used = 0;
    for (double gamma : {0.5, 0.8}) {
        const auto e = solve_expander(ConeModel::cone_angle(1, gamma), Grid(-8.0, 8.0, 641));
        // closed form in the moment coordinate, integrated on 4000 Gauss panels
        const oracle::MomentExpander1D O{1.0L / gamma - 1.0L, 0.5L};
        for (int k = 0; k <= 400; ++k) {
            const oracle::ld y = std::exp(-8.0L + 12.0L * k / 400);
            const oracle::ld x = O.x_of_y(y);
            if (x < -8 || x > 8) continue;
            const auto d = e.eval(double(x));
            worst = std::max({worst, double(std::fabs(d[1] - y)), double(std::fabs(d[2] - O.phi(y)))});
            ++used;
        }
    }
    return {worst < 1e-8, "sup |P' - y|, |P'' - phi(y)| = " + fmt(worst) + " over " + std::to_string(used) + " points"};
}

Outcome f_sandwich() {
    const auto& e = baseline_expander();
    const double bound = sup_scalar_plus_n(e) * 1.05;
    bool ok = true;
    std::string d;
    for (double t : {1.0, 0.1, 0.01}) {
        const auto r = compare_f_r2(e, t);
        ok = ok && r.violation >= 0.0 && r.A_measured <= bound;
        d += "t=" + fmt(t) + ": A=" + fmt(r.A_measured) + " lower slack " + fmt(r.violation) + "; ";
    }
    return {ok, d + "bound " + fmt(bound)};
}

Outcome gluing() {
    const auto& e = baseline_expander();
    const RunConfig c = baseline_config();
    const double s0 = find_s0(e, c.u1, [&](double s) { return gluing_grid(e.cone, c.u1, s, c.x_lo, c.h); });
    double prev = INFINITY;
    bool mono = true;
    std::string d = "s0 = " + fmt(s0) + ", sup_k0:";
    for (double s : {1e-2, 1e-3, 1e-4}) {
        const auto a = annulus_closeness(glue_initial(e, c.u1, s, gluing_grid(e.cone, c.u1, s, c.x_lo, c.h)));
        const double v = a.measured.at("sup_k0");
        mono = mono && v < prev;
        prev = v;
        d += " " + fmt(v);
    }
    return {s0 > 0.0 && mono, d};
}

Outcome estimate_ledger_criterion() {
    const auto& e = baseline_expander();
    const RunConfig c = baseline_config();
    const std::vector<double> ss{1e-3, 1e-4};
    std::vector<EstimateRun> coarse(2), fine(2);
    parallel_for(4, 4, [&](std::size_t k) {
        const RunTriple r{ss[k % 2], 1.0, 10.0};
        if (k < 2) coarse[k] = estimate_run(e, c, r);
        else fine[k - 2] = estimate_run(e, c, r, 0.5 * c.h);
    });
    bool ok = true;
    double fmin = INFINITY, psi = 0.0, Cmax = 0.0, Cmin = INFINITY, slack = INFINITY, drift = 0.0;
    bool Cm_finite = true;
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& rs = coarse[k].reports;
        fmin = std::min(fmin, need(rs, "fpsi_nonnegative").measured.at("min_fpsi"));
        psi = std::max(psi, need(rs, "fpsi_gradient").value());
        const double C = need(rs, "c2").value();
        Cmax = std::max(Cmax, C);
        Cmin = std::min(Cmin, C);
        const auto& b = need(rs, "barrier_slack");
        slack = std::min(slack, b.worst_violation);
        Cm_finite = Cm_finite && std::isfinite(b.measured.at("C_measured"));
        const double w = need(rs, "weighted_curvature").value(), wf = need(fine[k].reports, "weighted_curvature").value();
        ok = ok && std::isfinite(w);
        drift = std::max(drift, std::abs(w - wf) / wf);
    }
    const double var = (Cmax - Cmin) / Cmin;
    ok = ok && fmin >= -1e-8 && psi < 1.0 && Cmax <= 3.0 && var <= 0.10 && slack >= -1e-6 && Cm_finite && drift < 0.02;
    return {ok, "min f_psi " + fmt(fmin) + ", Psi " + fmt(psi) + ", C max " + fmt(Cmax) + " (variation " + fmt(var) +
                    "), barrier slack " + fmt(slack) + ", (f+1)|Rm| h vs h/2 " + fmt(drift)};
}

Outcome c_over_t() {
    const auto& e = baseline_expander();
    const RunConfig c = baseline_config();
    const std::vector<double> ss{1e-3, 1e-4, 1e-5};
    std::vector<double> CM(3);
    parallel_for(3, 3, [&](std::size_t k) { CM[k] = estimate_run(e, c, {ss[k], 1.0, 10.0}).C_M; });
    const double lo = *std::min_element(CM.begin(), CM.end()), hi = *std::max_element(CM.begin(), CM.end());
    return {std::isfinite(hi) && hi / lo < 2.0,
            "C_M = " + fmt(CM[0]) + ", " + fmt(CM[1]) + ", " + fmt(CM[2]) + " (ratio " + fmt(hi / lo) + ")"};
}

Outcome tangent() {
    Session S(baseline_config(), scratch("tangent"), 1);
    const ReportList rs = stage_tangent(S);
    bool ok = true;
    std::string d;
    for (const char* name : {"tangent_j0", "tangent_j1"}) {
        const auto& r = need(rs, name);
        ok = ok && r.pass();
        d += std::string(name) + ": levels " + fmt(r.measured.at("levels")) + ", d";
        for (int i = 0; r.measured.count("d_t" + std::to_string(i)); ++i) d += " " + fmt(r.measured.at("d_t" + std::to_string(i)));
        d += "; ";
    }
    return {ok, d};
}

Outcome gauge_algebra() {
    const auto e = solve_expander(ConeModel::flat_quotient(2, 1), Grid(-10.0, 8.0, 721));
    const RegionParams p{0.1, 2.0, 3.0};
    auto bump = [](double x) { return 0.02 * std::exp(-(x + 1) * (x + 1)); };
    const FlowProblem pu(e, Gauge::Unnormalised, p, {}, bump);
    const FlowProblem pd(e, Gauge::Drift, p, {}, bump);
    FlowState st = pd.initial_state(Grid::with_spacing(-5.0, 0.05, 201));
    st.time = 0.7;
    double trip = 0.0;
    const Gauge order[3] = {Gauge::Unnormalised, Gauge::Rescaled, Gauge::Drift};
    for (Gauge a : order)
        for (Gauge b : order) {
            const FlowState back = transport(transport(transport(st, a), b), Gauge::Drift);
            trip = std::max({trip, sup_abs(back.psi - st.psi), std::abs(back.psi.grid.x_min - st.psi.grid.x_min),
                             std::abs(back.time - st.time)});
        }
    const Grid gu = Grid::with_spacing(-8.0, 0.05, 321);
    const double T = 0.05, tauT = std::log1p(T / p.s);
    const Grid gc(-5.0, 8.0, 261);
    std::vector<double> D;
    for (int m : {4, 8, 16, 32}) {
        FlowState su = pu.initial_state(gu), sd = pd.initial_state(gu.shifted(-std::log(p.s)));
        Stepper Su(pu), Sd(pd);
        for (int i = 0; i < m; ++i) Su.step(su, T / m);
        for (int i = 0; i < m; ++i) Sd.step(sd, tauT / m);
        D.push_back(sup_abs(resample(sd.psi, gc) - resample(transport(su, Gauge::Drift).psi, gc)));
    }
    double order_min = INFINITY;
    std::string d = "round trip " + fmt(trip) + ", orders";
    for (std::size_t i = 0; i + 1 < D.size(); ++i) {
        const double o = std::log2(D[i] / D[i + 1]);
        order_min = std::min(order_min, o);
        d += " " + fmt(o);
    }
    return {trip < 1e-12 && order_min >= 1.9, d};
}

Outcome s_refinement_criterion() {
    RunConfig c = baseline_config();
    Session S(c, scratch("refinement"), 3);
    std::vector<RunTriple> runs;
    for (double s : {1e-3, 1e-4, 1e-5}) runs.push_back({s, 1.0, 10.0});
    const auto slices = refinement_slices(S, runs, 0.05);
    RefinementOptions ro;
    ro.delta2 = c.refinement.delta2;
    ro.R2 = c.refinement.R2;
    const auto r = s_refinement(slices, ro);
    return {r.pass(), "d = " + fmt(r.measured.at("d0")) + ", " + fmt(r.measured.at("d1")) + " (ratio " +
                          fmt(r.measured.at("ratio0")) + ") on r^2 in [" + fmt(ro.delta2) + ", " + fmt(ro.R2) + "]"};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "Gaussian exactness", 10, gaussian_exactness},
        {2, "oracle equivalence", 60, oracle_equivalence},
        {3, "n = 1 expander cross-check", 30, one_dimensional_cross_check},
        {4, "f-sandwich", 10, f_sandwich},
        {5, "gluing", 60, gluing},
        {6, "estimate ledger", 300, estimate_ledger_criterion},
        {7, "C/t bound", 300, c_over_t},
        {8, "tangent flow", 300, tangent},
        {9, "gauge algebra", 60, gauge_algebra},
        {10, "s-refinement Cauchy property", 600, s_refinement_criterion},
    };
    // the shared baseline expander is solved once, outside every budget
    const auto t_solve = std::chrono::steady_clock::now();
    baseline_expander();
    std::cout << "baseline expander solved in " << fmt(detail::seconds_since(t_solve)) << " s\n";
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = detail::seconds_since(t0);
        const bool pass = o.pass && secs < c.budget_s;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
                  << fmt(secs) << " s of " << fmt(c.budget_s) << " s]" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << "\n";
    return failed ? 1 : 0;
}
