#pragma once
// Estimate ledger along drift-gauge runs. Every constant is measured (smallest valid value
// with its location); time derivatives of composite quantities use second-order centred
// differences over stored snapshots.

#include "flow.hpp"

namespace kflow {

struct MonitorOptions {
    double tau_max = std::numeric_limits<double>::infinity();  // ignore later snapshots
    std::size_t skip_inner = 3;  // node 0 carries the regularity row; 1, 2 use one-sided stencils
    std::size_t skip_outer = 3;  // nodes next to the Dirichlet row
    // Monitors that take more than four derivatives of psi (Bochner, arclength derivatives of
    // curvature and eigenvalues) skip nodes with P_E'' below this; round-off dominates there.
    double resolved_p2 = 1e-2;
};

/// Per-snapshot geometry of the drift metric P_E + psi.
struct DriftDiagnostics {
    double tau = 0.0;
    Jet P;                 // P_psi with log-derivative columns
    GridFunction f_psi;    // f + psi'
    GridFunction lam_a;    // P_psi' / P_E'
    GridFunction lam_b;    // P_psi'' / P_E''
    GridFunction psi_dot;  // rhs of the drift equation
    std::vector<RegionTag> tags;

    /// tr_{omega_psi} omega_E.
    double trace(std::size_t i, int n) const { return (n - 1) / lam_a[i] + 1.0 / lam_b[i]; }
    /// log(omega_psi^n / omega_E^n).
    double log_ratio(std::size_t i, int n) const {
        return (n - 1) * std::log(lam_a[i]) + std::log(lam_b[i]);
    }
};

inline DriftDiagnostics diagnose(const FlowProblem& prob, const Snapshot& sn) {
    if (prob.gauge() != Gauge::Drift) throw ParamError("estimates need a drift-gauge run");
    const Grid& g = sn.psi.grid;
    const Jet& ref = prob.reference(g, sn.time);
    const ExpanderProfile& e = prob.expander();
    DriftDiagnostics d;
    d.tau = sn.time;
    d.P = perturb(ref, sn.psi);
    metric_coeffs(d.P);
    d.f_psi = GridFunction(g);
    d.lam_a = GridFunction(g);
    d.lam_b = GridFunction(g);
    for (std::size_t i = 0; i < g.N; ++i) {
        d.f_psi[i] = d.P.d[1][i] + e.c_norm;
        d.lam_a[i] = d.P.d[1][i] / ref.d[1][i];
        d.lam_b[i] = d.P.d[2][i] / ref.d[2][i];
    }
    FlowState st;
    st.gauge = Gauge::Drift;
    st.time = sn.time;
    st.psi = sn.psi;
    st.params = prob.params();
    d.psi_dot = GridFunction(g, detail::ma_eval(sn.psi, ref, e.n, true, false).F);
    d.tags = region(st, e.cone);
    return d;
}

/// Drift Laplacian Delta_{psi,X} h = h''/P'' + (n-1) h'/P' + h' of a grid function.
inline GridFunction drift_laplacian(const Jet& P, const GridFunction& h, int n) {
    const Jet J = fd_jet(h);
    GridFunction out(h.grid);
    for (std::size_t i = 0; i < h.size(); ++i)
        out[i] = J.d[2][i] / P.d[2][i] + (n - 1) * J.d[1][i] / P.d[1][i] + J.d[1][i];
    return out;
}

namespace detail {

/// Second-order derivative in time at the middle of three (possibly unequal) samples.
inline double centred(double um, double u0, double up, double h1, double h2) {
    return -h2 / (h1 * (h1 + h2)) * um + (h2 - h1) / (h1 * h2) * u0 + h1 / (h2 * (h1 + h2)) * up;
}

struct Worst {
    double v;
    double x = std::numeric_limits<double>::quiet_NaN();
    double t = std::numeric_limits<double>::quiet_NaN();
    explicit Worst(double init) : v(init) {}
    void max(double val, double xx, double tt) {
        if (val > v) { v = val; x = xx; t = tt; }
    }
    void min(double val, double xx, double tt) {
        if (val < v) { v = val; x = xx; t = tt; }
    }
};

inline void locate(EstimateReport& r, const Worst& w) {
    r.x = w.x;
    r.time = w.t;
}

}  // namespace detail

/// Diagnostics for every stored snapshot with tau <= tau_max.
class DriftLedger {
public:
    DriftLedger(const FlowProblem& prob, const std::vector<Snapshot>& snaps, MonitorOptions opt = {})
        : prob_(prob), opt_(opt) {
        for (const auto& sn : snaps)
            if (sn.time <= opt.tau_max * (1.0 + 1e-12)) diag_.push_back(diagnose(prob, sn));
        if (diag_.empty()) throw MissingArtifacts("no snapshots to monitor");
        const Grid& g = diag_.front().P.grid;
        f_ = GridFunction(g);
        const Jet& ref = prob.reference(g, 0.0);
        for (std::size_t i = 0; i < g.N; ++i) f_[i] = ref.d[1][i] + prob.expander().c_norm;
        ref_p2_ = ref.d[2];
    }
    DriftLedger(const FlowProblem& prob, const RunResult& run, MonitorOptions opt = {})
        : DriftLedger(prob, run.snapshots, opt) {}

    const std::vector<DriftDiagnostics>& snapshots() const { return diag_; }
    const FlowProblem& problem() const { return prob_; }
    const GridFunction& f() const { return f_; }
    int n() const { return prob_.n(); }
    const Grid& grid() const { return f_.grid; }

    /// Monitored nodes of snapshot k: expanding region (including its boundary) away from
    /// the rows that do not carry the PDE.
    bool expanding(std::size_t k, std::size_t i) const {
        const auto t = diag_[k].tags[i];
        return (t == RegionTag::Expanding || t == RegionTag::Boundary) && interior(i);
    }
    /// Expanding node where derivative-heavy monitors are resolved.
    bool resolved(std::size_t k, std::size_t i) const {
        return expanding(k, i) && ref_p2_[i] >= opt_.resolved_p2;
    }
    bool interior(std::size_t i) const {
        return i >= opt_.skip_inner && i + opt_.skip_outer < grid().N;
    }
    /// Indices that have a neighbour on both sides in time.
    std::vector<std::size_t> inner_times() const {
        std::vector<std::size_t> out;
        for (std::size_t k = 1; k + 1 < diag_.size(); ++k) out.push_back(k);
        return out;
    }
    /// Centred d/dtau of a per-snapshot quantity at snapshot k.
    GridFunction d_tau(std::size_t k, const std::function<GridFunction(std::size_t)>& q) const {
        const GridFunction a = q(k - 1), b = q(k), c = q(k + 1);
        const double h1 = diag_[k].tau - diag_[k - 1].tau, h2 = diag_[k + 1].tau - diag_[k].tau;
        GridFunction out(b.grid);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::centred(a[i], b[i], c[i], h1, h2);
        return out;
    }
    /// Largest time step between consecutive monitored snapshots.
    double max_dt() const {
        double m = 0.0;
        for (std::size_t k = 1; k < diag_.size(); ++k) m = std::max(m, diag_[k].tau - diag_[k - 1].tau);
        return m;
    }

private:
    const FlowProblem& prob_;
    MonitorOptions opt_;
    std::vector<DriftDiagnostics> diag_;
    GridFunction f_;
    std::vector<double> ref_p2_;
};

// ---------------------------------------------------------------------------------------
// f_psi machinery.

/// Reports: fpsi_evolution (residual of d/dtau f_psi = Delta_X f_psi - f_psi, weighted by
/// 1/(f_psi+1)), fpsi_nonnegative, fpsi_gradient (|grad f_psi|^2 <= (2 + Psi) f_psi with the
/// measured Psi), mutual_control (D both ways).
inline ReportList fpsi_ledger(const DriftLedger& L) {
    const int n = L.n();
    const auto& D = L.snapshots();
    const Grid& g = L.grid();
    ReportList out;

    detail::Worst res(0.0);
    for (std::size_t k : L.inner_times()) {
        const GridFunction dt = L.d_tau(k, [&](std::size_t j) { return D[j].f_psi; });
        const GridFunction lap = drift_laplacian(D[k].P, D[k].f_psi, n);
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double r = std::abs(dt[i] - lap[i] + D[k].f_psi[i]) / (D[k].f_psi[i] + 1.0);
            res.max(r, g.x(i), D[k].tau);
        }
    }
    const double h = g.h();
    auto r1 = EstimateReport::upper("fpsi_evolution", res.v, 10.0 * (L.max_dt() + h * h * h * h));
    detail::locate(r1, res);
    out.push_back(r1);

    detail::Worst fmin(std::numeric_limits<double>::infinity());
    detail::Worst psi_hat(0.0);
    detail::Worst Dm(1.0);
    double ratio = 0.0;  // sup |grad f_psi|^2 / f_psi
    for (std::size_t k = 0; k < D.size(); ++k) {
        const GridFunction df = derivative(D[k].f_psi);
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double fp = D[k].f_psi[i];
            fmin.min(fp, g.x(i), D[k].tau);
            const double grad2 = 2.0 * df[i] * df[i] / D[k].P.d[2][i];  // real norm
            if (fp > 0.0) {
                ratio = std::max(ratio, grad2 / fp);
                psi_hat.max(std::max(0.0, grad2 / fp - 2.0), g.x(i), D[k].tau);
            }
            const double q = (L.f()[i] + 1.0) / (fp + 1.0);
            Dm.max(std::max(q, 1.0 / q), g.x(i), D[k].tau);
        }
    }
    auto r2 = EstimateReport::lower("fpsi_nonnegative", fmin.v, 1e-8);
    r2.measured["min_fpsi"] = fmin.v;
    detail::locate(r2, fmin);
    out.push_back(r2);

    auto r3 = EstimateReport::upper("fpsi_gradient", psi_hat.v, 1.0);
    r3.note = "value is the smallest Psi with |grad f_psi|^2 <= (2 + Psi) f_psi";
    r3.measured["sup_ratio"] = ratio;
    detail::locate(r3, psi_hat);
    out.push_back(r3);

    auto r4 = EstimateReport::record("mutual_control");
    r4.measured = {{"D", Dm.v}};
    detail::locate(r4, Dm);
    out.push_back(r4);
    return out;
}

inline double measured_D(const ReportList& rs) {
    const auto* r = find_report(rs, "mutual_control");
    if (!r) throw MissingArtifacts("mutual_control report missing");
    return r->measured.at("D");
}

/// Potential bounds -Psi f_psi <= psi <= Psi f and |psi_dot| <= Psi f_psi on the expanding
/// region, the same ratios restricted to the boundary {r^2 = lambda}, and the rotational
/// items that vanish identically under U(n) symmetry.
inline ReportList potential_bounds(const DriftLedger& L) {
    const auto& D = L.snapshots();
    const Grid& g = L.grid();
    detail::Worst pot(0.0), dot(0.0), bpot(0.0), bdot(0.0);
    for (std::size_t k = 0; k < D.size(); ++k) {
        std::size_t last = 0;
        for (std::size_t i = 0; i < g.N; ++i)
            if (D[k].tags[i] != RegionTag::Conical && D[k].tags[i] != RegionTag::Outer) last = i;
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double psi = D[k].P.d[0][i] - L.problem().reference(g, 0.0).d[0][i];
            const double fp = D[k].f_psi[i], f = L.f()[i];
            const double a = std::max(psi / f, -psi / fp);
            const double b = std::abs(D[k].psi_dot[i]) / fp;
            pot.max(a, g.x(i), D[k].tau);
            dot.max(b, g.x(i), D[k].tau);
            if (i == last) {
                bpot.max(a, g.x(i), D[k].tau);
                bdot.max(b, g.x(i), D[k].tau);
            }
        }
    }
    ReportList out;
    auto r1 = EstimateReport::record("potential_bound");
    r1.measured = {{"Psi_hat", pot.v}, {"Psi_hat_boundary", bpot.v}};
    detail::locate(r1, pot);
    out.push_back(r1);
    auto r2 = EstimateReport::record("psi_dot_bound");
    r2.measured = {{"Psi_hat", dot.v}, {"Psi_hat_boundary", bdot.v}};
    detail::locate(r2, dot);
    out.push_back(r2);
    auto r3 = EstimateReport::upper("rotational_items", 0.0, 0.0);
    r3.note = "J X . psi and its derivatives vanish for radial potentials";
    out.push_back(r3);
    return out;
}

// ---------------------------------------------------------------------------------------
// Barrier.

/// Constant in the barrier inequality for a given D, with eps = 1/(8D).
inline double barrier_constant(double D, int n) {
    const double eps = 1.0 / (8.0 * D);
    return 4.0 * D + n + 3.0 / (4.0 * eps) + 2.0 * eps * (24.0 * D * D + 2.0 * D * n);
}

inline GridFunction barrier_theta(const DriftDiagnostics& d, const GridFunction& psi, double D) {
    const double eps = 1.0 / (8.0 * D);
    GridFunction th(psi.grid);
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double w = d.f_psi[i] + 1.0;
        th[i] = psi[i] / w - 2.0 * eps * psi[i] * psi[i] / (w * w);
    }
    return th;
}

/// Slack of (d_tau - Delta_X) Theta >= (tr + (log ratio)_+ - C) / (4 (f_psi + 1)) with
/// C = barrier_constant(D); also the smallest C that makes the inequality hold.
inline ReportList barrier(const DriftLedger& L, double D) {
    if (!(D >= 1.0)) throw ParamError("mutual-control constant must be >= 1");
    const int n = L.n();
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    const Jet& ref = L.problem().reference(g, 0.0);
    const double C = barrier_constant(D, n);
    auto psi_of = [&](std::size_t k) {
        GridFunction p(g);
        for (std::size_t i = 0; i < g.N; ++i) p[i] = S[k].P.d[0][i] - ref.d[0][i];
        return p;
    };
    auto theta_of = [&](std::size_t k) { return barrier_theta(S[k], psi_of(k), D); };
    detail::Worst slack(std::numeric_limits<double>::infinity()), Cm(-std::numeric_limits<double>::infinity());
    double theta_sup = 0.0;
    for (std::size_t k = 0; k < S.size(); ++k) theta_sup = std::max(theta_sup, sup_abs(theta_of(k)));
    for (std::size_t k : L.inner_times()) {
        const GridFunction th = theta_of(k);
        const GridFunction dt = L.d_tau(k, theta_of);
        const GridFunction lap = drift_laplacian(S[k].P, th, n);
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double lhs = dt[i] - lap[i];
            const double w = 4.0 * (S[k].f_psi[i] + 1.0);
            const double q = S[k].trace(i, n) + std::max(0.0, S[k].log_ratio(i, n));
            slack.min(lhs - (q - C) / w, g.x(i), S[k].tau);
            Cm.max(q - w * lhs, g.x(i), S[k].tau);
        }
    }
    ReportList out;
    auto r1 = EstimateReport::lower("barrier_slack", slack.v, 1e-6);
    r1.measured = {{"C", C}, {"C_measured", Cm.v}, {"D", D}};
    detail::locate(r1, slack);
    out.push_back(r1);
    const double eps = 1.0 / (8.0 * D);
    auto r2 = EstimateReport::upper("barrier_sup", theta_sup, D + 2.0 * eps * D * D);
    out.push_back(r2);
    return out;
}

/// Barrier evaluated on the zero perturbation: Theta = 0 and the smallest constant is n.
inline double barrier_constant_at_fixed_point(int n) { return static_cast<double>(n); }

// ---------------------------------------------------------------------------------------
// C^2, C^3, interpolation.

/// C = max(lam_a, lam_b, 1/lam_a, 1/lam_b) over the expanding region; budget as given.
inline EstimateReport c2_monitor(const DriftLedger& L, double budget = 3.0) {
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    detail::Worst C(1.0);
    double tr_max = 0.0;
    for (std::size_t k = 0; k < S.size(); ++k)
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double a = S[k].lam_a[i], b = S[k].lam_b[i];
            C.max(std::max({a, b, 1.0 / a, 1.0 / b}), g.x(i), S[k].tau);
            tr_max = std::max(tr_max, S[k].trace(i, L.n()));
        }
    auto r = EstimateReport::upper("c2", C.v, budget);
    r.measured["trace_max"] = tr_max;
    detail::locate(r, C);
    return r;
}

/// Arclength derivative (reference metric) of a grid function: d/ds = sqrt(2/P_E'') d/dx.
inline GridFunction arclength_derivative(const GridFunction& u, const Jet& ref) {
    GridFunction du = derivative(u);
    for (std::size_t i = 0; i < du.size(); ++i) du[i] /= std::sqrt(0.5 * ref.d[2][i]);
    return du;
}

/// Reports: c3 ((f+1) S_psi), ddbar_psi (eigenvalue sup of i ddbar psi against omega_E) and
/// interp_k1, interp_k2 ((f+1)^{k/2} |d_s^k| of the eigenvalue deviations).
inline ReportList c3_interp_monitors(const DriftLedger& L) {
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    const int n = L.n();
    const Jet& ref = L.problem().reference(g, 0.0);
    detail::Worst c3(0.0), dd(0.0), k1(0.0), k2(0.0);
    for (std::size_t k = 0; k < S.size(); ++k) {
        const GridFunction Sp = christoffel_difference_sq(S[k].P, ref, n);
        GridFunction da = S[k].lam_a, db = S[k].lam_b;
        for (auto& v : da.v) v -= 1.0;
        for (auto& v : db.v) v -= 1.0;
        const GridFunction da1 = arclength_derivative(da, ref), db1 = arclength_derivative(db, ref);
        const GridFunction da2 = arclength_derivative(da1, ref), db2 = arclength_derivative(db1, ref);
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double w = L.f()[i] + 1.0;
            c3.max(w * Sp[i], g.x(i), S[k].tau);
            dd.max(std::max(std::abs(da[i]), std::abs(db[i])), g.x(i), S[k].tau);
            if (!L.resolved(k, i)) continue;
            k1.max(std::sqrt(w) * std::max(std::abs(da1[i]), std::abs(db1[i])), g.x(i), S[k].tau);
            k2.max(w * std::max(std::abs(da2[i]), std::abs(db2[i])), g.x(i), S[k].tau);
        }
    }
    ReportList out;
    auto add = [&](const char* name, const detail::Worst& w) {
        auto r = EstimateReport::record(name);
        r.measured = {{"value", w.v}};
        detail::locate(r, w);
        out.push_back(r);
    };
    add("c3", c3);
    add("ddbar_psi", dd);
    add("interp_k1", k1);
    add("interp_k2", k2);
    return out;
}

// ---------------------------------------------------------------------------------------
// Curvature.

struct CurvatureOptions {
    std::size_t skip = 3;  // nodes dropped at both ends for whole-grid maxima
};

/// Reports: weighted_curvature ((f+1)|Rm| on the expanding region), weighted_curvature_k1
/// ((f_psi+1)^{3/2} |d_s |Rm|| there), conical_curvature (r^2 |Rm| on the conical region) and
/// c_over_t (t max|Rm(g_s(t))| with t = s(e^tau - 1), over the whole grid).
inline ReportList curvature_ledger(const DriftLedger& L, CurvatureOptions copt = {}) {
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    const int n = L.n();
    const double s = L.problem().params().s;
    const ConeModel& cone = L.problem().expander().cone;
    detail::Worst w0(0.0), w1(0.0), con(0.0), ct(0.0);
    for (std::size_t k = 0; k < S.size(); ++k) {
        const GridFunction rm = riem_norm(S[k].P, n);
        GridFunction drm = derivative(rm);
        for (std::size_t i = 0; i < g.N; ++i) drm[i] /= std::sqrt(0.5 * S[k].P.d[2][i]);
        const double tau = S[k].tau;
        const double t = s * std::expm1(tau);
        double mx = 0.0, xm = 0.0;
        for (std::size_t i = copt.skip; i + copt.skip < g.N; ++i) {
            if (rm[i] > mx) { mx = rm[i]; xm = g.x(i); }
            if (S[k].tags[i] == RegionTag::Conical) con.max(cone.r2(g.x(i)) * rm[i], g.x(i), tau);
            if (!L.expanding(k, i)) continue;
            w0.max((L.f()[i] + 1.0) * rm[i], g.x(i), tau);
            if (!L.resolved(k, i)) continue;
            const double wp = S[k].f_psi[i] + 1.0;
            w1.max(wp * std::sqrt(wp) * std::abs(drm[i]), g.x(i), tau);
        }
        if (t > 0.0) ct.max(t / (t + s) * mx, xm, tau);
    }
    ReportList out;
    auto add = [&](const char* name, const detail::Worst& w) {
        auto r = EstimateReport::record(name);
        r.measured = {{"value", w.v}};
        detail::locate(r, w);
        out.push_back(r);
    };
    add("weighted_curvature", w0);
    add("weighted_curvature_k1", w1);
    add("conical_curvature", con);
    add("c_over_t", ct);
    return out;
}

/// t max|Rm(g_s(t))| at each stored time (series for plots).
struct CurvatureSample {
    double t;
    double t_rm;
};
inline std::vector<CurvatureSample> c_over_t_series(const DriftLedger& L, std::size_t skip = 3) {
    std::vector<CurvatureSample> out;
    const double s = L.problem().params().s;
    for (const auto& d : L.snapshots()) {
        const double t = s * std::expm1(d.tau);
        if (!(t > 0.0)) continue;
        const GridFunction rm = riem_norm(d.P, L.n());
        double mx = 0.0;
        for (std::size_t i = skip; i + skip < rm.size(); ++i) mx = std::max(mx, rm[i]);
        out.push_back({t, t / (t + s) * mx});
    }
    return out;
}

/// Per-snapshot C^2 constant: max over the expanding region of the eigenvalue ratios and their
/// inverses. Pairs (tau, C).
inline std::vector<std::pair<double, double>> c2_series(const DriftLedger& L) {
    std::vector<std::pair<double, double>> out;
    const auto& S = L.snapshots();
    for (std::size_t k = 0; k < S.size(); ++k) {
        double C = 1.0;
        for (std::size_t i = 0; i < L.grid().N; ++i) {
            if (!L.expanding(k, i)) continue;
            const double a = S[k].lam_a[i], b = S[k].lam_b[i];
            C = std::max({C, a, b, 1.0 / a, 1.0 / b});
        }
        out.emplace_back(S[k].tau, C);
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// Identity checks and maximum-principle shadows.

/// Bochner consistency for u = psi_dot: max of ((d_tau - Delta_X)|du|^2 + |du|^2) / (|du|^2 + 1)
/// over the expanding region; nonpositive up to the tolerance.
inline EstimateReport bochner_check(const DriftLedger& L, double tol = 1e-3) {
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    const int n = L.n();
    auto q_of = [&](std::size_t k) {
        const GridFunction du = derivative(S[k].psi_dot);
        GridFunction q(g);
        for (std::size_t i = 0; i < g.N; ++i) q[i] = du[i] * du[i] / S[k].P.d[2][i];
        return q;
    };
    detail::Worst w(-std::numeric_limits<double>::infinity());
    for (std::size_t k : L.inner_times()) {
        const GridFunction q = q_of(k);
        const GridFunction dt = L.d_tau(k, q_of);
        const GridFunction lap = drift_laplacian(S[k].P, q, n);
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.resolved(k, i)) continue;
            w.max((dt[i] - lap[i] + q[i]) / (q[i] + 1.0), g.x(i), S[k].tau);
        }
    }
    auto r = EstimateReport::lower("bochner", w.v == -std::numeric_limits<double>::infinity() ? 0.0 : -w.v, tol);
    r.measured = {{"max_excess", w.v}};
    detail::locate(r, w);
    return r;
}

/// Radial form of the Hamiltonian identity: f_psi' = P_psi'' (scheme order).
inline EstimateReport hamiltonian_check(const DriftLedger& L, double tol = 1e-6) {
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    detail::Worst w(0.0);
    for (std::size_t k = 0; k < S.size(); ++k) {
        const GridFunction df = derivative(S[k].f_psi);
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            w.max(std::abs(df[i] - S[k].P.d[2][i]) / (1.0 + S[k].P.d[2][i]), g.x(i), S[k].tau);
        }
    }
    auto r = EstimateReport::upper("hamiltonian_identity", w.v, tol);
    detail::locate(r, w);
    return r;
}

/// Maximum-principle shadow for u with (d_tau - Delta_X) u <= B - A u: the measured interior
/// sup of u must not exceed max{sup over the parabolic boundary, B/A} + tol. The parabolic
/// boundary is the initial snapshot plus the last expanding node of every snapshot.
inline EstimateReport max_principle_shadow(const DriftLedger& L, const std::string& name,
                                           const std::function<GridFunction(std::size_t)>& u,
                                           double A, double B, double tol = 1e-8) {
    const auto& S = L.snapshots();
    const Grid& g = L.grid();
    const int n = L.n();
    double bnd = -std::numeric_limits<double>::infinity();
    detail::Worst sup(-std::numeric_limits<double>::infinity());
    detail::Worst op(-std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < S.size(); ++k) {
        const GridFunction uk = u(k);
        std::size_t last = 0;
        for (std::size_t i = 0; i < g.N; ++i)
            if (L.expanding(k, i)) last = i;
        for (std::size_t i = 0; i < g.N; ++i) {
            if (!L.expanding(k, i)) continue;
            if (k == 0 || i == last) bnd = std::max(bnd, uk[i]);
            else sup.max(uk[i], g.x(i), S[k].tau);
        }
    }
    for (std::size_t k : L.inner_times()) {
        const GridFunction uk = u(k);
        const GridFunction dt = L.d_tau(k, u);
        const GridFunction lap = drift_laplacian(S[k].P, uk, n);
        for (std::size_t i = 0; i < g.N; ++i)
            if (L.resolved(k, i)) op.max(dt[i] - lap[i] + A * uk[i] - B, g.x(i), S[k].tau);
    }
    const double bound = std::max(bnd, A > 0.0 ? B / A : bnd);
    auto r = EstimateReport::lower(name, bound - sup.v, tol);
    r.measured = {{"sup_interior", sup.v}, {"sup_boundary", bnd}, {"bound", bound},
                  {"operator_excess", op.v}};
    detail::locate(r, sup);
    return r;
}

/// Shadows for -f_psi, psi_dot and -psi_dot, all with A = 1, B = 0.
inline ReportList max_principle_shadows(const DriftLedger& L, double tol = 1e-8) {
    const auto& S = L.snapshots();
    auto neg = [](GridFunction v) { return -1.0 * std::move(v); };
    return {max_principle_shadow(L, "maxp_neg_fpsi", [&](std::size_t k) { return neg(S[k].f_psi); }, 1.0, 0.0, tol),
            max_principle_shadow(L, "maxp_psi_dot", [&](std::size_t k) { return S[k].psi_dot; }, 1.0, 0.0, tol),
            max_principle_shadow(L, "maxp_neg_psi_dot", [&](std::size_t k) { return neg(S[k].psi_dot); }, 1.0, 0.0, tol)};
}

/// Whole ledger for a run.
inline ReportList estimate_ledger(const DriftLedger& L) {
    ReportList all = fpsi_ledger(L);
    const double D = measured_D(all);
    auto append = [&](ReportList r) { all.insert(all.end(), r.begin(), r.end()); };
    append(potential_bounds(L));
    append(barrier(L, D));
    all.push_back(c2_monitor(L));
    append(c3_interp_monitors(L));
    append(curvature_ledger(L));
    all.push_back(bochner_check(L));
    all.push_back(hamiltonian_check(L));
    append(max_principle_shadows(L));
    return all;
}

}  // namespace kflow
