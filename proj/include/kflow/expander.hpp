#pragma once
// Expanding gradient Kähler-Ricci solitons in the Calabi ansatz.
//
// The soliton equation i dd-bar f = Ric + omega with f = P' + c_norm reduces to
//   P' = -log((P')^{n-1} P'') + (n + b) x + P + c,
// written for (Q, Q') = (P + c, P') as a first-order system in x. The slope b of the
// pluriharmonic term vanishes for flat quotients; for one-dimensional cone-angle cones the
// profile is expressed in the cone-adapted coordinate (where P_C = c e^x and the angular
// period is 2 pi gamma) and b = 1/gamma - 1 is forced by smoothness at the tip.

#include <boost/numeric/odeint.hpp>
#include <optional>

#include "cone.hpp"
#include "geometry.hpp"
#include "report.hpp"

namespace kflow {

struct ExpanderOptions {
    double tol = 1e-13;        // ODE tolerance (absolute and relative)
    double table_step = 1.0 / 32.0;
    double log_amp_guess = 0.0;
    int max_bisection = 200;
};

struct ExpanderProfile {
    ConeModel cone;
    int n = 1;
    double a0 = 0.0;      // inner limit of P'
    double b = 0.0;       // pluriharmonic slope
    double c = 0.0;       // ODE constant
    double c_norm = 0.0;  // f = P' + c_norm
    double amp = 0.0;     // inner amplitude of P' - a0
    double inner_exp = 1.0;
    double x_in = 0.0;     // start of the integrated range
    double x_match = 0.0;  // outer matching point; asymptotic form beyond
    double match_mismatch = 0.0;
    double table_h = 1.0 / 32.0;
    std::vector<std::array<double, 2>> table;  // (Q, P') on x_in + j * table_h
    double ode_tol = 1e-13;

    Grid grid;
    Jet P;
    GridFunction f;

    double cone_scale() const { return cone.scale(); }

    /// P, P', ..., P'''', (log P'')', (log P'')'' at x from Q, P' using the ODE.
    std::array<double, 7> derivs_from_state(double x, double Q, double p1) const {
        const double p2 = std::exp((n + b) * x + Q - p1) / std::pow(p1, n - 1);
        const double g = n + b + p1 - p2 - (n - 1) * p2 / p1;
        const double p3 = p2 * g;
        const double g1 = p2 * (1.0 - g) - (n - 1) * p2 * (g * p1 - p2) / (p1 * p1);
        const double p4 = p3 * g + p2 * g1;
        return {Q - c, p1, p2, p3, p4, g, g1};
    }

    std::array<double, 2> inner_state(double x) const {
        if (a0 > 0.0) {
            const double k = inner_exp, E = std::exp(k * x);
            const double A2 = 0.5 * amp * amp * (1.0 / k - 1.0 - (n - 1) / a0);
            const double S = std::log(k * amp) + a0 + (n - 1) * std::log(a0);
            return {S + a0 * x + amp / k * E + A2 / (2 * k) * E * E, a0 + amp * E + A2 * E * E};
        }
        const double m = inner_exp, E = std::exp(m * x);
        const double A2 = amp * amp * (1.0 / m - 1.0) / (n + 1);
        const double S = std::log(m * amp) + (n - 1) * std::log(amp);
        return {S + amp / m * E + A2 / (2 * m) * E * E, amp * E + A2 * E * E};
    }

    static void rhs(int n, double b, const std::array<double, 2>& y, std::array<double, 2>& dy,
                    double x) {
        dy[0] = y[1];
        // clamp keeps a trial step that overshoots finite, so the controller rejects it
        dy[1] = std::exp(std::min((n + b) * x + y[0] - y[1], 700.0)) / std::pow(y[1], n - 1);
    }

    std::array<double, 2> integrate_state(std::array<double, 2> y, double x0, double x1) const {
        using namespace boost::numeric::odeint;
        if (x1 == x0) return y;
        auto stepper = make_controlled(ode_tol, ode_tol, runge_kutta_fehlberg78<std::array<double, 2>>());
        const int nn = n;
        const double bb = b;
        integrate_adaptive(stepper,
                           [nn, bb](const std::array<double, 2>& s, std::array<double, 2>& ds,
                                    double x) { rhs(nn, bb, s, ds, x); },
                           y, x0, x1, std::copysign(std::min(1e-2, std::abs(x1 - x0)), x1 - x0));
        return y;
    }

    /// Derivatives of P_E at an arbitrary point.
    std::array<double, 7> eval(double x) const {
        if (x >= x_match) {
            const double e = cone_scale() * std::exp(x);
            return {e - b * x, e - b, e, e, e, 1.0, 0.0};
        }
        if (x <= x_in) {
            const auto s = inner_state(x);
            auto d = derivs_from_state(x, s[0], s[1]);
            if (!(d[2] > 0.0) || !std::isfinite(d[0]))
                throw GridUnderflow("expander evaluation below representable inner range");
            return d;
        }
        const double u = (x - x_in) / table_h;
        std::size_t j = static_cast<std::size_t>(std::llround(u));
        j = std::min(j, table.size() - 1);
        const double xj = x_in + table_h * static_cast<double>(j);
        const auto s = integrate_state(table[j], xj, x);
        return derivs_from_state(x, s[0], s[1]);
    }

    Jet jet_on(const Grid& g) const { return exact_jet(g, [&](double x) { return eval(x); }); }

    /// u_E = P_E - P_C in the adapted coordinate.
    Jet u_E_jet(const Grid& g) const {
        return exact_jet(g, [&](double x) {
            const auto d = eval(x);
            const double e = cone_scale() * std::exp(x);
            return std::array<double, 5>{d[0] - e, d[1] - e, d[2] - e, d[3] - e, d[4] - e};
        });
    }

    Jet f_jet(const Grid& g) const {
        return exact_jet(g, [&](double x) {
            const auto d = eval(x);
            // only f, f', f'', f''' are used downstream; f'''' left as P'''' (unused)
            return std::array<double, 5>{d[1] + c_norm, d[2], d[3], d[4], d[4]};
        });
    }
};

namespace detail {

inline double pluriharmonic_slope(const ConeModel& m) {
    if (m.family == ConeFamily::ConeAngle) return 1.0 / m.gamma - 1.0;
    return 0.0;
}

/// Exponent of P'' at the inner end implied by a zero-section size a0.
inline double inner_exponent(const ConeModel& m, double b, double a0) {
    if (a0 > 0.0) return m.n + b + a0;
    return (m.n + b) / m.n;
}

}  // namespace detail

/// Zero-section size from regularity: the inner exponent of P'' must equal the fibre
/// order k of the resolved quotient. Solved by bisection on a0.
inline double zero_section_size(const ConeModel& m) {
    const double b = detail::pluriharmonic_slope(m);
    if (m.family != ConeFamily::FlatQuotient || m.k <= m.n) return 0.0;
    double lo = 1e-12, hi = static_cast<double>(m.k);
    auto mismatch = [&](double a0) { return detail::inner_exponent(m, b, a0) - m.k; };
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mismatch(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Solve the soliton ODE asymptotic to the cone, sampling the profile on grid g.
inline ExpanderProfile solve_expander(const ConeModel& cone, const Grid& g,
                                      const ExpanderOptions& opt = {}) {
    if (cone.family == ConeFamily::ConeAngle && cone.n != 1 && cone.gamma != 1.0)
        throw NonAdmissible("cone-angle expanders are supported for n = 1 only");
    const bool gaussian_case = cone.is_flat();
    if (!gaussian_case && !admissible(cone)) throw NonAdmissible("cone is not admissible");

    ExpanderProfile e;
    e.cone = cone;
    e.n = cone.n;
    e.b = detail::pluriharmonic_slope(cone);
    e.a0 = zero_section_size(cone);
    e.inner_exp = detail::inner_exponent(cone, e.b, e.a0);
    e.ode_tol = opt.tol;
    e.table_h = opt.table_step;
    const double cs = cone.scale();
    e.x_match = std::log((45.0 + e.b) / cs);

    auto x_start = [&](double amp) {
        const double scale = e.a0 > 0.0 ? e.a0 : 1.0;
        const double xs = std::log(1e-6 * scale / amp) / e.inner_exp;
        return std::min(xs, std::min(g.x_min, e.x_match - 4.0) - 1.0);
    };
    auto shoot = [&](double log_amp) {
        e.amp = std::exp(log_amp);
        e.x_in = x_start(e.amp);
        const auto y = e.integrate_state(e.inner_state(e.x_in), e.x_in, e.x_match);
        return y;
    };
    const double target_d = cs * std::exp(e.x_match) - e.b;
    auto D = [&](double la) { return shoot(la)[1] - target_d; };

    double lo = opt.log_amp_guess - 1.0, hi = opt.log_amp_guess + 1.0;
    double dlo = D(lo), dhi = D(hi);
    for (int it = 0; it < 60 && dlo > 0.0; ++it) { hi = lo; dhi = dlo; lo -= 2.0; dlo = D(lo); }
    for (int it = 0; it < 60 && dhi < 0.0; ++it) { lo = hi; dlo = dhi; hi += 2.0; dhi = D(hi); }
    if (!(dlo <= 0.0 && dhi >= 0.0)) throw ShootingFailure("could not bracket the outer slope");
    for (int it = 0; it < opt.max_bisection && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        (D(mid) > 0.0 ? hi : lo) = mid;
    }
    // Newton polish on the amplitude with a secant derivative.
    double la = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
        const double d0 = D(la);
        const double dl = 1e-7;
        const double slope = (D(la + dl) - d0) / dl;
        if (!(slope > 0.0)) break;
        const double step = -d0 / slope;
        la += step;
        if (std::abs(step) < 1e-15) break;
    }
    const auto y = shoot(la);
    e.match_mismatch = (y[1] - target_d) / target_d;
    if (!(std::abs(e.match_mismatch) < 1e-9))
        throw ShootingFailure("outer slope mismatch " + std::to_string(e.match_mismatch));
    // value condition fixes c: P(x_match) = c_cone e^x - b x
    e.c = y[0] - (cs * std::exp(e.x_match) - e.b * e.x_match);

    // dense table
    {
        using namespace boost::numeric::odeint;
        const std::size_t nt =
            static_cast<std::size_t>(std::ceil((e.x_match - e.x_in) / e.table_h)) + 1;
        e.table.clear();
        e.table.reserve(nt);
        auto st = e.inner_state(e.x_in);
        e.table.push_back(st);
        double x = e.x_in;
        for (std::size_t j = 1; j < nt; ++j) {
            st = e.integrate_state(st, x, x + e.table_h);
            x += e.table_h;
            e.table.push_back(st);
        }
    }

    e.grid = g;
    e.P = e.jet_on(g);
    metric_coeffs(e.P);
    // normalisation at the outer node: |df|^2 + R + n - f = 0 with |df|^2 = P''
    {
        const std::size_t i = g.N - 1;
        const auto d = e.eval(g.x(i));
        const double p1 = d[1], p2 = d[2], L1 = d[5], L2 = d[6];
        const double r1 = e.n - (e.n - 1) * p2 / p1 - L1;
        const double r2 = -(e.n - 1) * (p2 * L1 / p1 - p2 * p2 / (p1 * p1)) - L2;
        const double R = r2 / p2 + (e.n - 1) * r1 / p1;
        e.c_norm = p2 + R + e.n - p1;
    }
    e.f = GridFunction(g, e.P.d[1]);
    for (auto& v : e.f.v) v += e.c_norm;
    return e;
}

/// Sup norms of the three soliton identities over interior nodes.
inline EstimateReport soliton_residuals(const ExpanderProfile& e) {
    const Jet f = e.f_jet(e.grid);
    const GridFunction R = ricci_scalar(e.P, e.n);
    const GridFunction lap = laplacian(e.P, f, e.n);
    const GridFunction g2 = grad_norm_sq(e.P, f);
    double s1 = 0, s2 = 0, s3 = 0, cons = 0;
    for (std::size_t i = 1; i + 1 < e.grid.N; ++i) {
        const double r1 = lap[i] - e.n - R[i];
        const double r2 = g2[i] + R[i] + e.n - f.d[0][i];
        const double r3 = lap[i] + f.d[1][i] - f.d[0][i];
        s1 = std::max(s1, std::abs(r1));
        s2 = std::max(s2, std::abs(r2));
        s3 = std::max(s3, std::abs(r3));
        // r3 - r1 - r2 = f' - |df|^2, which vanishes because |df|^2 = (f')^2 / P'' and f' = P''
        cons = std::max(cons, std::abs(r3 - r1 - r2 - (f.d[1][i] - g2[i])));
    }
    EstimateReport rep = EstimateReport::upper("soliton_residuals", std::max({s1, s2, s3}), 1e-8);
    rep.measured["laplacian_identity"] = s1;
    rep.measured["normalisation_identity"] = s2;
    rep.measured["drift_identity"] = s3;
    rep.measured["consistency"] = cons;
    return rep;
}

/// ODE residual of the frozen grid values, with derivatives taken by the FD scheme. Nodes
/// where P'' is below the scheme's resolution (deep in the inner end) are skipped.
inline double frozen_ode_residual(const ExpanderProfile& e) {
    const Jet J = fd_jet(e.P.value());
    const double h = e.grid.h();
    double m = 0.0;
    for (std::size_t i = 3; i + 3 < e.grid.N; ++i) {
        if (e.P.d[2][i] < 1e3 * h * h * h * h) continue;
        const double x = e.grid.x(i);
        const double rhs = -std::log(std::pow(J.d[1][i], e.n - 1) * J.d[2][i]) + (e.n + e.b) * x +
                           J.d[0][i] + e.c;
        m = std::max(m, std::abs(J.d[1][i] - rhs) / (1.0 + std::abs(J.d[1][i])));
    }
    return m;
}

/// Potential of t Phi_t^* g_E: t P_E(x - log t), as a jet on g.
inline Jet self_similar(const ExpanderProfile& e, double t, const Grid& g) {
    if (!(t > 0.0)) throw ParamError("self_similar needs t > 0");
    const double lt = std::log(t);
    return exact_jet(g, [&](double x) {
        auto d = e.eval(x - lt);
        for (int k = 0; k < 5; ++k) d[k] *= t;  // log-derivatives are scale invariant
        return d;
    });
}
inline Jet self_similar(const ExpanderProfile& e, double t) { return self_similar(e, t, e.grid); }

struct SandwichResult {
    double A_measured = 0.0;
    double violation = 0.0;  // most negative value of t Phi_t^* f - r^2/2 (0 if none)
    double gap_sup = 0.0;    // sup of t Phi_t^* f - r^2/2
};

/// Checks r^2/2 <= t Phi_t^* f <= r^2/2 + A t on the grid.
inline SandwichResult compare_f_r2(const ExpanderProfile& e, double t) {
    SandwichResult res;
    const double lt = std::log(t);
    res.A_measured = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e.grid.N; ++i) {
        const double x = e.grid.x(i);
        const double tf = t * (e.eval(x - lt)[1] + e.c_norm);
        const double half_r2 = e.cone_scale() * std::exp(x);
        const double gap = tf - half_r2;
        res.violation = std::min(res.violation, gap);
        res.gap_sup = std::max(res.gap_sup, gap);
        res.A_measured = std::max(res.A_measured, gap / t);
    }
    return res;
}

/// sup (R + n) over the solved grid.
inline double sup_scalar_plus_n(const ExpanderProfile& e) {
    const GridFunction R = ricci_scalar(e.P, e.n);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < e.grid.N; ++i) m = std::max(m, R[i] + e.n);
    return m;
}

/// epsilon = n + min R over interior nodes.
inline double scalar_floor(const Jet& P, int n) {
    const GridFunction R = ricci_scalar(P, n);
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < P.size(); ++i) mn = std::min(mn, R[i]);
    const double eps = n + mn;
    if (!(eps > 0.0)) throw FloorViolation("n + min R = " + std::to_string(eps));
    return eps;
}
inline double scalar_floor(const ExpanderProfile& e) { return scalar_floor(e.P, e.n); }

/// Eigenvalue-sup norm of i dd-bar u against a reference potential: max(|u'|/P', |u''|/P'').
inline double eig_sup_norm(double u1, double u2, double p1, double p2) {
    return std::max(std::abs(u1) / p1, std::abs(u2) / p2);
}

/// Constants C_k (k = 0, 1, 2) with |nabla^k u_E(s)| <= C_k s r^{-k} (log(r/sqrt s) + 1)
/// on {r^2 >= s}, norms taken in the cone metric.
inline EstimateReport u_E_decay(const ExpanderProfile& e, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw ParamError("u_E_decay needs 0 < s <= 1");
    const Grid& g = e.grid;
    const double ls = std::log(s);
    const double cs = e.cone_scale();
    double C[3] = {0, 0, 0};
    for (std::size_t i = 1; i + 1 < g.N; ++i) {
        const double x = g.x(i);
        const double r2 = 2.0 * cs * std::exp(x);
        if (r2 < s) continue;
        auto d = e.eval(x - ls);
        const double ec = cs * std::exp(x - ls);
        double u[4];
        for (int k = 0; k < 4; ++k) u[k] = s * (d[k] - ec);
        const double p = cs * std::exp(x);  // cone jet: all derivatives equal
        const double w = 0.5 * std::log(r2 / s) + 1.0;
        C[0] = std::max(C[0], std::abs(u[0]) / (s * w));
        C[1] = std::max(C[1], std::sqrt(r2) * real_grad_norm(u[1], p) / (s * w));
        C[2] = std::max(C[2], r2 * real_hessian_norm(u[1], u[2], p, p, p, e.n) / (s * w));
    }
    EstimateReport rep = EstimateReport::record("u_E_decay");
    rep.measured = {{"C0", C[0]}, {"C1", C[1]}, {"C2", C[2]}, {"s", s}};
    return rep;
}

/// Measured C_k in |nabla^k (g_E(t) - g_C)| <= C_k t r^{-2-k} on {r^2 >= 1}, k = 0, 1.
inline EstimateReport cone_closeness(const ExpanderProfile& e, double t) {
    const Grid& g = e.grid;
    const double cs = e.cone_scale();
    const double lt = std::log(t);
    GridFunction d0(g), lam_a(g), lam_b(g);
    for (std::size_t i = 0; i < g.N; ++i) {
        const auto d = e.eval(g.x(i) - lt);
        const double p = cs * std::exp(g.x(i));
        lam_a[i] = (t * d[1] - p) / p;
        lam_b[i] = (t * d[2] - p) / p;
    }
    const GridFunction da = derivative(lam_a), db = derivative(lam_b);
    double C0 = 0, C1 = 0;
    for (std::size_t i = 2; i + 2 < g.N; ++i) {
        const double r2 = 2.0 * cs * std::exp(g.x(i));
        if (r2 < 1.0) continue;
        const double ds_dx = std::sqrt(0.5 * cs * std::exp(g.x(i)));
        C0 = std::max(C0, r2 / t * std::max(std::abs(lam_a[i]), std::abs(lam_b[i])));
        C1 = std::max(C1, std::pow(r2, 1.5) / t * std::max(std::abs(da[i]), std::abs(db[i])) / ds_dx);
    }
    EstimateReport rep = EstimateReport::record("cone_closeness");
    rep.measured = {{"C0", C0}, {"C1", C1}, {"t", t}};
    return rep;
}

/// Largest mu such that small geodesic balls of radius mu sqrt(f+1) keep volume ratio
/// >= 1 - eps_ps according to the expansion 1 - R_g rho^2 / (6 (2n + 2)).
inline double volume_ratio_margin(const ExpanderProfile& e, double eps_ps) {
    const GridFunction R = ricci_scalar(e.P, e.n);
    double mu = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < e.grid.N; ++i) {
        const double Rg = 2.0 * R[i];
        if (Rg <= 0.0) continue;
        mu = std::min(mu, std::sqrt(6.0 * (2.0 * e.n + 2.0) * eps_ps / (Rg * (e.f[i] + 1.0))));
    }
    return mu;
}

/// sup (f + 1) |Rm(g_E)| over interior nodes.
inline double weighted_curvature_sup(const ExpanderProfile& e) {
    const GridFunction rm = riem_norm(e.P, e.n);
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < e.grid.N; ++i) m = std::max(m, (e.f[i] + 1.0) * rm[i]);
    return m;
}

}  // namespace kflow
