#pragma once
// Glued initial potential at approximation scale s: the expander scaled down by s inside
// r <= s^{1/4}, the perturbed cone P_C + u1 outside r >= 2 s^{1/4}.

#include <functional>

#include "expander.hpp"

namespace kflow {

/// Monotone C^4 transition: 0 on [0,1], 1 on [2,inf). Degree-9 smoothstep in rho - 1.
struct Cutoff {
    static double value(double rho) {
        if (rho <= 1.0) return 0.0;
        if (rho >= 2.0) return 1.0;
        const double y = rho - 1.0, y2 = y * y;
        return y2 * y2 * y * (126.0 + y * (-420.0 + y * (540.0 + y * (-315.0 + 70.0 * y))));
    }
    /// d^m chi / d rho^m, m <= 4.
    static double deriv(double rho, int m) {
        if (m == 0) return value(rho);
        if (rho <= 1.0 || rho >= 2.0) return 0.0;
        // polynomial coefficients of chi in y, differentiated m times
        std::array<double, 10> c{0, 0, 0, 0, 0, 126.0, -420.0, 540.0, -315.0, 70.0};
        for (int k = 0; k < m; ++k) {
            for (int p = 0; p + 1 < 10; ++p) c[p] = c[p + 1] * (p + 1);
            c[9] = 0.0;
        }
        const double y = rho - 1.0;
        double s = 0.0;
        for (int p = 9; p >= 0; --p) s = s * y + c[p];
        return s;
    }
    /// sup |chi^(m)| on [1,2] by dense sampling.
    static double sup_deriv(int m) {
        double best = 0.0;
        for (int i = 0; i <= 4000; ++i) best = std::max(best, std::abs(deriv(1.0 + i / 4000.0, m)));
        return best;
    }
};

inline double cutoff(double rho) {
    if (rho < 0.0) throw ParamError("cutoff needs rho >= 0");
    return Cutoff::value(rho);
}

/// u1 = eps0 r^{2+alpha} eta(r/r0), eta = 1 - chi. r0 = infinity drops the outer cutoff;
/// the pure power law is Kahler on the whole cone for eps0 > 0.
struct PerturbationSpec {
    double eps0 = 0.05;
    double alpha = 0.5;
    double r0 = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(alpha > 0.0)) throw ParamError("perturbation exponent must be positive");
        if (!(r0 > 0.0)) throw ParamError("outer cutoff radius must be positive");
        if (!std::isfinite(eps0)) throw ParamError("amplitude must be finite");
    }
    /// Radial profile and its r-derivatives up to order 4.
    std::array<double, 5> radial(double r) const {
        std::array<double, 5> out{};
        if (eps0 == 0.0) return out;
        const double p = 2.0 + alpha;
        std::array<double, 5> pw{};  // d^j r^p / dr^j
        double coef = 1.0;
        for (int j = 0; j < 5; ++j) {
            pw[j] = coef * std::pow(r, p - j);
            coef *= (p - j);
        }
        std::array<double, 5> eta{1.0, 0.0, 0.0, 0.0, 0.0};  // d^j eta(r/r0) / dr^j
        for (int j = 0; j < 5 && std::isfinite(r0); ++j)
            eta[j] = (j == 0 ? 1.0 - Cutoff::value(r / r0) : -Cutoff::deriv(r / r0, j)) /
                     std::pow(r0, j);
        static constexpr int binom[5][5] = {
            {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i <= j; ++i) out[j] += binom[j][i] * pw[i] * eta[j - i];
        for (auto& v : out) v *= eps0;
        return out;
    }
    double value(double r) const { return radial(r)[0]; }
    /// k_j(rho) = sup_{r <= rho} r^{j-2} |d^j u1 / dr^j| (radial proxy of the covariant norm).
    double k_j(int j, double rho) const {
        double best = 0.0;
        const int M = 400;
        for (int i = 1; i <= M; ++i) {
            const double r = rho * i / M;
            best = std::max(best, std::pow(r, j - 2) * std::abs(radial(r)[j]));
        }
        return best;
    }
};

struct GluedInitialData {
    ConeModel cone;
    PerturbationSpec u1;
    double s = 0.0;
    Grid grid;
    GridFunction P;     // P_{s,0}
    GridFunction phi0;  // P_{s,0} - P_{E,s}
    Jet P_Es;           // exact jet of the scaled expander
    double s0_bound = 0.0;
    double chi_d1 = 0.0, chi_d2 = 0.0;
    std::function<double(double)> phi0_at;  // perturbation at any original-coordinate x
    double glue_lo() const { return std::pow(s, 0.25); }
    double glue_hi() const { return 2.0 * std::pow(s, 0.25); }
};

namespace detail {

/// Glued potential at x with its perturbation against P_{E,s}; plateaus are bitwise exact.
struct GluePoint {
    double P;
    double phi;
};
inline GluePoint glue_point(const ExpanderProfile& e, const PerturbationSpec& u1, double s,
                            double x) {
    const double r2 = e.cone.r2(x);
    const double r = std::sqrt(r2);
    const double rho = r / std::pow(s, 0.25);
    const double chi = Cutoff::value(rho);
    const double PEs = s * e.eval(x - std::log(s))[0];
    if (chi == 0.0) return {PEs, 0.0};
    const double PC = 0.5 * r2;  // cone potential c e^{gamma x} = r^2 / 2
    const double u = u1.value(r);
    if (chi == 1.0) {
        const double P = PC + u;
        return {P, P - PEs};
    }
    const double uEs = PEs - PC;
    const double phi = chi * (u - uEs);
    return {PEs + phi, phi};
}

}  // namespace detail

/// Builds P_{s,0} on g (original coordinates). Throws NonKahler if positivity fails.
inline GluedInitialData glue_initial(const ExpanderProfile& e, const PerturbationSpec& u1, double s,
                                     const Grid& g) {
    u1.validate();
    if (!(s > 0.0 && s <= 1.0)) throw ParamError("approximation scale must lie in (0,1]");
    const double lo = e.cone.x_of_r2(std::sqrt(s)), hi = e.cone.x_of_r2(4.0 * std::sqrt(s));
    if (!(g.x_min <= lo && g.x_max >= hi)) throw ParamError("grid does not contain the gluing annulus");
    if ((hi - lo) / g.h() < 32.0) throw ParamError("gluing annulus needs at least 32 nodes");

    GluedInitialData d;
    d.cone = e.cone;
    d.u1 = u1;
    d.s = s;
    d.grid = g;
    d.P = GridFunction(g);
    d.phi0 = GridFunction(g);
    for (std::size_t i = 0; i < g.N; ++i) {
        const auto gp = detail::glue_point(e, u1, s, g.x(i));
        d.P[i] = gp.P;
        d.phi0[i] = gp.phi;
    }
    d.P_Es = self_similar(e, s, g);
    d.chi_d1 = Cutoff::sup_deriv(1);
    d.chi_d2 = Cutoff::sup_deriv(2);
    d.phi0_at = [e, u1, s](double x) { return detail::glue_point(e, u1, s, x).phi; };
    metric_coeffs(perturb(d.P_Es, d.phi0));
    return d;
}

/// Largest s in (0, s_max] (to relative precision) for which the gluing is Kähler, by
/// bisection; returns 0 when even s_min fails. grid_for(s) supplies the grid.
inline double find_s0(const ExpanderProfile& e, const PerturbationSpec& u1,
                      const std::function<Grid(double)>& grid_for, double s_max = 1.0,
                      double s_min = 1e-8) {
    auto ok = [&](double s) {
        try {
            glue_initial(e, u1, s, grid_for(s));
            return true;
        } catch (const NonKahler&) {
            return false;
        }
    };
    if (ok(s_max)) return s_max;
    if (!ok(s_min)) return 0.0;
    double lo = std::log(s_min), hi = std::log(s_max);
    for (int it = 0; it < 40 && hi - lo > 1e-3; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(std::exp(mid)) ? lo : hi) = mid;
    }
    return std::exp(lo);
}

/// Grid in original coordinates suitable for gluing at scale s: inner end `inner` below the
/// scaled zero section, outer end past the u1 cutoff, spacing h.
inline Grid gluing_grid(const ConeModel& m, const PerturbationSpec& u1, double s, double inner,
                        double h) {
    const double lo = inner + std::log(s);
    const double outer = std::isfinite(u1.r0) ? 4.0 * u1.r0 * u1.r0 : 4.0;
    const double hi = std::max(m.x_of_r2(outer), m.x_of_r2(4.0 * std::sqrt(s))) + 1.0;
    const auto N = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
    return Grid::with_spacing(lo, h, N);
}

/// sup_annulus r^k |nabla^k (g_{s,0} - g_C)|_{g_C}, k <= 2, with the bound
/// C_k (sum_{j <= k+2} k_j(2 s^{1/4}) + s^{1/4}). Derivatives use r d/dr = 2 d/dx on the
/// relative eigenvalue deviations (radial proxy).
inline EstimateReport annulus_closeness(const GluedInitialData& d, int k_max = 2) {
    if (k_max < 0 || k_max > 2) throw ParamError("annulus_closeness supports k <= 2");
    const Grid& g = d.grid;
    const Jet P = perturb(d.P_Es, d.phi0);
    const Jet C = cone_potential(d.cone, g);
    GridFunction la(g), lb(g);
    for (std::size_t i = 0; i < g.N; ++i) {
        la[i] = (P.d[1][i] - C.d[1][i]) / C.d[1][i];
        lb[i] = (P.d[2][i] - C.d[2][i]) / C.d[2][i];
    }
    std::array<GridFunction, 3> da{la, 2.0 * derivative(la, 1), 4.0 * derivative(la, 2)};
    std::array<GridFunction, 3> db{lb, 2.0 * derivative(lb, 1), 4.0 * derivative(lb, 2)};
    const double r_lo = d.glue_lo(), r_hi = d.glue_hi();
    EstimateReport rep = EstimateReport::record("annulus_closeness");
    double q = std::pow(d.s, 0.25);
    for (int k = 0; k <= k_max; ++k) {
        double lhs = 0.0;
        for (std::size_t i = 0; i < g.N; ++i) {
            const double r = std::sqrt(d.cone.r2(g.x(i)));
            if (r < r_lo || r > r_hi) continue;
            lhs = std::max({lhs, std::abs(da[k][i]), std::abs(db[k][i])});
        }
        double rhs = q;
        for (int j = 0; j <= k + 2; ++j) rhs += d.u1.k_j(j, r_hi);
        rep.measured["sup_k" + std::to_string(k)] = lhs;
        rep.measured["bound_sum_k" + std::to_string(k)] = rhs;
        rep.measured["C_k" + std::to_string(k)] = lhs / rhs;
    }
    rep.measured["s"] = d.s;
    return rep;
}

/// Conical-region shadow: sup r^k |nabla^k (g_{s,0} - g_C)| on {sqrt s <= r^2 <= R^2}, k <= 1.
inline EstimateReport conical_closeness(const GluedInitialData& d, double R2) {
    const Grid& g = d.grid;
    const Jet P = perturb(d.P_Es, d.phi0);
    const Jet C = cone_potential(d.cone, g);
    GridFunction la(g), lb(g);
    for (std::size_t i = 0; i < g.N; ++i) {
        la[i] = (P.d[1][i] - C.d[1][i]) / C.d[1][i];
        lb[i] = (P.d[2][i] - C.d[2][i]) / C.d[2][i];
    }
    const GridFunction a1 = 2.0 * derivative(la, 1), b1 = 2.0 * derivative(lb, 1);
    double A0 = 0.0, A1 = 0.0;
    for (std::size_t i = 2; i + 2 < g.N; ++i) {
        const double r2 = d.cone.r2(g.x(i));
        if (r2 < std::sqrt(d.s) || r2 > R2) continue;
        A0 = std::max({A0, std::abs(la[i]), std::abs(lb[i])});
        A1 = std::max({A1, std::abs(a1[i]), std::abs(b1[i])});
    }
    EstimateReport rep = EstimateReport::record("conical_closeness");
    rep.measured = {{"A0", A0}, {"A1", A1}, {"s", d.s}};
    return rep;
}

}  // namespace kflow
