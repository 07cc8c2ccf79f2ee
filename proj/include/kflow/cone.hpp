#pragma once
// U(n)-invariant Kähler cones: round quotients C^n/Z_k and cone-angle profiles.

#include <functional>

#include "geometry.hpp"
#include "report.hpp"

namespace kflow {

enum class ConeFamily { FlatQuotient, ConeAngle };

struct ConeModel {
    int n = 2;
    ConeFamily family = ConeFamily::FlatQuotient;
    int k = 1;           // quotient order (flat quotient)
    double gamma = 1.0;  // profile exponent (cone angle)
    double c = 0.5;      // profile scale
    double link_scalar = 0.0;
    double link_volume = 0.0;

    static double sphere_volume(int n) {  // Vol(S^{2n-1})
        return 2.0 * std::pow(M_PI, n) / std::tgamma(static_cast<double>(n));
    }

    static ConeModel flat_quotient(int n, int k) {
        if (n < 1) throw DimensionError("n must be >= 1");
        if (k < 1) throw ParamError("quotient order must be >= 1");
        ConeModel m;
        m.n = n;
        m.family = ConeFamily::FlatQuotient;
        m.k = k;
        m.gamma = 1.0;
        m.c = 0.5;
        m.link_scalar = (2.0 * n - 1) * (2.0 * n - 2);
        m.link_volume = sphere_volume(n) / k;
        return m;
    }

    /// P_C = c e^{gamma x}. For n >= 2 the link is the sphere with fibre scaled by gamma and
    /// horizontal directions by sqrt(gamma); its scalar curvature follows from the cone formula.
    static ConeModel cone_angle(int n, double gamma, double c = 0.5) {
        if (n < 1) throw DimensionError("n must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ParamError("cone-angle exponent must lie in (0,1]");
        if (!(c > 0.0)) throw ParamError("profile scale must be positive");
        ConeModel m;
        m.n = n;
        m.family = ConeFamily::ConeAngle;
        m.gamma = gamma;
        m.c = c;
        m.link_scalar = (2.0 * n - 1) * (2.0 * n - 2) + 4.0 * n * (n - 1) * (1.0 - gamma) / gamma;
        m.link_volume = std::pow(gamma, n) * sphere_volume(n);
        return m;
    }

    double exponent() const { return family == ConeFamily::FlatQuotient ? 1.0 : gamma; }
    double scale() const { return family == ConeFamily::FlatQuotient ? 0.5 : c; }
    /// Angular period factor of the fibre circle.
    double angle_factor() const {
        return family == ConeFamily::FlatQuotient ? 1.0 / k : gamma;
    }
    /// Cone radius squared at x: r^2 = 2 P_C(x).
    double r2(double x) const { return 2.0 * scale() * std::exp(exponent() * x); }
    double x_of_r2(double r2v) const { return std::log(r2v / (2.0 * scale())) / exponent(); }
    bool is_flat() const {
        return (family == ConeFamily::FlatQuotient && k == 1) ||
               (family == ConeFamily::ConeAngle && gamma == 1.0 && c == 0.5);
    }
};

inline Jet cone_potential(const ConeModel& m, const Grid& g) {
    const double c = m.scale(), ga = m.exponent();
    return exact_jet(g, [&](double x) {
        const double e = c * std::exp(ga * x);
        return std::array<double, 7>{e, ga * e, ga * ga * e, ga * ga * ga * e, ga * ga * ga * ga * e, ga, 0.0};
    });
}

/// Flat Gaussian potential e^x / 2.
inline Jet flat_potential(const Grid& g) {
    return exact_jet(g, [](double x) {
        const double e = 0.5 * std::exp(x);
        return std::array<double, 7>{e, e, e, e, e, 1.0, 0.0};
    });
}

struct RicciPotential {
    double B = 0.0;
    double v_S = 0.0;
};

/// v = B log r + v_S with the convention v = -log(omega_C^n / omega_eucl^n); v = 0 for n = 1.
inline RicciPotential ricci_slope(const ConeModel& m) {
    if (m.n < 1) throw DimensionError("n must be >= 1");
    if (m.n == 1) return {};
    const int n = m.n;
    const double avg = m.link_scalar;  // links here are homogeneous
    RicciPotential rp;
    rp.B = (avg - (2.0 * n - 1) * (2.0 * n - 2)) / (2.0 * (n - 1));
    const double ga = m.exponent(), c = m.scale();
    rp.v_S = -(n * (1.0 - ga) / ga) * std::log(2.0 * c) - (n - 1) * std::log(2.0 * c * ga) -
             std::log(2.0 * c * ga * ga);
    return rp;
}

/// v sampled on the grid through the volume ratio against the flat potential.
inline GridFunction cone_ricci_potential(const ConeModel& m, const Grid& g) {
    if (m.n == 1) return GridFunction(g, 0.0);
    GridFunction v = volume_ratio(cone_potential(m, g), flat_potential(g), m.n);
    v *= -1.0;
    return v;
}

/// B as r d/dr of the volume potential, r the cone radius: r d/dr = (2/gamma) d/dx.
inline double ricci_slope_from_volume(const ConeModel& m, const Grid& g) {
    if (m.n == 1) return 0.0;
    const GridFunction dv = derivative(cone_ricci_potential(m, g), 1);
    return 2.0 / m.exponent() * dv[g.N / 2];
}

/// Checks |v| <= A0 (log r + 1), |grad v| <= A1 / r, |Hess v| <= A2 / r^2 on {r^2 >= 1}.
inline EstimateReport check_quasi_calabi_yau(const ConeModel& m, const Grid& g, double tol = 1e-8) {
    EstimateReport rep = EstimateReport::lower("quasi_calabi_yau", 0.0, tol);
    const Jet P = cone_potential(m, g);
    const Jet v = fd_jet(cone_ricci_potential(m, g));
    const Jet rho = ricci_potential(P, m.n);
    double A0 = 0.0, A1 = 0.0, A2 = 0.0, ric_res = 0.0;
    bool any = false;
    for (std::size_t i = 2; i + 2 < g.N; ++i) {
        const double r2 = m.r2(g.x(i));
        if (r2 < 1.0) continue;
        any = true;
        const double lr = 0.5 * std::log(r2);
        A0 = std::max(A0, std::abs(v.d[0][i]) / (lr + 1.0));
        A1 = std::max(A1, std::sqrt(r2) * real_grad_norm(v.d[1][i], P.d[2][i]));
        A2 = std::max(A2, r2 * real_hessian_norm(v.d[1][i], v.d[2][i], P.d[1][i], P.d[2][i],
                                                 P.d[3][i], m.n));
        if (m.n >= 2) {
            const double scale = std::abs(rho.d[1][i]) + std::abs(rho.d[2][i]) + 1.0;
            ric_res = std::max(ric_res, (std::abs(v.d[1][i] - rho.d[1][i]) +
                                         std::abs(v.d[2][i] - rho.d[2][i])) / scale);
        }
    }
    if (!any) throw ParamError("grid does not reach r^2 >= 1");
    rep.measured = {{"A0", A0}, {"A1", A1}, {"A2", A2}, {"ricci_residual", ric_res}};
    rep.worst_violation = -ric_res;
    return rep;
}

/// Smooth-canonical-model predicate. Configured stand-in: flat quotients need k > n;
/// one-dimensional cone-angle cones are admitted; everything else is unknown.
inline bool canonical_model_predicate(const ConeModel& m) {
    if (m.family == ConeFamily::FlatQuotient) return m.k > m.n;
    if (m.family == ConeFamily::ConeAngle && m.n == 1) return true;
    throw UnknownModel("no canonical-model predicate configured for this cone family");
}

inline bool admissible(const ConeModel& m) {
    if (!canonical_model_predicate(m)) return false;
    const Grid g(-2.0, 6.0, 161);
    return check_quasi_calabi_yau(m, g).pass();
}

}  // namespace kflow
