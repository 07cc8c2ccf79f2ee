#pragma once
// U(n)-invariant Kähler geometry on (resolved) C^n reduced to radial potentials P(x), x = log r^2.
//
// Conventions: g_{i\bar j} = \partial_i \bar\partial_j P, the Riemannian metric is 2 Re g_{i\bar j},
// R_omega = g^{i\bar j} Ric_{i\bar j} = R_g / 2, |dh|^2 = g^{i\bar j} h_i h_{\bar j}.
// |Rm| is the norm of the full Riemannian curvature tensor of the real metric.

#include <boost/math/quadrature/gauss.hpp>

#include "core.hpp"

namespace kflow {

struct MetricCoeffs {
    GridFunction a;  // P'
    GridFunction b;  // P''
    std::vector<std::size_t> bad_nodes;
    bool kahler() const { return bad_nodes.empty(); }
};

inline MetricCoeffs metric_coeffs(const Jet& P, bool throw_on_fail = true) {
    MetricCoeffs m{P.deriv(1), P.deriv(2), {}};
    for (std::size_t i = 0; i < P.size(); ++i)
        if (!(m.a[i] > 0.0) || !(m.b[i] > 0.0)) m.bad_nodes.push_back(i);
    if (throw_on_fail && !m.kahler()) {
        const std::size_t i = m.bad_nodes.front();
        throw NonKahler("P' or P'' not positive at x = " + std::to_string(P.grid.x(i)) + " (" +
                        std::to_string(m.bad_nodes.size()) + " nodes)");
    }
    return m;
}
inline MetricCoeffs metric_coeffs(const GridFunction& P, bool throw_on_fail = true) {
    return metric_coeffs(fd_jet(P), throw_on_fail);
}

/// log(omega_1^n / omega_2^n).
inline GridFunction volume_ratio(const Jet& P1, const Jet& P2, int n) {
    metric_coeffs(P1);
    metric_coeffs(P2);
    GridFunction out(P1.grid);
    for (std::size_t i = 0; i < P1.size(); ++i)
        out[i] = (n - 1) * std::log(P1.d[1][i] / P2.d[1][i]) + std::log(P1.d[2][i] / P2.d[2][i]);
    return out;
}
inline GridFunction volume_ratio(const GridFunction& P1, const GridFunction& P2, int n) {
    return volume_ratio(fd_jet(P1), fd_jet(P2), n);
}

/// Ricci potential rho = n x - (n-1) log P' - log P'' with its first two derivatives.
inline Jet ricci_potential(const Jet& P, int n) {
    Jet r(P.grid);
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double p1 = P.d[1][i], p2 = P.d[2][i];
        const double L1 = P.lb1(i), L2 = P.lb2(i);
        const double x = P.grid.x(i);
        r.d[0][i] = n * x - (n - 1) * std::log(p1) - std::log(p2);
        r.d[1][i] = n - (n - 1) * p2 / p1 - L1;
        r.d[2][i] = -(n - 1) * (p2 * L1 / p1 - p2 * p2 / (p1 * p1)) - L2;
    }
    return r;
}

/// Delta_omega h = h''/P'' + (n-1) h'/P'.
inline GridFunction laplacian(const Jet& P, const Jet& h, int n) {
    metric_coeffs(P);
    GridFunction out(P.grid);
    for (std::size_t i = 0; i < P.size(); ++i)
        out[i] = h.d[2][i] / P.d[2][i] + (n - 1) * h.d[1][i] / P.d[1][i];
    return out;
}
inline GridFunction laplacian(const GridFunction& P, const GridFunction& h, int n) {
    return laplacian(fd_jet(P), fd_jet(h), n);
}

inline GridFunction ricci_scalar(const Jet& P, int n) {
    metric_coeffs(P);
    return laplacian(P, ricci_potential(P, n), n);
}
inline GridFunction ricci_scalar(const GridFunction& P, int n) { return ricci_scalar(fd_jet(P), n); }

/// |dh|^2 = (h')^2 / P'' (complex convention).
inline GridFunction grad_norm_sq(const Jet& P, const Jet& h) {
    metric_coeffs(P);
    GridFunction out(P.grid);
    for (std::size_t i = 0; i < P.size(); ++i) out[i] = h.d[1][i] * h.d[1][i] / P.d[2][i];
    return out;
}
inline GridFunction grad_norm_sq(const GridFunction& P, const GridFunction& h) {
    return grad_norm_sq(fd_jet(P), fd_jet(h));
}

/// (X/2) h with X = r d/dr = 2 d/dx.
inline GridFunction drift_derivative(const GridFunction& h) { return derivative(h, 1); }

/// Unitary-frame curvature components of a U(n)-invariant Kähler metric at one node.
/// A: radial-radial, B: radial-tangential, C: tangential holomorphic sectional,
/// D: distinct tangential directions.
struct CurvatureComponents {
    double A, B, C, D;
};

/// Inputs: P', P'', (log P'')', (log P'')''.
inline CurvatureComponents curvature_components(double p1, double p2, double L1, double L2) {
    return {-L2 / p2, p2 / (p1 * p1) - L1 / p1, 2.0 * (p1 - p2) / (p1 * p1), (p1 - p2) / (p1 * p1)};
}

inline double riem_norm_at(double p1, double p2, double L1, double L2, int n) {
    const auto c = curvature_components(p1, p2, L1, L2);
    const double m = n - 1;
    const double sq = c.A * c.A + 4.0 * m * c.B * c.B + m * c.C * c.C + 2.0 * m * (n - 2) * c.D * c.D;
    return 2.0 * std::sqrt(sq);
}

inline GridFunction riem_norm(const Jet& P, int n) {
    metric_coeffs(P);
    GridFunction out(P.grid);
    for (std::size_t i = 0; i < P.size(); ++i)
        out[i] = riem_norm_at(P.d[1][i], P.d[2][i], P.lb1(i), P.lb2(i), n);
    return out;
}
inline GridFunction riem_norm(const GridFunction& P, int n) { return riem_norm(fd_jet(P), n); }

/// |Gamma_1 - Gamma_2|^2 measured in g_1 (unitary frame of g_1).
inline GridFunction christoffel_difference_sq(const Jet& P1, const Jet& P2, int n) {
    GridFunction out(P1.grid);
    for (std::size_t i = 0; i < P1.size(); ++i) {
        const double r = P1.lb1(i) - P2.lb1(i);
        const double t = P1.d[2][i] / P1.d[1][i] - P2.d[2][i] / P2.d[1][i];
        out[i] = (r * r + 2.0 * (n - 1) * t * t) / P1.d[2][i];
    }
    return out;
}

/// Integral of a grid function over [x0, x1] by Gauss-Legendre on each cell of the grid.
inline double integrate(const GridFunction& f, double x0, double x1) {
    if (x1 < x0) return -integrate(f, x1, x0);
    const Grid& g = f.grid;
    if (!g.contains(x0) || !g.contains(x1)) throw GridUnderflow("integration interval outside grid");
    if (x1 == x0) return 0.0;
    auto fx = [&](double x) { return interpolate(f, std::clamp(x, g.x_min, g.x_max)); };
    double total = 0.0;
    const double h = g.h();
    double a = x0;
    while (a < x1) {
        const double cell_end = g.x_min + h * (std::floor((a - g.x_min) / h + 1e-12) + 1.0);
        const double b = std::min(cell_end, x1);
        if (b > a) total += boost::math::quadrature::gauss<double, 10>::integrate(fx, a, b);
        a = b;
    }
    return total;
}

/// Radial arclength: integral of sqrt(P''/2) dx.
inline double radial_distance(const Jet& P, double x0, double x1) {
    if (x0 > x1) throw ParamError("radial_distance needs x0 <= x1");
    metric_coeffs(P);
    GridFunction ds(P.grid);
    for (std::size_t i = 0; i < P.size(); ++i) ds[i] = std::sqrt(0.5 * P.d[2][i]);
    return integrate(ds, x0, x1);
}

/// Distance from the inner end (zero section or apex) to x1; the part below the grid
/// is closed with the local exponential law P'' ~ e^{m x}.
inline double radial_distance_from_inner(const Jet& P, double x1) {
    const double p2 = P.d[2][0];
    const double m = P.d[3][0] / p2;
    const double tail = m > 0.0 ? 2.0 * std::sqrt(0.5 * p2) / m : 0.0;
    return tail + radial_distance(P, P.grid.x_min, x1);
}

/// Lengths of the two principal orbit circles (fibre and horizontal great circle);
/// angle_factor scales the angular period (cone-angle models).
struct OrbitLengths {
    double fibre;
    double horizontal;
};
inline OrbitLengths orbit_lengths(double p1, double p2, int n, double angle_factor = 1.0) {
    const double two_pi = 2.0 * M_PI;
    OrbitLengths o{two_pi * angle_factor * std::sqrt(2.0 * p2), 0.0};
    o.horizontal = n >= 2 ? two_pi * std::sqrt(2.0 * p1) : o.fibre;
    return o;
}

/// Real gradient norm |grad h|_g = sqrt(2 (h')^2 / P'').
inline double real_grad_norm(double h1, double p2) { return std::sqrt(2.0 * h1 * h1 / p2); }

/// Real Hessian norm of a radial function: radial second derivative in arclength plus the
/// orbit terms (h_s)^2 [(d_s log sqrt P'')^2 + 2(n-1)(d_s log sqrt P')^2].
inline double real_hessian_norm(double h1, double h2, double p1, double p2, double p3, int n) {
    const double w = std::sqrt(0.5 * p2);   // ds/dx
    const double w1 = 0.25 * p3 / w;        // d/dx of w
    const double hs = h1 / w;
    const double hss = (h2 - hs * w1) / (w * w);
    const double lf = 0.5 * p3 / p2 / w;    // d_s log sqrt P''
    const double lh = 0.5 * p2 / p1 / w;    // d_s log sqrt P'
    return std::sqrt(hss * hss + hs * hs * (lf * lf + 2.0 * (n - 1) * lh * lh));
}

}  // namespace kflow
