#pragma once
// Independent reference computations used by the unit and acceptance tests. Nothing here
// calls into the reduced formulas of the library.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using ld = long double;
using cld = std::complex<ld>;

/// Closed-form test potential P = a e^x + b log(1 + e^x) + c e^{2x}, smooth on C^n.
struct TestPotential {
    ld a = 0.5L, b = 0.3L, c = 0.05L;

    /// d^k P / dx^k, k = 0..4.
    std::array<ld, 5> derivs(ld x) const {
        const ld e = std::exp(x), s = e / (1 + e);
        const ld s1 = s * (1 - s), s2 = s1 * (1 - 2 * s), s3 = s1 * (1 - 6 * s + 6 * s * s);
        const ld e2 = std::exp(2 * x);
        return {a * e + b * std::log1p(e) + c * e2, a * e + b * s + 2 * c * e2, a * e + b * s1 + 4 * c * e2,
                a * e + b * s2 + 8 * c * e2, a * e + b * s3 + 16 * c * e2};
    }
    std::array<double, 5> derivs_d(double x) const {
        const auto v = derivs(x);
        return {double(v[0]), double(v[1]), double(v[2]), double(v[3]), double(v[4])};
    }
};

/// Fubini-Study potential log(1 + e^x): Ric = (n+1) omega, so R_omega = n(n+1).
struct FubiniStudy {
    std::array<ld, 5> derivs(ld x) const {
        const ld e = std::exp(x), s = e / (1 + e);
        const ld s1 = s * (1 - s);
        return {std::log1p(e), s, s1, s1 * (1 - 2 * s), s1 * (1 - 6 * s + 6 * s * s)};
    }
    std::array<double, 5> derivs_d(double x) const {
        const auto v = derivs(x);
        return {double(v[0]), double(v[1]), double(v[2]), double(v[3]), double(v[4])};
    }
};

/// Riemannian metric 2 Re dd-bar P(log|z|^2) on R^{2n} in coordinates (x_1..x_n, y_1..y_n),
/// built from P' and P'' only.
template <class Pot>
struct FullMetric {
    Pot pot;
    int n;

    using Mat = Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<ld, Eigen::Dynamic, 1>;

    Mat metric(const Vec& p) const {
        std::vector<cld> z(n);
        ld r2 = 0;
        for (int j = 0; j < n; ++j) {
            z[j] = cld(p[j], p[n + j]);
            r2 += std::norm(z[j]);
        }
        const auto d = pot.derivs(std::log(r2));
        const ld p1 = d[1], p2 = d[2];
        Mat G(2 * n, 2 * n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const cld h = (j == k ? p1 / r2 : ld(0)) + (p2 - p1) * std::conj(z[j]) * z[k] / (r2 * r2);
                G(j, k) = 2 * h.real();
                G(n + j, n + k) = 2 * h.real();
                G(j, n + k) = 2 * h.imag();
                G(n + j, k) = -2 * h.imag();
            }
        return G;
    }

    struct Curvature {
        ld rm_norm;  // |Rm|_g
        ld scalar;   // R_g
    };

    /// |Rm| and scalar curvature by central differences of the metric (step hs).
    Curvature curvature(const Vec& p, ld hs = 2e-4L) const {
        const int D = 2 * n;
        auto at = [&](int a, ld da, int b, ld db) {
            Vec q = p;
            if (a >= 0) q[a] += da;
            if (b >= 0) q[b] += db;
            return metric(q);
        };
        const Mat G = metric(p), Gi = G.inverse();
        std::vector<Mat> dG(D);
        for (int c = 0; c < D; ++c) dG[c] = (at(c, hs, -1, 0) - at(c, -hs, -1, 0)) / (2 * hs);
        std::vector<std::vector<Mat>> ddG(D, std::vector<Mat>(D));
        for (int c = 0; c < D; ++c)
            for (int e = c; e < D; ++e) {
                if (c == e)
                    ddG[c][c] = (at(c, hs, -1, 0) - 2 * G + at(c, -hs, -1, 0)) / (hs * hs);
                else
                    ddG[c][e] = (at(c, hs, e, hs) - at(c, hs, e, -hs) - at(c, -hs, e, hs) + at(c, -hs, e, -hs)) /
                                (4 * hs * hs);
                ddG[e][c] = ddG[c][e];
            }
        // Christoffel symbols of the second kind
        auto idx = [D](int a, int b, int c) { return (a * D + b) * D + c; };
        std::vector<ld> Gam(D * D * D, 0);
        for (int e = 0; e < D; ++e)
            for (int b = 0; b < D; ++b)
                for (int c = 0; c < D; ++c) {
                    ld s = 0;
                    for (int f = 0; f < D; ++f)
                        s += Gi(e, f) * (dG[b](f, c) + dG[c](f, b) - dG[f](b, c));
                    Gam[idx(e, b, c)] = s / 2;
                }
        std::vector<ld> R(D * D * D * D, 0);
        auto ri = [D](int a, int b, int c, int d) { return ((a * D + b) * D + c) * D + d; };
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b)
                for (int c = 0; c < D; ++c)
                    for (int d = 0; d < D; ++d) {
                        ld v = (ddG[b][c](a, d) + ddG[a][d](b, c) - ddG[b][d](a, c) - ddG[a][c](b, d)) / 2;
                        for (int e = 0; e < D; ++e)
                            for (int f = 0; f < D; ++f)
                                v += G(e, f) * (Gam[idx(e, b, c)] * Gam[idx(f, a, d)] -
                                                Gam[idx(e, b, d)] * Gam[idx(f, a, c)]);
                        R[ri(a, b, c, d)] = v;
                    }
        // raise all indices for the norm
        ld norm2 = 0, scal = 0;
        std::vector<ld> T1(R.size()), T2(R.size());
        auto raise = [&](const std::vector<ld>& in, std::vector<ld>& out, int slot) {
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b)
                    for (int c = 0; c < D; ++c)
                        for (int d = 0; d < D; ++d) {
                            int i4[4] = {a, b, c, d};
                            ld s = 0;
                            for (int m = 0; m < D; ++m) {
                                int j4[4] = {a, b, c, d};
                                j4[slot] = m;
                                s += Gi(i4[slot], m) * in[ri(j4[0], j4[1], j4[2], j4[3])];
                            }
                            out[ri(a, b, c, d)] = s;
                        }
        };
        raise(R, T1, 0);
        raise(T1, T2, 1);
        raise(T2, T1, 2);
        raise(T1, T2, 3);
        for (std::size_t i = 0; i < R.size(); ++i) norm2 += R[i] * T2[i];
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b)
                for (int c = 0; c < D; ++c)
                    for (int d = 0; d < D; ++d) scal += Gi(a, c) * Gi(b, d) * R[ri(a, b, c, d)];
        return {std::sqrt(norm2), scal};
    }

    /// Laplace-Beltrami and |grad h|^2 of h(p) = H(log|p|^2) by central differences.
    std::array<ld, 2> laplace_grad(const Vec& p, const std::function<ld(ld)>& H, ld hs = 4e-5L) const {
        const int D = 2 * n;
        auto hval = [&](const Vec& q) { return H(std::log(q.squaredNorm())); };
        const Mat G = metric(p), Gi = G.inverse();
        Vec dh(D);
        Mat ddh(D, D);
        std::vector<Mat> dG(D);
        for (int c = 0; c < D; ++c) {
            Vec qp = p, qm = p;
            qp[c] += hs;
            qm[c] -= hs;
            dh[c] = (hval(qp) - hval(qm)) / (2 * hs);
            dG[c] = (metric(qp) - metric(qm)) / (2 * hs);
            for (int e = 0; e < D; ++e) {
                Vec a = p, b = p, c2 = p, d = p;
                a[c] += hs, a[e] += hs;
                b[c] += hs, b[e] -= hs;
                c2[c] -= hs, c2[e] += hs;
                d[c] -= hs, d[e] -= hs;
                ddh(c, e) = (hval(a) - hval(b) - hval(c2) + hval(d)) / (4 * hs * hs);
            }
        }
        ld lap = 0;
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) {
                ld gam_dh = 0;
                for (int e = 0; e < D; ++e) {
                    ld g = 0;
                    for (int f = 0; f < D; ++f) g += Gi(e, f) * (dG[a](f, b) + dG[b](f, a) - dG[f](a, b));
                    gam_dh += g / 2 * dh[e];
                }
                lap += Gi(a, b) * (ddh(a, b) - gam_dh);
            }
        const ld grad = dh.dot(Gi * dh);
        return {lap, grad};
    }

    /// Point with |z|^2 = e^x along a fixed generic direction.
    Vec point(ld x) const {
        Vec u(2 * n);
        const ld base[4] = {0.6L, 0.5L, 0.3L, -0.55L};  // x_1, x_2, y_1, y_2
        if (n == 1) {
            u << 0.8L, 0.6L;
        } else {
            u << base[0], base[1], base[2], base[3];
        }
        u /= u.norm();
        return u * std::exp(x / 2);
    }
};

/// The n = 1 expander in the moment coordinate y = P': the soliton ODE becomes
/// dP''/dy = 1 + b + y - P'', so P'' = phi(y) = y + b (1 - e^{-y}). The position
/// x(y) = log((y + b)/c) - int_y^inf b e^{-u} / (phi(u) (u + b)) du follows by quadrature.
struct MomentExpander1D {
    ld b;  // 1/gamma - 1
    ld c;  // cone scale
    int panels = 4000;

    ld phi(ld y) const { return y + b * (-std::expm1(-y)); }

    /// Composite Gauss-Legendre (5 points) on [y, Y] plus the tail beyond Y, which is
    /// below e^{-Y}.
    ld x_of_y(ld y) const {
        static const ld gx[5] = {-0.9061798459386639927976L, -0.5384693101056830910363L, 0.0L,
                                 0.5384693101056830910363L, 0.9061798459386639927976L};
        static const ld gw[5] = {0.2369268850561890875143L, 0.4786286704993664680413L, 0.5688888888888888888889L,
                                 0.4786286704993664680413L, 0.2369268850561890875143L};
        auto f = [&](ld u) { return b * std::exp(-u) / (phi(u) * (u + b)); };
        // log-spaced panels resolve the 1/u behaviour near the tip
        const ld Y = 60.0L;
        const ld la = std::log(y), lb = std::log(Y);
        ld total = 0;
        for (int p = 0; p < panels; ++p) {
            const ld a0 = la + (lb - la) * p / panels, a1 = la + (lb - la) * (p + 1) / panels;
            const ld m = (a0 + a1) / 2, r = (a1 - a0) / 2;
            for (int k = 0; k < 5; ++k) {
                const ld v = m + r * gx[k];
                const ld u = std::exp(v);
                total += gw[k] * r * f(u) * u;  // du = u dv
            }
        }
        return std::log((y + b) / c) - total;
    }
};

}  // namespace oracle
