#pragma once
// Radial grids, grid functions and the finite-difference scheme shared by every module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace kflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
#define KFLOW_ERROR(Name)                                  \
    struct Name : Error {                                  \
        explicit Name(const std::string& m) : Error(#Name ": " + m) {} \
    }
KFLOW_ERROR(NonKahler);
KFLOW_ERROR(ShootingFailure);
KFLOW_ERROR(NonAdmissible);
KFLOW_ERROR(UnknownModel);
KFLOW_ERROR(DimensionError);
KFLOW_ERROR(GridUnderflow);
KFLOW_ERROR(FloorViolation);
KFLOW_ERROR(ParamError);
KFLOW_ERROR(StepRejected);
KFLOW_ERROR(HorizonReached);
KFLOW_ERROR(WindowError);
KFLOW_ERROR(MissingArtifacts);
KFLOW_ERROR(ConfigError);
#undef KFLOW_ERROR

/// Uniform grid in x = log r^2.
struct Grid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t N = 16;

    Grid() = default;
    Grid(double lo, double hi, std::size_t n) : x_min(lo), x_max(hi), N(n) {
        if (!(lo < hi) || n < 16) throw ParamError("grid needs x_min < x_max and N >= 16");
    }
    /// Grid with spacing h starting at lo, N nodes.
    static Grid with_spacing(double lo, double h, std::size_t n) {
        return Grid(lo, lo + h * static_cast<double>(n - 1), n);
    }
    double h() const { return (x_max - x_min) / static_cast<double>(N - 1); }
    double x(std::size_t i) const { return x_min + h() * static_cast<double>(i); }
    std::vector<double> nodes() const {
        std::vector<double> out(N);
        for (std::size_t i = 0; i < N; ++i) out[i] = x(i);
        return out;
    }
    Grid shifted(double dx) const {
        Grid g = *this;
        g.x_min += dx;
        g.x_max += dx;
        return g;
    }
    bool contains(double xv, double slack = 1e-12) const {
        return xv >= x_min - slack && xv <= x_max + slack;
    }
};

struct GridFunction {
    Grid grid;
    std::vector<double> v;

    GridFunction() = default;
    explicit GridFunction(const Grid& g, double fill = 0.0) : grid(g), v(g.N, fill) {}
    GridFunction(const Grid& g, std::vector<double> vals) : grid(g), v(std::move(vals)) {
        if (v.size() != grid.N) throw ParamError("value count does not match grid");
    }
    template <class F>
    static GridFunction sample(const Grid& g, F&& f) {
        GridFunction out(g);
        for (std::size_t i = 0; i < g.N; ++i) out.v[i] = f(g.x(i));
        return out;
    }
    std::size_t size() const { return v.size(); }
    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
    bool finite() const {
        return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
    }
    GridFunction& operator+=(const GridFunction& o) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
    }
    GridFunction& operator*=(double a) {
        for (auto& e : v) e *= a;
        return *this;
    }
};

inline GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
inline GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
inline GridFunction operator*(double s, GridFunction a) { return a *= s; }

inline double sup_abs(const GridFunction& f, std::size_t lo = 0, std::size_t hi = 0) {
    if (hi == 0 || hi > f.size()) hi = f.size();
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(f[i]));
    return m;
}

/// Fornberg weights for the m-th derivative at z from nodes xs.
inline std::vector<double> fornberg_weights(double z, const std::vector<double>& xs, int m) {
    const int n = static_cast<int>(xs.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0, c4 = xs[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

/// Derivative of order m on a uniform grid: 4th-order centered in the interior,
/// 4th-order one-sided windows near the ends. Weights are for unit spacing.
class DiffOp {
public:
    struct Row {
        std::size_t start;
        std::vector<double> w;
    };

    DiffOp(std::size_t N, int m, int accuracy = 4) : N_(N), m_(m) {
        const int half = (m + accuracy - 1) / 2;
        const int width_c = 2 * half + 1;
        const int width_b = m + accuracy;
        if (static_cast<int>(N) < width_b + 1) throw ParamError("grid too small for stencil");
        rows_.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            const long ii = static_cast<long>(i);
            long start;
            int width;
            if (ii - half >= 0 && ii + half < static_cast<long>(N)) {
                start = ii - half;
                width = width_c;
            } else {
                width = width_b;
                start = ii - half < 0 ? 0 : static_cast<long>(N) - width;
            }
            std::vector<double> xs(width);
            for (int k = 0; k < width; ++k) xs[k] = static_cast<double>(start + k);
            rows_[i] = Row{static_cast<std::size_t>(start),
                           fornberg_weights(static_cast<double>(i), xs, m)};
        }
    }

    static const DiffOp& get(std::size_t N, int m) {
        static std::mutex mu;
        static std::map<std::pair<std::size_t, int>, DiffOp> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(N, m);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, DiffOp(N, m)).first;
        return it->second;
    }

    int order() const { return m_; }
    const Row& row(std::size_t i) const { return rows_[i]; }

    double at(const std::vector<double>& f, std::size_t i, double h) const {
        const Row& r = rows_[i];
        double s = 0.0;
        for (std::size_t k = 0; k < r.w.size(); ++k) s += r.w[k] * f[r.start + k];
        return s / std::pow(h, m_);
    }

    std::vector<double> apply(const std::vector<double>& f, double h) const {
        std::vector<double> out(N_);
        for (std::size_t i = 0; i < N_; ++i) out[i] = at(f, i, h);
        return out;
    }

private:
    std::size_t N_;
    int m_;
    std::vector<Row> rows_;
};

inline GridFunction derivative(const GridFunction& f, int m = 1) {
    if (m == 0) return f;
    return GridFunction(f.grid, DiffOp::get(f.grid.N, m).apply(f.v, f.grid.h()));
}

/// Values and x-derivatives up to order 4 on a grid. Optionally carries the first two
/// derivatives of log P'' (l1, l2), which keeps curvature accurate where P'' is tiny.
struct Jet {
    Grid grid;
    std::array<std::vector<double>, 5> d;
    std::vector<double> l1, l2;

    Jet() = default;
    explicit Jet(const Grid& g) : grid(g) {
        for (auto& a : d) a.assign(g.N, 0.0);
    }
    std::size_t size() const { return grid.N; }
    GridFunction value() const { return GridFunction(grid, d[0]); }
    GridFunction deriv(int k) const { return GridFunction(grid, d[k]); }
    bool has_log() const { return !l1.empty(); }
    /// (log P'')' at node i.
    double lb1(std::size_t i) const { return has_log() ? l1[i] : d[3][i] / d[2][i]; }
    /// (log P'')'' at node i.
    double lb2(std::size_t i) const {
        return has_log() ? l2[i] : (d[4][i] * d[2][i] - d[3][i] * d[3][i]) / (d[2][i] * d[2][i]);
    }

    Jet& operator+=(const Jet& o) {
        for (int k = 0; k < 5; ++k)
            for (std::size_t i = 0; i < d[k].size(); ++i) d[k][i] += o.d[k][i];
        l1.clear();
        l2.clear();
        return *this;
    }
    Jet& operator*=(double a) {
        for (auto& arr : d)
            for (auto& e : arr) e *= a;
        return *this;
    }
};
inline Jet operator+(Jet a, const Jet& b) { return a += b; }

/// Jet of a grid function through the finite-difference scheme.
inline Jet fd_jet(const GridFunction& f) {
    Jet j(f.grid);
    j.d[0] = f.v;
    for (int k = 1; k <= 4; ++k) j.d[k] = DiffOp::get(f.grid.N, k).apply(f.v, f.grid.h());
    return j;
}

/// Jet of a function given in closed form by a callable returning 5 derivatives, or 7 values
/// where the last two are (log P'')' and (log P'')''.
template <class F>
Jet exact_jet(const Grid& g, F&& f) {
    Jet j(g);
    using R = decltype(f(0.0));
    constexpr std::size_t M = std::tuple_size<R>::value;
    if constexpr (M == 7) {
        j.l1.assign(g.N, 0.0);
        j.l2.assign(g.N, 0.0);
    }
    for (std::size_t i = 0; i < g.N; ++i) {
        const R a = f(g.x(i));
        for (int k = 0; k < 5; ++k) j.d[k][i] = a[k];
        if constexpr (M == 7) {
            j.l1[i] = a[5];
            j.l2[i] = a[6];
        }
    }
    return j;
}

/// Reference jet plus a grid perturbation psi; log P'' derivatives are formed through
/// log1p(psi''/P_ref'') so that no cancellation occurs where psi is small.
inline Jet perturb(const Jet& ref, const GridFunction& psi) {
    Jet out = ref;
    const Jet dp = fd_jet(psi);
    for (int k = 0; k < 5; ++k)
        for (std::size_t i = 0; i < out.size(); ++i) out.d[k][i] += dp.d[k][i];
    GridFunction L(ref.grid);
    for (std::size_t i = 0; i < out.size(); ++i) L[i] = std::log1p(dp.d[2][i] / ref.d[2][i]);
    const auto L1 = DiffOp::get(L.grid.N, 1).apply(L.v, L.grid.h());
    const auto L2 = DiffOp::get(L.grid.N, 2).apply(L.v, L.grid.h());
    out.l1.assign(out.size(), 0.0);
    out.l2.assign(out.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.l1[i] = ref.lb1(i) + L1[i];
        out.l2[i] = ref.lb2(i) + L2[i];
    }
    return out;
}

/// Local Lagrange interpolation (6 points) of f and its first derivatives at xq.
inline double interpolate(const GridFunction& f, double xq, int deriv = 0) {
    const Grid& g = f.grid;
    const double h = g.h();
    if (!g.contains(xq, 1e-9 * h)) throw GridUnderflow("interpolation point outside grid");
    const int width = 6;
    long i0 = static_cast<long>(std::floor((xq - g.x_min) / h)) - 2;
    i0 = std::clamp(i0, 0L, static_cast<long>(g.N) - width);
    std::vector<double> xs(width);
    for (int k = 0; k < width; ++k) xs[k] = static_cast<double>(i0 + k);
    const auto w = fornberg_weights((xq - g.x_min) / h, xs, deriv);
    double s = 0.0;
    for (int k = 0; k < width; ++k) s += w[k] * f.v[static_cast<std::size_t>(i0 + k)];
    return s / std::pow(h, deriv);
}

/// Resample onto another grid; points outside the source grid throw GridUnderflow.
inline GridFunction resample(const GridFunction& f, const Grid& target) {
    GridFunction out(target);
    for (std::size_t i = 0; i < target.N; ++i) out.v[i] = interpolate(f, target.x(i));
    return out;
}

}  // namespace kflow
