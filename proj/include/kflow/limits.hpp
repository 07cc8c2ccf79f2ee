#pragma once
// Limit diagnostics: s-refinement, convergence to the initial data, tangent flow at the zero
// section and Gromov-Hausdorff probes. Every probe maps a state back to the potential of
// g_s(t) in original coordinates and compares potentials in the fixed radial chart.

#include <memory>

#include "estimates.hpp"

namespace kflow {

/// Potential jet (P, P', P'', P''') at a point.
using Jet3 = std::array<double, 4>;

/// g_s(t) in original coordinates: P(x) = sigma [P_E + psi](x - log sigma), sigma = t + s,
/// with psi the drift-gauge perturbation. Built from a state in any gauge.
class PotentialSlice {
public:
    PotentialSlice(const ExpanderProfile& e, const FlowState& st)
        : PotentialSlice(std::make_shared<const ExpanderProfile>(e), st) {}
    PotentialSlice(std::shared_ptr<const ExpanderProfile> e, const FlowState& st) : e_(std::move(e)) {
        const FlowState d = st.gauge == Gauge::Drift ? st : transport(st, Gauge::Drift);
        s_ = d.params.s;
        tau_ = d.time;
        log_sigma_ = std::log(s_) + tau_;
        psi_ = d.psi;
    }

    double s() const { return s_; }
    double tau() const { return tau_; }
    double t() const { return s_ * std::expm1(tau_); }
    double log_sigma() const { return log_sigma_; }
    const ExpanderProfile& expander() const { return *e_; }
    const GridFunction& psi() const { return psi_; }

    /// Original-coordinate interval covered by the drift grid.
    double x_lo() const { return psi_.grid.x_min + log_sigma_; }
    double x_hi() const { return psi_.grid.x_max + log_sigma_; }

    Jet3 at(double x) const {
        const double y = x - log_sigma_;
        const auto d = e_->eval(y);
        const double sig = std::exp(log_sigma_);
        Jet3 out{};
        for (int k = 0; k < 4; ++k) out[k] = sig * (d[k] + interpolate(psi_, y, k));
        return out;
    }
    /// Parabolic rescaling t^{-1} P(x + log t) (the potential of t^{-1} g(t) pulled back by the
    /// dilation), compared against P_E at unit time.
    Jet3 rescaled(double x) const {
        const double t = this->t();
        if (!(t > 0.0)) throw ParamError("parabolic rescaling needs t > 0");
        Jet3 out = at(x + std::log(t));
        for (auto& v : out) v /= t;
        return out;
    }
    /// Original-coordinate interval covered by the rescaled slice.
    double rescaled_lo() const { return x_lo() - std::log(t()); }
    double rescaled_hi() const { return x_hi() - std::log(t()); }

private:
    std::shared_ptr<const ExpanderProfile> e_;
    double s_ = 0.0, tau_ = 0.0, log_sigma_ = 0.0;
    GridFunction psi_;
};

namespace detail {

/// Level-0 and level-1 distances between potentials a and b at one point, measured against
/// reference q: level 0 is the eigenvalue-sup norm of i dd-bar (a - b), level 1 the arclength
/// derivative (reference metric) of the two relative eigenvalue deviations.
inline std::array<double, 2> pointwise_distance(const Jet3& a, const Jet3& b, const Jet3& q) {
    const double u1 = a[1] - b[1], u2 = a[2] - b[2], u3 = a[3] - b[3];
    const double l0 = eig_sup_norm(u1, u2, q[1], q[2]);
    const double da = u2 / q[1] - u1 * q[2] / (q[1] * q[1]);
    const double db = u3 / q[2] - u2 * q[3] / (q[2] * q[2]);
    const double w = std::sqrt(0.5 * q[2]);
    return {l0, std::max(std::abs(da), std::abs(db)) / w};
}

inline Jet3 cone_jet(const ConeModel& m, double x) {
    const double g = m.exponent(), e = m.scale() * std::exp(g * x);
    return {e, g * e, g * g * e, g * g * g * e};
}

inline Jet3 expander_jet(const ExpanderProfile& e, double x) {
    const auto d = e.eval(x);
    return {d[0], d[1], d[2], d[3]};
}

/// Sup over M uniform samples of [lo, hi] of the two distance levels. Level 1 skips samples
/// where the reference P'' is below p2_floor.
template <class A, class B, class Q>
std::array<double, 2> sup_distance(A&& a, B&& b, Q&& q, double lo, double hi, std::size_t M,
                                   double p2_floor = 0.0) {
    if (!(lo < hi)) throw GridUnderflow("comparison window is empty");
    std::array<double, 2> out{0.0, 0.0};
    for (std::size_t i = 0; i < M; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(M - 1);
        const Jet3 qx = q(x);
        const auto d = pointwise_distance(a(x), b(x), qx);
        out[0] = std::max(out[0], d[0]);
        if (qx[2] >= p2_floor) out[1] = std::max(out[1], d[1]);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// s-refinement.

struct RefinementOptions {
    double delta2 = 0.01;      // compare on r^2 >= delta2
    double R2 = 1.0;           // ... and r^2 <= R2
    double outer_band = 0.5;   // x-width dropped before the outer end of every slice
    std::size_t samples = 801;
    double factor = 2.0;       // required decrease per step
};

/// Pairwise distances |g_{s_i}(t) - g_{s_{i+1}}(t)| (cone-metric eigenvalue norm) on
/// {delta2 <= r^2 <= R2}, for slices ordered by decreasing s at a common t. Passes when each
/// distance is at most 1/factor of the previous one.
inline EstimateReport s_refinement(const std::vector<PotentialSlice>& slices,
                                   const RefinementOptions& opt = {}) {
    if (slices.size() < 2) throw ParamError("s_refinement needs at least two slices");
    for (std::size_t i = 1; i < slices.size(); ++i)
        if (!(slices[i].s() < slices[i - 1].s())) throw ParamError("s_list must be decreasing");
    const ConeModel& cone = slices[0].expander().cone;
    double lo = cone.x_of_r2(opt.delta2), hi = cone.x_of_r2(opt.R2);
    for (const auto& sl : slices) {
        lo = std::max(lo, sl.x_lo() + 0.1);
        hi = std::min(hi, sl.x_hi() - opt.outer_band);
    }
    auto ref = [&](double x) { return detail::cone_jet(cone, x); };
    std::vector<double> dist;
    EstimateReport rep = EstimateReport::lower("s_refinement", 0.0, 0.0);
    for (std::size_t i = 0; i + 1 < slices.size(); ++i) {
        const auto& A = slices[i];
        const auto& B = slices[i + 1];
        const auto d = detail::sup_distance([&](double x) { return A.at(x); },
                                            [&](double x) { return B.at(x); }, ref, lo, hi,
                                            opt.samples);
        dist.push_back(d[0]);
        rep.measured["d" + std::to_string(i)] = d[0];
        rep.measured["d" + std::to_string(i) + "_k1"] = d[1];
    }
    double worst = std::numeric_limits<double>::infinity(), logsum = 0.0;
    for (std::size_t i = 0; i + 1 < dist.size(); ++i) {
        const double ratio = dist[i] / dist[i + 1];
        rep.measured["ratio" + std::to_string(i)] = ratio;
        worst = std::min(worst, ratio - opt.factor);
        logsum += std::log(ratio);
    }
    if (dist.size() >= 2) {
        rep.worst_violation = worst;
        rep.measured["rate"] = std::exp(logsum / static_cast<double>(dist.size() - 1));
    } else {
        rep.kind = EstimateReport::Kind::Record;
    }
    rep.measured["t"] = slices[0].t();
    rep.measured["x_lo"] = lo;
    rep.measured["x_hi"] = hi;
    return rep;
}

// ---------------------------------------------------------------------------------------
// Convergence to the initial data.

/// Potential of g_0 = s P_E(x - log s) + phi_0(x); phi_0 is differentiated with a 7-point
/// stencil of width `step`.
class InitialPotential {
public:
    InitialPotential(std::shared_ptr<const ExpanderProfile> e, double s, std::function<double(double)> phi0_at,
                     double step = 5e-3)
        : e_(std::move(e)), s_(s), phi0_(std::move(phi0_at)), step_(step) {
        std::vector<double> xs{-3, -2, -1, 0, 1, 2, 3};
        for (int m = 1; m <= 3; ++m) w_[m - 1] = fornberg_weights(0.0, xs, m);
    }
    double s() const { return s_; }
    Jet3 at(double x) const {
        const auto d = e_->eval(x - std::log(s_));
        Jet3 out{s_ * d[0], s_ * d[1], s_ * d[2], s_ * d[3]};
        if (!phi0_) return out;
        std::array<double, 7> f{};
        for (int j = 0; j < 7; ++j) f[j] = phi0_(x + (j - 3) * step_);
        out[0] += f[3];
        for (int m = 1; m <= 3; ++m) {
            double acc = 0.0;
            for (int j = 0; j < 7; ++j) acc += w_[m - 1][j] * f[j];
            out[m] += acc / std::pow(step_, m);
        }
        return out;
    }

private:
    std::shared_ptr<const ExpanderProfile> e_;
    double s_;
    std::function<double(double)> phi0_;
    double step_;
    std::array<std::vector<double>, 3> w_;
};

struct InitialConvergenceOptions {
    double delta2 = 0.01;
    double R2 = 1.0;
    double outer_band = 0.5;
    double t_max = 0.05;  // fit window
    std::size_t samples = 801;
};

/// Fits |g(t) - g_0|_{C^k(g_0)} <= a + b t on {delta2 <= r^2 <= R2} over the slices with
/// 0 < t <= t_max whose grid covers the whole window.
inline EstimateReport initial_convergence(const InitialPotential& g0, const std::vector<PotentialSlice>& slices,
                                          int k, const InitialConvergenceOptions& opt = {}) {
    if (k < 0 || k > 1) throw ParamError("initial_convergence supports k <= 1");
    if (slices.empty()) throw ParamError("initial_convergence needs slices");
    const ConeModel& cone = slices[0].expander().cone;
    const double lo = cone.x_of_r2(opt.delta2), hi = cone.x_of_r2(opt.R2);
    std::vector<double> ts, ds;
    for (const auto& sl : slices) {
        if (!(sl.t() > 0.0 && sl.t() <= opt.t_max)) continue;
        if (sl.x_lo() + 0.1 > lo || sl.x_hi() - opt.outer_band < hi) continue;
        const auto d = detail::sup_distance([&](double x) { return sl.at(x); },
                                            [&](double x) { return g0.at(x); },
                                            [&](double x) { return g0.at(x); }, lo, hi, opt.samples);
        ts.push_back(sl.t());
        ds.push_back(k == 0 ? d[0] : std::max(d[0], d[1]));
    }
    if (ts.size() < 2) throw ParamError("initial_convergence needs two slices covering the window");
    // least squares d = a + b t
    const double m = static_cast<double>(ts.size());
    double st = 0, sd = 0, stt = 0, std_ = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sd += ds[i];
        stt += ts[i] * ts[i];
        std_ += ts[i] * ds[i];
    }
    const double b = (m * std_ - st * sd) / (m * stt - st * st);
    const double a = (sd - b * st) / m;
    double resid = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) resid = std::max(resid, std::abs(ds[i] - a - b * ts[i]));
    EstimateReport rep = EstimateReport::record("initial_convergence_k" + std::to_string(k));
    rep.measured = {{"a", a},         {"b", b}, {"k", k}, {"points", m}, {"max_residual", resid},
                    {"t_min", ts.front()}, {"s", g0.s()}, {"delta2", opt.delta2}};
    return rep;
}

// ---------------------------------------------------------------------------------------
// Tangent flow.

/// Dyadic probe of the tangent flow at the zero section: t_sequence decreasing, window
/// {r^2 <= lambda0}, distances[i] = {j = 0, j = 1} at t_sequence[i].
struct TangentProbe {
    std::vector<double> t_sequence{0.08, 0.04, 0.02, 0.01};
    double lambda0 = 4.0;
    std::vector<std::array<double, 2>> distances;

    /// Probe times must satisfy t <= min(R^2 / (2 lambda), R^2 / lambda0).
    void validate_window(double R2, double lambda) const {
        if (!(lambda0 > 0.0)) throw WindowError("window radius must be positive");
        const double cap = std::min(R2 / (2.0 * lambda), R2 / lambda0);
        for (std::size_t i = 0; i < t_sequence.size(); ++i) {
            if (!(t_sequence[i] > 0.0)) throw WindowError("probe times must be positive");
            if (t_sequence[i] > cap * (1.0 + 1e-12))
                throw WindowError("probe time " + std::to_string(t_sequence[i]) +
                                  " exceeds min(R^2/(2 lambda), R^2/lambda0) = " + std::to_string(cap));
            if (i > 0 && !(t_sequence[i] < t_sequence[i - 1]))
                throw WindowError("probe times must decrease");
        }
    }
};

struct TangentOptions {
    double inner_margin = 0.25;  // x-width dropped above the inner end of each slice
    double p2_floor = 1e-2;      // level-1 samples need P_E'' above this
    double factor = 1.5;         // required decrease per halving
    std::size_t min_levels = 3;
    double floor = 1e-6;         // discretisation floor: halvings below it count as converged
    std::size_t samples = 801;
};

/// Distances between the parabolically rescaled slices and g_E on {r^2 <= lambda0}, one
/// slice per probe time. Reports tangent_j0 and tangent_j1.
inline ReportList tangent_flow(const std::vector<PotentialSlice>& slices, TangentProbe& probe,
                               double R2, double lambda, const TangentOptions& opt = {}) {
    probe.validate_window(R2, lambda);
    if (slices.size() != probe.t_sequence.size()) throw ParamError("one slice per probe time");
    const ExpanderProfile& e = slices[0].expander();
    const double hi = e.cone.x_of_r2(probe.lambda0);
    probe.distances.clear();
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const auto& sl = slices[i];
        if (std::abs(sl.t() - probe.t_sequence[i]) > 1e-9 * probe.t_sequence[i])
            throw ParamError("slice time does not match the probe sequence");
        const double lo = sl.rescaled_lo() + opt.inner_margin;
        if (hi > sl.rescaled_hi()) throw GridUnderflow("tangent window exceeds the slice grid");
        auto ref = [&](double x) { return detail::expander_jet(e, x); };
        probe.distances.push_back(detail::sup_distance([&](double x) { return sl.rescaled(x); }, ref,
                                                       ref, lo, hi, opt.samples, opt.p2_floor));
    }
    ReportList out;
    for (int j = 0; j < 2; ++j) {
        EstimateReport r = EstimateReport::lower("tangent_j" + std::to_string(j), 0.0, 0.0);
        std::size_t levels = 0;
        double worst = std::numeric_limits<double>::infinity();
        bool stopped = false;
        for (std::size_t i = 0; i < probe.distances.size(); ++i) {
            r.measured["d_t" + std::to_string(i)] = probe.distances[i][j];
            if (i == 0 || stopped) continue;
            const double prev = probe.distances[i - 1][j], cur = probe.distances[i][j];
            const double ratio = prev / cur;
            r.measured["ratio" + std::to_string(i - 1)] = ratio;
            if (prev <= opt.floor) {
                stopped = true;
                continue;
            }
            if (ratio < opt.factor) {
                worst = std::min(worst, ratio - opt.factor);
                stopped = true;
                continue;
            }
            ++levels;
            worst = std::min(worst, ratio - opt.factor);
        }
        r.measured["levels"] = static_cast<double>(levels);
        const bool reached_floor = !probe.distances.empty() && probe.distances.back()[j] <= opt.floor;
        if (levels < opt.min_levels && !reached_floor)
            worst = std::min(worst, -static_cast<double>(opt.min_levels - levels));
        r.worst_violation = std::isfinite(worst) ? worst : 0.0;
        r.measured["lambda0"] = probe.lambda0;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// Gromov-Hausdorff probes.

struct GHOptions {
    double R2 = 1.0;
    std::size_t samples = 1601;
};

/// Diameter of {r^2 <= delta1} under g(t) (twice the radial distance from the zero section plus
/// half the longest orbit circle at the boundary level) against the cone value, and the
/// distortion sup |d_{g(t)}(x, x_2) - (r(x) - r_2)| of radial pairs on {delta2 <= r^2 <= R2}.
inline EstimateReport gh_probes(const PotentialSlice& sl, double delta1, double delta2,
                                const GHOptions& opt = {}) {
    const ExpanderProfile& e = sl.expander();
    const ConeModel& cone = e.cone;
    const double x1 = cone.x_of_r2(delta1), x2 = cone.x_of_r2(delta2), xR = cone.x_of_r2(opt.R2);
    const double lo = sl.x_lo();
    const double hi = std::max({x1, x2, xR});
    if (!(x1 > lo && hi < sl.x_hi())) throw GridUnderflow("GH probe levels outside the slice grid");
    const Grid g(lo, hi, opt.samples);
    const Jet P = exact_jet(g, [&](double x) {
        const auto d = sl.at(x);
        return std::array<double, 5>{d[0], d[1], d[2], d[3], 0.0};
    });
    const double rho1 = radial_distance_from_inner(P, x1);
    const auto orb = orbit_lengths(interpolate(P.deriv(1), x1), interpolate(P.deriv(2), x1), e.n,
                                   cone.angle_factor());
    const double diam = 2.0 * rho1 + 0.5 * std::max(orb.fibre, orb.horizontal);
    const double r1 = std::sqrt(delta1);
    const Jet3 c1 = detail::cone_jet(cone, x1);
    const auto corb = orbit_lengths(c1[1], c1[2], e.n, cone.angle_factor());
    const double cone_diam = 2.0 * r1 + 0.5 * std::max(corb.fibre, corb.horizontal);
    double dist = 0.0;
    const double r2 = std::sqrt(delta2);
    for (std::size_t i = 0; i < g.N; ++i) {
        const double x = g.x(i);
        if (x < x2 || x > xR) continue;
        const double dg = radial_distance(P, x2, x);
        dist = std::max(dist, std::abs(dg - (std::sqrt(cone.r2(x)) - r2)));
    }
    EstimateReport rep = EstimateReport::record("gh_probe");
    rep.measured = {{"t", sl.t()},           {"delta1", delta1}, {"delta2", delta2},
                    {"diameter", diam},      {"cone_diameter", cone_diam},
                    {"radial_part", 2.0 * rho1}, {"distortion", dist}};
    return rep;
}

}  // namespace kflow
