#pragma once
// Parabolic complex Monge-Ampere flow in three gauges, with exact gauge maps (grid shifts),
// region bookkeeping and a trapezoidal Newton integrator.
//
//   unnormalised: d/dt phi = log(omega^n / omega_E(t+s)^n),       reference t P_E shifted
//   rescaled:     same with s = 1 (time tbar = t / s)
//   drift:        d/dtau psi = log(omega_psi^n / omega_E^n) + psi' - psi, reference P_E

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include "expander.hpp"

namespace kflow {

enum class Gauge { Unnormalised, Rescaled, Drift };

inline const char* gauge_name(Gauge g) {
    switch (g) {
        case Gauge::Unnormalised: return "unnormalised";
        case Gauge::Rescaled: return "rescaled";
        case Gauge::Drift: return "drift";
    }
    return "?";
}
inline Gauge gauge_from_name(const std::string& s) {
    if (s == "unnormalised") return Gauge::Unnormalised;
    if (s == "rescaled") return Gauge::Rescaled;
    if (s == "drift") return Gauge::Drift;
    throw ParamError("unknown gauge '" + s + "'");
}

struct BoundaryPolicy {
    enum class Inner { Regularity, Symmetry };
    enum class Outer { FrozenDirichlet, ConeCorrected };
    Inner inner = Inner::Regularity;
    Outer outer = Outer::ConeCorrected;
};

/// Approximation scale s and region parameters; T_s is the maximal existence time
/// (infinite unless detected).
struct RegionParams {
    double s = 1e-3;
    double R2 = 1.0;
    double lambda = 10.0;
    double T_s = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(s > 0.0 && s <= 1.0)) throw ParamError("s must lie in (0,1]");
        if (!(R2 > 4.0 * std::sqrt(s))) throw ParamError("need R^2 > 4 sqrt(s)");
        if (!(lambda > 0.0) || lambda > 1.0 / std::sqrt(s) * (1.0 + 1e-12))
            throw ParamError("need 0 < lambda <= 1/sqrt(s)");
    }
    /// T_s' in drift time.
    double horizon1() const {
        return std::min(std::log(T_s / s + 1.0), std::log1p(R2 / (lambda * s)));
    }
    /// T_s'' in drift time.
    double horizon2() const { return std::min(std::log(T_s / s + 1.0), std::log(R2 / (2.0 * lambda * s))); }
};

/// Time conversions between gauges: t (unnormalised), tbar = t/s (rescaled), tau = log(1+tbar).
inline double drift_time(Gauge g, double time, double s) {
    switch (g) {
        case Gauge::Unnormalised: return std::log1p(time / s);
        case Gauge::Rescaled: return std::log1p(time);
        case Gauge::Drift: return time;
    }
    return time;
}
inline double gauge_time(Gauge g, double tau, double s) {
    switch (g) {
        case Gauge::Unnormalised: return s * std::expm1(tau);
        case Gauge::Rescaled: return std::expm1(tau);
        case Gauge::Drift: return tau;
    }
    return tau;
}

struct FlowState {
    Gauge gauge = Gauge::Drift;
    double time = 0.0;
    GridFunction psi;
    RegionParams params;

    double horizon1() const { return gauge_time(gauge, params.horizon1(), params.s); }
    double horizon2() const { return gauge_time(gauge, params.horizon2(), params.s); }
    double tau() const { return drift_time(gauge, time, params.s); }
};

// ---------------------------------------------------------------------------------------
// Gauge maps. Each is an exact shift of the grid plus a scaling of values.

/// phibar(x, t/s) = phi(x + log s, t) / s.
inline GridFunction gauge_to_rescaled(const GridFunction& phi, double s) {
    GridFunction out = phi;
    out.grid = phi.grid.shifted(-std::log(s));
    out *= 1.0 / s;
    return out;
}
inline GridFunction gauge_from_rescaled(const GridFunction& phibar, double s) {
    GridFunction out = phibar;
    out.grid = phibar.grid.shifted(std::log(s));
    out *= s;
    return out;
}
/// psi(x, tau) = e^{-tau} phibar(x + tau, e^tau - 1).
inline GridFunction gauge_to_drift(const GridFunction& phibar, double tau) {
    GridFunction out = phibar;
    out.grid = phibar.grid.shifted(-tau);
    out *= std::exp(-tau);
    return out;
}
inline GridFunction gauge_from_drift(const GridFunction& psi, double tau) {
    GridFunction out = psi;
    out.grid = psi.grid.shifted(tau);
    out *= std::exp(tau);
    return out;
}

/// Transports a state to another gauge.
inline FlowState transport(const FlowState& st, Gauge target) {
    const double s = st.params.s;
    // bring to rescaled
    GridFunction bar = st.psi;
    const double tau = st.tau();
    if (st.gauge == Gauge::Unnormalised) bar = gauge_to_rescaled(st.psi, s);
    if (st.gauge == Gauge::Drift) bar = gauge_from_drift(st.psi, tau);
    FlowState out = st;
    out.gauge = target;
    out.time = gauge_time(target, tau, s);
    if (target == Gauge::Rescaled) out.psi = bar;
    if (target == Gauge::Unnormalised) out.psi = gauge_from_rescaled(bar, s);
    if (target == Gauge::Drift) out.psi = gauge_to_drift(bar, tau);
    return out;
}

// ---------------------------------------------------------------------------------------
// Regions.

enum class RegionTag { Expanding, Boundary, Conical, Outer };

/// Squared cone radius of each node in drift coordinates.
inline double drift_r2(const FlowState& st, const ConeModel& m, double x) {
    const double r2 = m.r2(x);
    switch (st.gauge) {
        case Gauge::Drift: return r2;
        case Gauge::Rescaled: return r2 / (st.time + 1.0);
        case Gauge::Unnormalised: return r2 / (st.time + st.params.s);
    }
    return r2;
}

/// Expanding {r^2 < lambda} (drift), boundary {r^2 = lambda}, conical
/// {lambda tbar <= rbar^2 <= R^2/s} (rescaled), outer beyond.
inline std::vector<RegionTag> region(const FlowState& st, const ConeModel& m) {
    st.params.validate();
    const auto& p = st.params;
    const double tbar = std::expm1(st.tau());
    std::vector<RegionTag> tags(st.psi.size());
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const double rd2 = drift_r2(st, m, st.psi.grid.x(i));
        const double rbar2 = rd2 * (tbar + 1.0);
        if (std::abs(rd2 - p.lambda) <= 1e-12 * p.lambda)
            tags[i] = RegionTag::Boundary;
        else if (rd2 < p.lambda)
            tags[i] = RegionTag::Expanding;
        else if (rbar2 >= p.lambda * tbar && rbar2 <= p.R2 / p.s)
            tags[i] = RegionTag::Conical;
        else
            tags[i] = RegionTag::Outer;
    }
    return tags;
}

/// Index of the last node with drift r^2 <= lambda (the discrete parabolic boundary).
inline std::size_t boundary_node(const FlowState& st, const ConeModel& m) {
    std::size_t last = 0;
    for (std::size_t i = 0; i < st.psi.size(); ++i)
        if (drift_r2(st, m, st.psi.grid.x(i)) <= st.params.lambda * (1.0 + 1e-12)) last = i;
    return last;
}

// ---------------------------------------------------------------------------------------
// Right-hand sides.

namespace detail {

/// Monge-Ampere operator against a reference jet; optionally fills Jacobian weights
/// (coefficients of D1 psi, D2 psi and psi in the linearisation). With interior_only the two
/// end nodes, which carry boundary rows in the integrator, are skipped.
struct MAEval {
    std::vector<double> F, c1, c2, c0;
};
inline MAEval ma_eval(const GridFunction& psi, const Jet& ref, int n, bool drift, bool jac,
                      bool interior_only = false) {
    const std::size_t N = psi.size();
    const double h = psi.grid.h();
    const auto d1 = DiffOp::get(N, 1).apply(psi.v, h);
    const auto d2 = DiffOp::get(N, 2).apply(psi.v, h);
    MAEval r;
    r.F.resize(N);
    if (jac) {
        r.c1.resize(N);
        r.c2.resize(N);
        r.c0.resize(N);
    }
    const std::size_t lo = interior_only ? 1 : 0, hi = interior_only ? N - 1 : N;
    for (std::size_t i = lo; i < hi; ++i) {
        const double a = ref.d[1][i], b = ref.d[2][i];
        const double A = a + d1[i], B = b + d2[i];
        if (!(A > 0.0) || !(B > 0.0))
            throw NonKahler("perturbed metric degenerate at x = " + std::to_string(psi.grid.x(i)));
        double F = (n - 1) * std::log1p(d1[i] / a) + std::log1p(d2[i] / b);
        if (drift) F += d1[i] - psi[i];
        r.F[i] = F;
        if (jac) {
            r.c1[i] = (n - 1) / A + (drift ? 1.0 : 0.0);
            r.c2[i] = 1.0 / B;
            r.c0[i] = drift ? -1.0 : 0.0;
        }
    }
    return r;
}

}  // namespace detail

/// volume_ratio(P_E + psi, P_E) + psi' - psi.
inline GridFunction rhs_drift(const FlowState& st, const ExpanderProfile& e) {
    if (st.gauge != Gauge::Drift) throw ParamError("rhs_drift needs a drift-gauge state");
    const Jet ref = e.jet_on(st.psi.grid);
    return GridFunction(st.psi.grid, detail::ma_eval(st.psi, ref, e.n, true, false).F);
}

/// volume_ratio(P_{E,t+s} + phi, P_{E,t+s}); in the rescaled gauge the reference is P_{E,tbar+1}.
inline GridFunction rhs_unnormalised(const FlowState& st, const ExpanderProfile& e) {
    if (st.gauge == Gauge::Drift) throw ParamError("rhs_unnormalised needs an undrifted state");
    const double sigma = st.gauge == Gauge::Unnormalised ? st.time + st.params.s : st.time + 1.0;
    const Jet ref = self_similar(e, sigma, st.psi.grid);
    return GridFunction(st.psi.grid, detail::ma_eval(st.psi, ref, e.n, false, false).F);
}

// ---------------------------------------------------------------------------------------
// Problem definition and integrator.

/// Reference potentials, boundary data and policy for one run. phi0_at gives the initial
/// unnormalised perturbation at an original-coordinate point (null means zero).
class FlowProblem {
public:
    FlowProblem(const ExpanderProfile& e, Gauge gauge, RegionParams params, BoundaryPolicy policy,
                std::function<double(double)> phi0_at = {})
        : e_(std::make_shared<ExpanderProfile>(e)),
          gauge_(gauge),
          params_(params),
          policy_(policy),
          phi0_at_(std::move(phi0_at)) {
        params_.validate();
    }

    const ExpanderProfile& expander() const { return *e_; }
    Gauge gauge() const { return gauge_; }
    const RegionParams& params() const { return params_; }
    const BoundaryPolicy& policy() const { return policy_; }
    int n() const { return e_->n; }

    /// Reference jet on grid g at gauge time `time`.
    const Jet& reference(const Grid& g, double time) const {
        const double sigma = gauge_ == Gauge::Drift          ? 1.0
                             : gauge_ == Gauge::Unnormalised ? time + params_.s
                                                             : time + 1.0;
        for (auto& c : cache_)
            if (c.sigma == sigma && c.jet.grid.x_min == g.x_min && c.jet.grid.N == g.N) return c.jet;
        Cached c{sigma, sigma == 1.0 ? e_->jet_on(g) : self_similar(*e_, sigma, g)};
        if (cache_.size() >= 4) cache_.erase(cache_.begin());
        cache_.push_back(std::move(c));
        return cache_.back().jet;
    }

    /// Initial perturbation in this gauge on grid g.
    GridFunction initial(const Grid& g) const {
        GridFunction out(g);
        if (!phi0_at_) return out;
        const double s = params_.s;
        for (std::size_t i = 0; i < g.N; ++i) {
            const double x = g.x(i);
            switch (gauge_) {
                case Gauge::Unnormalised: out[i] = phi0_at_(x); break;
                case Gauge::Rescaled: out[i] = phi0_at_(x + std::log(s)) / s; break;
                case Gauge::Drift: out[i] = phi0_at_(x + std::log(s)) / s; break;
            }
        }
        return out;
    }

    FlowState initial_state(const Grid& g) const {
        FlowState st;
        st.gauge = gauge_;
        st.time = 0.0;
        st.psi = initial(g);
        st.params = params_;
        return st;
    }

    /// Unnormalised perturbation at (x, t) if the metric stayed equal to g_0 there:
    /// phi_0(x) + int_0^t log(omega_0^n / omega_E(t'+s)^n)(x) dt'. Far out the glued metric is
    /// nearly conical, so this is the first correction beyond freezing phi.
    double static_metric_phi(double x, double t) const {
        const double s = params_.s;
        const double v0 = phi0_at_ ? phi0_at_(x) : 0.0;
        if (!(t > 0.0)) return v0;
        // derivatives of P_0 = P_{E,s} + phi_0 at x
        double q1 = 0.0, q2 = 0.0;
        if (phi0_at_) {
            const double d = 2e-3;
            const double fm2 = phi0_at_(x - 2 * d), fm1 = phi0_at_(x - d), fp1 = phi0_at_(x + d),
                         fp2 = phi0_at_(x + 2 * d);
            q1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * d);
            q2 = (-fm2 + 16 * fm1 - 30 * v0 + 16 * fp1 - fp2) / (12 * d * d);
        }
        const auto es = e_->eval(x - std::log(s));
        const double a0 = s * es[1] + q1, b0 = s * es[2] + q2;
        if (!(a0 > 0.0 && b0 > 0.0)) throw NonKahler("initial metric degenerate at the outer node");
        const int n = e_->n;
        auto L = [&](double tp) {
            const double sig = tp + s;
            const auto d = e_->eval(x - std::log(sig));
            return (n - 1) * std::log(a0 / (sig * d[1])) + std::log(b0 / (sig * d[2]));
        };
        return v0 + boost::math::quadrature::gauss<double, 20>::integrate(L, 0.0, t);
    }

    /// Outer Dirichlet value at gauge time `time`. Frozen data keep the outer value of the
    /// current run; cone-corrected data follow static_metric_phi at the physical location of
    /// the outer node.
    double outer_value(const Grid& g, double time, double frozen) const {
        if (policy_.outer == BoundaryPolicy::Outer::FrozenDirichlet) return frozen;
        const double s = params_.s, xN = g.x_max;
        switch (gauge_) {
            case Gauge::Unnormalised: return static_metric_phi(xN, time);
            case Gauge::Rescaled: return static_metric_phi(xN + std::log(s), s * time) / s;
            case Gauge::Drift: {
                const double scale = s * std::exp(time);
                return static_metric_phi(xN + std::log(scale), s * std::expm1(time)) / scale;
            }
        }
        return frozen;
    }

    GridFunction rhs(const GridFunction& psi, double time) const {
        return GridFunction(psi.grid,
                            detail::ma_eval(psi, reference(psi.grid, time), n(), gauge_ == Gauge::Drift, false).F);
    }

private:
    struct Cached {
        double sigma;
        Jet jet;
    };
    std::shared_ptr<ExpanderProfile> e_;
    Gauge gauge_;
    RegionParams params_;
    BoundaryPolicy policy_;
    std::function<double(double)> phi0_at_;
    mutable std::vector<Cached> cache_;
};

struct StepInfo {
    int newton_iters = 0;
    double residual = 0.0;
};

/// Implicit trapezoidal step solved by Newton with a sparse LU factorisation.
/// Inner row: regularity or symmetry closure (one-sided stencils). Outer row: Dirichlet.
class Stepper {
public:
    explicit Stepper(const FlowProblem& prob, double newton_tol = 1e-12, int max_newton = 15)
        : prob_(prob), tol_(newton_tol), max_newton_(max_newton) {}

    StepInfo step(FlowState& st, double dt) {
        if (!(dt > 0.0)) throw ParamError("time step must be positive");
        const double horizon = st.horizon1();
        if (st.time + dt > horizon * (1.0 + 1e-12) + 1e-14)
            throw HorizonReached("step would pass the horizon T_s'");
        const Grid& g = st.psi.grid;
        const std::size_t N = g.N;
        const double h = g.h();
        const int n = prob_.n();
        const bool drift = st.gauge == Gauge::Drift;
        const double t0 = st.time, t1 = st.time + dt;

        if (frozen_outer_ != frozen_outer_ || frozen_grid_ != g.x_max) {
            frozen_outer_ = st.psi[N - 1];
            frozen_grid_ = g.x_max;
        }
        detail::MAEval F0;
        try {
            F0 = detail::ma_eval(st.psi, prob_.reference(g, t0), n, drift, false, true);
        } catch (const NonKahler& ex) {
            throw StepRejected(ex.what());
        }
        const Jet& ref1 = prob_.reference(g, t1);
        const double gN = prob_.outer_value(g, t1, frozen_outer_);
        // Regularity: psi' proportional to P_ref'' at the inner node, i.e. psi'' = (log P_ref'')' psi'.
        // Symmetry: psi' = 0.
        const bool regular = prob_.policy().inner == BoundaryPolicy::Inner::Regularity;
        const double L1 = ref1.lb1(0);

        GridFunction u = st.psi;
        u[N - 1] = gN;
        const auto& D1 = DiffOp::get(N, 1);
        const auto& D2 = DiffOp::get(N, 2);
        Eigen::VectorXd G(N);
        StepInfo info;
        bool polished = false;
        for (int it = 0; it <= max_newton_ + 1; ++it) {
            detail::MAEval F1;
            try {
                F1 = detail::ma_eval(u, ref1, n, drift, true, true);
            } catch (const NonKahler& ex) {
                throw StepRejected(ex.what());
            }
            G[0] = D1.at(u.v, 0, h);
            if (regular) G[0] = D2.at(u.v, 0, h) - L1 * G[0];
            for (std::size_t i = 1; i + 1 < N; ++i)
                G[i] = u[i] - st.psi[i] - 0.5 * dt * (F0.F[i] + F1.F[i]);
            G[N - 1] = u[N - 1] - gN;
            double gmax = 0.0;
            for (std::size_t i = 0; i < N; ++i) gmax = std::max(gmax, std::abs(G[i]));
            info.residual = gmax;
            info.newton_iters = it;
            if (gmax == 0.0) break;

            std::vector<Eigen::Triplet<double>> T;
            T.reserve(N * 16);
            {
                const auto& r = D1.row(0);
                const double a = regular ? -L1 : 1.0;
                for (std::size_t k = 0; k < r.w.size(); ++k) T.emplace_back(0, r.start + k, a * r.w[k] / h);
                if (regular) {
                    const auto& r2 = D2.row(0);
                    for (std::size_t k = 0; k < r2.w.size(); ++k)
                        T.emplace_back(0, r2.start + k, r2.w[k] / (h * h));
                }
            }
            for (std::size_t i = 1; i + 1 < N; ++i) {
                const auto& r1 = D1.row(i);
                const auto& r2 = D2.row(i);
                const double a = -0.5 * dt * F1.c1[i] / h, b = -0.5 * dt * F1.c2[i] / (h * h);
                for (std::size_t k = 0; k < r1.w.size(); ++k) T.emplace_back(i, r1.start + k, a * r1.w[k]);
                for (std::size_t k = 0; k < r2.w.size(); ++k) T.emplace_back(i, r2.start + k, b * r2.w[k]);
                T.emplace_back(i, i, 1.0 - 0.5 * dt * F1.c0[i]);
            }
            T.emplace_back(N - 1, N - 1, 1.0);
            Eigen::SparseMatrix<double> J(N, N);
            J.setFromTriplets(T.begin(), T.end());
            J.makeCompressed();
            if (!analyzed_ || analyzed_n_ != N) {
                lu_.analyzePattern(J);
                analyzed_ = true;
                analyzed_n_ = N;
            }
            lu_.factorize(J);
            if (lu_.info() != Eigen::Success) throw StepRejected("Newton matrix is singular");
            const Eigen::VectorXd delta = lu_.solve(G);
            double dmax = 0.0, umax = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                u[i] -= delta[i];
                dmax = std::max(dmax, std::abs(delta[i]));
                umax = std::max(umax, std::abs(u[i]));
            }
            if (!std::isfinite(dmax)) throw StepRejected("Newton diverged");
            if (polished) {
                info.newton_iters = it + 1;
                break;
            }
            // one more iteration after convergence takes psi to round-off, which the
            // curvature monitors need where P'' is small
            if (dmax <= tol_ * (1.0 + umax)) polished = true;
            if (it >= max_newton_) throw StepRejected("Newton did not converge");
        }
        st.psi = u;
        st.time = t1;
        return info;
    }

private:
    const FlowProblem& prob_;
    double tol_;
    int max_newton_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    bool analyzed_ = false;
    std::size_t analyzed_n_ = 0;
    double frozen_outer_ = std::numeric_limits<double>::quiet_NaN();
    double frozen_grid_ = std::numeric_limits<double>::quiet_NaN();
};

/// Single step with a fresh stepper (frozen outer data taken from the current state).
inline FlowState step(const FlowState& st, double dt, const FlowProblem& prob) {
    FlowState out = st;
    Stepper(prob).step(out, dt);
    return out;
}

struct Snapshot {
    double time;
    GridFunction psi;
};

struct RunOptions {
    double dt = 0.01;
    double t_end = 1.0;
    std::vector<double> targets;  // times that steps must land on
    int max_halvings = 12;
    std::size_t store_stride = 1;  // keep every k-th step (targets are always kept)
};

struct RunResult {
    std::vector<Snapshot> snapshots;
    int steps = 0;
    int rejected = 0;
    bool horizon_capped = false;
    double T_detected = std::numeric_limits<double>::quiet_NaN();  // first unrecoverable failure
    std::string stop_reason = "completed";

    /// Snapshot whose time matches t (within 1e-12 relative).
    const Snapshot& at(double t) const {
        for (const auto& sn : snapshots)
            if (std::abs(sn.time - t) <= 1e-12 * std::max(1.0, std::abs(t))) return sn;
        throw MissingArtifacts("no snapshot at requested time");
    }
};

/// Integrates from st to t_end (capped at the horizon), halving dt on rejection.
inline RunResult run_flow(FlowState& st, const FlowProblem& prob, const RunOptions& opt) {
    RunResult res;
    Stepper stepper(prob);
    double t_end = opt.t_end;
    const double hz = st.horizon1();
    if (t_end > hz) {
        t_end = hz;
        res.horizon_capped = true;
    }
    std::vector<double> targets = opt.targets;
    targets.push_back(t_end);
    std::sort(targets.begin(), targets.end());
    res.snapshots.push_back({st.time, st.psi});
    double dt = opt.dt;
    std::size_t ti = 0;
    while (ti < targets.size() && targets[ti] <= st.time) ++ti;
    std::size_t since_store = 0;
    while (ti < targets.size()) {
        const double target = targets[ti];
        const double remaining = target - st.time;
        const bool lands = dt >= remaining * (1.0 - 1e-9);
        const double this_dt = lands ? remaining : dt;
        FlowState trial = st;
        try {
            stepper.step(trial, this_dt);
        } catch (const StepRejected& ex) {
            ++res.rejected;
            dt *= 0.5;
            if (dt < opt.dt * std::ldexp(1.0, -opt.max_halvings)) {
                res.T_detected = st.time;
                res.stop_reason = std::string("unrecoverable: ") + ex.what();
                return res;
            }
            continue;
        }
        if (lands) trial.time = target;  // exact landing
        st = trial;
        ++res.steps;
        ++since_store;
        if (lands) {
            res.snapshots.push_back({st.time, st.psi});
            since_store = 0;
            ++ti;
            while (ti < targets.size() && targets[ti] <= st.time) ++ti;
        } else if (since_store >= opt.store_stride) {
            res.snapshots.push_back({st.time, st.psi});
            since_store = 0;
        }
        dt = std::min(opt.dt, dt * 2.0);
    }
    return res;
}

// ---------------------------------------------------------------------------------------
// Grids.

/// Drift-gauge grid [x_lo, log(lambda)/gamma-adapted + margin] with spacing h.
inline Grid drift_grid(const ConeModel& m, const RegionParams& p, double x_lo, double margin,
                       double h) {
    const double hi = m.x_of_r2(p.lambda) + margin;
    const auto N = static_cast<std::size_t>(std::ceil((hi - x_lo) / h)) + 1;
    return Grid::with_spacing(x_lo, h, N);
}

// ---------------------------------------------------------------------------------------
// Checkpoints: versioned text with hexadecimal floats for bit-exact restart.

inline constexpr int kCheckpointVersion = 1;

namespace detail {
inline std::string hexf(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}
inline double parse_hexf(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ConfigError("bad number in checkpoint: " + s);
    return v;
}
}  // namespace detail

inline void write_checkpoint(const std::string& path, const FlowState& st) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path);
    const auto& g = st.psi.grid;
    out << "kflow-checkpoint " << kCheckpointVersion << "\n";
    out << "gauge " << gauge_name(st.gauge) << "\n";
    out << "time " << detail::hexf(st.time) << "\n";
    out << "s " << detail::hexf(st.params.s) << "\n";
    out << "R2 " << detail::hexf(st.params.R2) << "\n";
    out << "lambda " << detail::hexf(st.params.lambda) << "\n";
    out << "T_s " << detail::hexf(st.params.T_s) << "\n";
    out << "grid " << detail::hexf(g.x_min) << " " << detail::hexf(g.x_max) << " " << g.N << "\n";
    out << "values\n";
    for (double v : st.psi.v) out << detail::hexf(v) << "\n";
}

inline FlowState read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifacts("cannot open checkpoint " + path);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "kflow-checkpoint") throw ConfigError("not a checkpoint file: " + path);
    if (version != kCheckpointVersion)
        throw ConfigError("checkpoint version " + std::to_string(version) + " unsupported");
    FlowState st;
    std::string key, a, b;
    double x0 = 0, x1 = 0;
    std::size_t N = 0;
    while (in >> key) {
        if (key == "values") break;
        if (key == "grid") {
            in >> a >> b >> N;
            x0 = detail::parse_hexf(a);
            x1 = detail::parse_hexf(b);
            continue;
        }
        in >> a;
        if (key == "gauge") st.gauge = gauge_from_name(a);
        else if (key == "time") st.time = detail::parse_hexf(a);
        else if (key == "s") st.params.s = detail::parse_hexf(a);
        else if (key == "R2") st.params.R2 = detail::parse_hexf(a);
        else if (key == "lambda") st.params.lambda = detail::parse_hexf(a);
        else if (key == "T_s") st.params.T_s = detail::parse_hexf(a);
        else throw ConfigError("unknown checkpoint key " + key);
    }
    const Grid g(x0, x1, N);
    std::vector<double> v(N);
    for (std::size_t i = 0; i < N; ++i) {
        if (!(in >> a)) throw ConfigError("truncated checkpoint " + path);
        v[i] = detail::parse_hexf(a);
    }
    st.psi = GridFunction(g, std::move(v));
    return st;
}

}  // namespace kflow
