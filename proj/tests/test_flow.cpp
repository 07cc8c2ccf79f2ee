#include <gtest/gtest.h>

#include <filesystem>

#include <kflow/flow.hpp>
#include <kflow/gluing.hpp>

using namespace kflow;
namespace fs = std::filesystem;

namespace {

const ExpanderProfile& gaussian() {
    static const ExpanderProfile e = solve_expander(ConeModel::flat_quotient(2, 1), Grid(-10.0, 8.0, 721));
    return e;
}

const ExpanderProfile& baseline() {
    static const ExpanderProfile e = solve_expander(ConeModel::flat_quotient(2, 3), Grid(-6.0, 8.0, 561));
    return e;
}

double bump(double x) { return 0.02 * std::exp(-(x + 1) * (x + 1)); }

fs::path tmp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "kflow_test_flow";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Gauges, TimeConversionsRoundTrip) {
    const double s = 1e-3;
    for (Gauge g : {Gauge::Unnormalised, Gauge::Rescaled, Gauge::Drift})
        for (double tau : {0.0, 0.3, 2.5}) EXPECT_NEAR(drift_time(g, gauge_time(g, tau, s), s), tau, 1e-14);
    EXPECT_NEAR(gauge_time(Gauge::Unnormalised, std::log(11.0), s), 10 * s, 1e-15);
    EXPECT_EQ(gauge_from_name("drift"), Gauge::Drift);
    EXPECT_THROW(gauge_from_name("other"), ParamError);
}

TEST(Gauges, RegionParamsValidate) {
    EXPECT_THROW((RegionParams{1e-2, 0.3, 5.0}.validate()), ParamError);   // R^2 <= 4 sqrt(s)
    EXPECT_THROW((RegionParams{1e-2, 1.0, 20.0}.validate()), ParamError);  // lambda > 1/sqrt(s)
    EXPECT_NO_THROW((RegionParams{1e-3, 1.0, 10.0}.validate()));
    const RegionParams p{1e-3, 1.0, 10.0};
    EXPECT_NEAR(p.horizon1(), std::log1p(100.0), 1e-14);
    EXPECT_LT(p.horizon2(), p.horizon1());
}

// Every composition of gauge maps that returns to the start is the identity.
TEST(Gauges, TransportRoundTripIsIdentity) {
    const RegionParams p{0.1, 2.0, 3.0};
    const FlowProblem prob(gaussian(), Gauge::Drift, p, {}, bump);
    FlowState st = prob.initial_state(Grid::with_spacing(-5.0, 0.05, 201));
    st.time = 0.7;
    const Gauge order[3] = {Gauge::Unnormalised, Gauge::Rescaled, Gauge::Drift};
    for (Gauge a : order)
        for (Gauge b : order) {
            const FlowState back = transport(transport(transport(st, a), b), Gauge::Drift);
            EXPECT_LT(sup_abs(back.psi - st.psi), 1e-12);
            EXPECT_NEAR(back.psi.grid.x_min, st.psi.grid.x_min, 1e-12);
            EXPECT_NEAR(back.time, st.time, 1e-12);
        }
}

TEST(Gauges, InitialDataConsistentAcrossGauges) {
    const RegionParams p{0.1, 2.0, 3.0};
    const Grid gu = Grid::with_spacing(-6.0, 0.05, 201);
    const FlowProblem pu(gaussian(), Gauge::Unnormalised, p, {}, bump);
    const FlowProblem pd(gaussian(), Gauge::Drift, p, {}, bump);
    const FlowState a = transport(pu.initial_state(gu), Gauge::Drift);
    const FlowState b = pd.initial_state(gu.shifted(-std::log(p.s)));
    EXPECT_LT(sup_abs(a.psi - b.psi), 1e-15);
}

TEST(Flow, GaussianFixedPointPreserved) {
    const RegionParams p{1e-3, 1.0, 10.0};
    const FlowProblem prob(gaussian(), Gauge::Drift, p, {});
    FlowState st = prob.initial_state(drift_grid(gaussian().cone, p, -4.0, 4.0, 0.05));
    Stepper S(prob);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        S.step(st, 0.004);
        worst = std::max(worst, sup_abs(st.psi));
    }
    EXPECT_LT(worst, 1e-12);
    EXPECT_NEAR(st.time, 4.0, 1e-9);
}

TEST(Flow, RunLandsOnTargetsAndCapsAtHorizon) {
    const RegionParams p{1e-3, 1.0, 10.0};
    const auto d = glue_initial(baseline(), {}, p.s, gluing_grid(baseline().cone, {}, p.s, -2.0, 0.025));
    const FlowProblem prob(baseline(), Gauge::Drift, p, {}, d.phi0_at);
    FlowState st = prob.initial_state(drift_grid(baseline().cone, p, -2.0, 4.0, 0.05));
    RunOptions o;
    o.dt = 0.05;
    o.t_end = 100.0;
    o.targets = {0.123, 0.5};
    o.store_stride = 1000;
    const RunResult r = run_flow(st, prob, o);
    EXPECT_TRUE(r.horizon_capped);
    EXPECT_EQ(r.stop_reason, "completed");
    EXPECT_EQ(r.at(0.123).time, 0.123);
    EXPECT_EQ(r.snapshots.back().time, p.horizon1());
    EXPECT_THROW(r.at(0.2), MissingArtifacts);
    EXPECT_TRUE(st.psi.finite());
}

TEST(Flow, OuterBoundaryMatchesInitialDataAtTimeZero) {
    const RegionParams p{0.1, 2.0, 3.0};
    const Grid g = Grid::with_spacing(-5.0, 0.05, 201);
    for (Gauge ga : {Gauge::Unnormalised, Gauge::Rescaled, Gauge::Drift}) {
        const FlowProblem prob(gaussian(), ga, p, {}, bump);
        const Grid gg = ga == Gauge::Unnormalised ? g : g.shifted(-std::log(p.s));
        const GridFunction init = prob.initial(gg);
        EXPECT_NEAR(prob.outer_value(gg, 0.0, 0.0), init[gg.N - 1], 1e-14);
    }
}

// Unnormalised and drift evolutions of the same data agree after transport, and the defect
// shrinks at second order in the step.
TEST(Flow, CrossGaugeCommutesAtSecondOrder) {
    const RegionParams p{0.1, 2.0, 3.0};
    const FlowProblem pu(gaussian(), Gauge::Unnormalised, p, {}, bump);
    const FlowProblem pd(gaussian(), Gauge::Drift, p, {}, bump);
    const Grid gu = Grid::with_spacing(-8.0, 0.05, 321);
    const double T = 0.05, tauT = std::log1p(T / p.s);
    const Grid gc(-5.0, 8.0, 261);
    std::vector<double> D;
    for (int m : {4, 8, 16}) {
        FlowState su = pu.initial_state(gu), sd = pd.initial_state(gu.shifted(-std::log(p.s)));
        Stepper Su(pu), Sd(pd);
        for (int i = 0; i < m; ++i) Su.step(su, T / m);
        for (int i = 0; i < m; ++i) Sd.step(sd, tauT / m);
        const FlowState tu = transport(su, Gauge::Drift);
        D.push_back(sup_abs(resample(sd.psi, gc) - resample(tu.psi, gc)));
    }
    EXPECT_GT(std::log2(D[0] / D[1]), 1.9);
    EXPECT_GT(std::log2(D[1] / D[2]), 1.9);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const RegionParams p{1e-3, 1.0, 10.0};
    const auto d = glue_initial(baseline(), {}, p.s, gluing_grid(baseline().cone, {}, p.s, -2.0, 0.025));
    const FlowProblem prob(baseline(), Gauge::Drift, p, {}, d.phi0_at);
    FlowState st = prob.initial_state(drift_grid(baseline().cone, p, -2.0, 4.0, 0.05));
    Stepper(prob).step(st, 0.0137);
    const auto path = tmp_path("a.ckpt").string();
    write_checkpoint(path, st);
    const FlowState back = read_checkpoint(path);
    EXPECT_EQ(back.gauge, st.gauge);
    EXPECT_EQ(back.time, st.time);
    EXPECT_EQ(back.params.s, st.params.s);
    EXPECT_EQ(back.params.T_s, st.params.T_s);
    EXPECT_EQ(back.psi.grid.x_min, st.psi.grid.x_min);
    EXPECT_EQ(back.psi.grid.N, st.psi.grid.N);
    EXPECT_EQ(back.psi.v, st.psi.v);

    // restart from disk continues bit-identically
    FlowState a = st, b = back;
    Stepper(prob).step(a, 0.01);
    Stepper(prob).step(b, 0.01);
    EXPECT_EQ(a.psi.v, b.psi.v);
}

TEST(Checkpoint, RejectsForeignAndFutureFiles) {
    const auto p1 = tmp_path("bad1.ckpt"), p2 = tmp_path("bad2.ckpt");
    std::ofstream(p1) << "something else\n";
    std::ofstream(p2) << "kflow-checkpoint 99\n";
    EXPECT_THROW(read_checkpoint(p1.string()), ConfigError);
    EXPECT_THROW(read_checkpoint(p2.string()), ConfigError);
    EXPECT_THROW(read_checkpoint(tmp_path("missing.ckpt").string()), MissingArtifacts);
}

TEST(Grids, DriftGridCoversBoundaryLevel) {
    const RegionParams p{1e-3, 1.0, 10.0};
    const auto m = ConeModel::flat_quotient(2, 3);
    const Grid g = drift_grid(m, p, -2.0, 4.0, 0.025);
    EXPECT_DOUBLE_EQ(g.h(), 0.025);
    EXPECT_GE(g.x_max, m.x_of_r2(p.lambda) + 4.0 - 1e-12);
    EXPECT_LT(g.x_max, m.x_of_r2(p.lambda) + 4.0 + 0.025);
}
