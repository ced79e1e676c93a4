#include "hbflow/cases.hpp"
#include "hbflow/errors.hpp"
#include "hbflow/hb_solver.hpp"
#include "hbflow/time_solver.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace hbflow;
namespace oracle = hbflow::testing;

namespace {

// Poiseuille-exact boundary data: womersley inflow with a steady gradient
// only, so both solvers see the same analytic inlet profile.
CaseDefinition steady_pipe_case() {
    CaseDefinition def;
    def.mesh_kind = "tube";
    def.tube_radius = 0.3;
    def.tube_length = 0.6;
    def.mesh_h = 0.12;
    def.rho = 1.06;
    def.mu = 0.04;
    def.period = 0.5;
    def.modes = 1;
    def.inflow_kind = InflowKind::Womersley;
    def.womersley_g0 = 8.9;  // centerline ~5 cm/s
    def.outlet_pressure_mmhg = 0.0;
    return def;
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
        den += b[k] * b[k];
    }
    return std::sqrt(num) / std::sqrt(den);
}

} // namespace

TEST_CASE("solve_time: zero forcing stays identically zero") {
    CaseDefinition def = steady_pipe_case();
    def.womersley_g0 = 0.0;
    const CaseInputs in = build_case(def);
    TimeSolverConfig cfg = TimeSolverConfig::from_case(def);
    cfg.cycles = 1;
    cfg.steps_per_cycle = 50;
    const auto sol = solve_time(in, cfg);
    for (double v : sol.cycle.u)
        CHECK(v == 0.0);
    for (double v : sol.cycle.p)
        CHECK(v == 0.0);
    CHECK(sol.total_steps == 50);
}

TEST_CASE("shared-discretization anchor: steady mode equals the N = 1 harmonic solve") {
    const CaseDefinition def = steady_pipe_case();
    const CaseInputs in = build_case(def);

    auto geoms = precompute_geometry(in.mesh);
    SolverConfig hb = SolverConfig::from_case(def);
    hb.newton_tol_orders = 7.0;
    hb.max_newton_iters = 200;
    hb.krylov.tolerance = 1e-6;
    const auto hbsol = solve_harmonic(in.mesh, geoms, in.basis, in.props, in.bcs, hb);
    REQUIRE(hbsol.log.converged);

    TimeSolverConfig tc = TimeSolverConfig::from_case(def);
    tc.steady = true;
    tc.newton_tol_orders = 7.0;
    tc.max_newton_iters = 200;
    tc.krylov.tolerance = 1e-6;
    const auto tsol = solve_time(in, tc);

    const auto hu = state_velocity(hbsol.state);
    CHECK(rel_l2(tsol.cycle.u, hu) < 1e-5);
    const auto hp = state_pressure(hbsol.state);
    CHECK(rel_l2(tsol.cycle.p, hp) < 1e-4);
}

TEST_CASE("solve_time: steady inflow settles onto the harmonic steady solution") {
    const CaseDefinition def = steady_pipe_case();
    const CaseInputs in = build_case(def);

    const auto hbsol = solve_harmonic(in);
    REQUIRE(hbsol.log.converged);

    TimeSolverConfig tc = TimeSolverConfig::from_case(def);
    tc.cycles = 3;
    tc.steps_per_cycle = 100;
    const auto tsol = solve_time(in, tc);
    CHECK(tsol.cycle_change < 0.01);

    const auto hu = state_velocity(hbsol.state);
    // compare the final snapshot against the steady harmonic field
    CHECK(rel_l2(tsol.cycle.u_at(tsol.cycle.steps), hu) < 0.02);
}

TEST_CASE("solve_time: pulsatile tube reaches cycle-to-cycle periodicity under 1%") {
    CaseDefinition def = steady_pipe_case();
    def.inflow_kind = InflowKind::SmoothSvc;
    def.mean_flow = 1.0;
    def.period = 0.5;
    const CaseInputs in = build_case(def);
    TimeSolverConfig tc = TimeSolverConfig::from_case(def);
    tc.cycles = 4;
    tc.steps_per_cycle = 100;
    const auto sol = solve_time(in, tc);
    MESSAGE("cycle change: ", sol.cycle_change);
    CHECK(sol.cycle_change < 0.01);
}

TEST_CASE("sample_cycle: stored steps, constants, linear fields and range errors") {
    CycleHistory cyc;
    cyc.period = 2.0;
    cyc.steps = 4;
    cyc.num_nodes = 2;
    cyc.u.resize(5 * 2 * 3);
    cyc.p.resize(5 * 2);
    for (int j = 0; j <= 4; ++j)
        for (int a = 0; a < 2; ++a) {
            for (int i = 0; i < 3; ++i)
                cyc.u[size_t((j * 2 + a) * 3 + i)] = 10.0 * j + a + 0.1 * i;  // linear in t
            cyc.p[size_t(j * 2 + a)] = 3.0;  // constant
        }

    std::vector<double> u(6), p(2);
    SUBCASE("exact at stored step times") {
        sample_cycle(cyc, 1.0, u, p);  // step 2
        CHECK(u[0] == doctest::Approx(20.0).epsilon(1e-14));
        CHECK(u[5] == doctest::Approx(21.2).epsilon(1e-13));
    }
    SUBCASE("linear-in-time fields interpolate exactly, constants stay constant") {
        sample_cycle(cyc, 0.75, u, p);  // j = 1.5
        CHECK(u[0] == doctest::Approx(15.0).epsilon(1e-13));
        CHECK(p[0] == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(p[1] == doctest::Approx(3.0).epsilon(1e-14));
    }
    SUBCASE("outside the covered period is a range error") {
        CHECK_THROWS_AS(sample_cycle(cyc, 2.5, u, p), std::out_of_range);
        CHECK_THROWS_AS(sample_cycle(cyc, -0.1, u, p), std::out_of_range);
    }
}

TEST_CASE("solve_time: halving the step shows second-order behavior (order >= 1.7)") {
    CaseDefinition def = steady_pipe_case();
    def.inflow_kind = InflowKind::SmoothSvc;
    def.mean_flow = 0.6;
    def.period = 0.5;
    def.mesh_h = 0.15;
    def.tube_length = 0.45;
    const CaseInputs in = build_case(def);

    SpectralBasis grid(5, def.period);  // common comparison grid
    std::vector<SampledFields> runs;
    for (int steps : {64, 128, 256}) {
        TimeSolverConfig tc = TimeSolverConfig::from_case(def);
        tc.cycles = 4;
        tc.steps_per_cycle = steps;
        tc.newton_tol_orders = 5.0;
        tc.max_newton_iters = 20;
        tc.krylov.tolerance = 1e-5;
        const auto sol = solve_time(in, tc);
        runs.push_back(sample_cycle(sol.cycle, grid));
    }
    const double e1 = oracle::l2_diff(runs[0].u, runs[1].u);
    const double e2 = oracle::l2_diff(runs[1].u, runs[2].u);
    const double order = std::log2(e1 / e2);
    MESSAGE("temporal order estimate: ", order, " (e1 ", e1, ", e2 ", e2, ")");
    CHECK(order >= 1.7);
}
