#include "hbflow/cases.hpp"
#include "hbflow/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hbflow;
namespace oracle = hbflow::testing;

TEST_CASE("case parser: defaults, overrides and validation") {
    const std::string text = R"(
[mesh]
kind = tube
radius = 0.25
length = 2.0
h = 0.05

[fluid]
rho = 1.06
mu = 0.04

[spectral]
period = 0.8
time_points = 13

[inflow]
kind = smooth-svc
mean_flow = 2.5

[outlets]
pressure_mmhg = 7.5
backflow_beta = 0.2

[solver-hb]
pseudo_dt = auto
gmres_tol = 0.03
)";
    const CaseDefinition def = parse_case(text);
    CHECK(def.tube_radius == 0.25);
    CHECK(def.modes == 7);  // N = 13
    CHECK(def.period == 0.8);
    CHECK(def.pseudo_dt == 0.0);
    CHECK(def.outlet_pressure_mmhg == 7.5);
    CHECK(def.mean_flow == 2.5);

    SUBCASE("even time-point counts are rejected with the odd-N rule") {
        const std::string bad = "[spectral]\ntime_points = 8\n";
        try {
            parse_case(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("odd") != std::string::npos);
        }
    }
    SUBCASE("malformed numbers carry line numbers") {
        const std::string bad = "[fluid]\nrho = abc\n";
        try {
            parse_case(bad, "case.txt");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("case.txt:2") != std::string::npos);
        }
    }
}

TEST_CASE("synthetic inflow: spectral characters of the three families") {
    SUBCASE("cerebral-like signal has exactly ten harmonics: exact at N = 19") {
        const auto dense = synthetic_inflow(InflowKind::MultiHarmonicCerebral);
        CHECK(truncation_error(dense, SpectralBasis(10, 1.0)) < 1e-12);
        CHECK(truncation_error(dense, SpectralBasis(13, 1.0)) < 1e-12);
        // and strictly positive content at mode 9
        CHECK(truncation_error(dense, SpectralBasis(9, 1.0)) > 1e-6);
    }
    SUBCASE("smooth profile is captured within 1% at N = 7") {
        const auto dense = synthetic_inflow(InflowKind::SmoothSvc);
        const double err = truncation_error(dense, SpectralBasis(4, 1.0));
        CHECK(err < 0.01);
        CHECK(err > 1e-6);  // a genuine tail is present
        // against the dense-DFT oracle
        const auto sig = truncate_signal(dense, SpectralBasis(4, 1.0));
        const auto ref = oracle::oracle_truncate(dense, 4, 1.0);
        for (int n = 0; n < 7; ++n)
            CHECK(sig.values[size_t(n)] == doctest::Approx(ref[size_t(n)]).epsilon(1e-10));
    }
    SUBCASE("kinked profile truncation decreases strictly over N in {13,19,25}") {
        const auto dense = synthetic_inflow(InflowKind::KinkedCoronary);
        const double e13 = truncation_error(dense, SpectralBasis(7, 1.0));
        const double e19 = truncation_error(dense, SpectralBasis(10, 1.0));
        const double e25 = truncation_error(dense, SpectralBasis(13, 1.0));
        MESSAGE("kinked truncation: N=13 ", e13, "  N=19 ", e19, "  N=25 ", e25);
        CHECK(e13 > e19);
        CHECK(e19 > e25);
        CHECK(e25 > 1e-4);
        // positive flow and unit mean
        double mean = 0.0, lo = 1e9;
        for (double v : dense) {
            mean += v;
            lo = std::min(lo, v);
        }
        CHECK(mean / double(dense.size()) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(lo > 0.0);
    }
}

TEST_CASE("womersley velocity: steady limit, no-slip, low-frequency asymptotics") {
    FluidProperties props{1.0, 1.0};  // nu = 1

    SUBCASE("zero oscillatory harmonics reduce to steady Poiseuille") {
        WomersleyFlow flow;
        flow.radius = 0.5;
        flow.omega = 2.0;
        flow.g0 = 8.0;
        for (double r : {0.0, 0.2, 0.5})
            for (double t : {0.0, 0.3})
                CHECK(womersley_velocity(flow, r, t, props) ==
                      doctest::Approx(flow.g0 * (0.25 - r * r) / 4.0).epsilon(1e-14));
    }
    SUBCASE("no-slip at the wall for all times") {
        WomersleyFlow flow;
        flow.radius = 0.5;
        flow.omega = 36.0;
        flow.g0 = 10.0;
        flow.harmonics = {{6.0, 2.0}, {1.0, -0.5}};
        for (double t : {0.0, 0.05, 0.11})
            CHECK(std::abs(womersley_velocity(flow, flow.radius, t, props)) < 1e-12);
    }
    SUBCASE("quasi-steady within 1% for alpha <= 0.3, improving quadratically") {
        auto max_quasi_steady_error = [&](double alpha) {
            WomersleyFlow flow;
            flow.radius = 1.0;
            flow.omega = alpha * alpha * props.nu();  // alpha = R sqrt(omega/nu)
            flow.g0 = 1.0;
            flow.harmonics = {{1.0, 0.0}};
            const double T = 2.0 * std::numbers::pi / flow.omega;
            double worst = 0.0, peak = 0.0;
            for (int ir = 0; ir <= 10; ++ir)
                for (int it = 0; it < 16; ++it) {
                    const double r = flow.radius * ir / 10.0;
                    const double t = T * it / 16.0;
                    const double u = womersley_velocity(flow, r, t, props);
                    const double g_inst = flow.g0 + std::cos(flow.omega * t);
                    const double uqs = g_inst * (1.0 - r * r) / (4.0 * props.mu);
                    worst = std::max(worst, std::abs(u - uqs));
                    peak = std::max(peak, std::abs(u));
                }
            return worst / peak;
        };
        const double e03 = max_quasi_steady_error(0.3);
        const double e015 = max_quasi_steady_error(0.15);
        CHECK(e03 < 0.01);
        CHECK(e015 < e03 / 3.0);  // roughly alpha^2 behavior
    }
}

TEST_CASE("relative error functional: metric properties and brute-force check") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const int nn = 17, N = 5;
    std::vector<double> w(static_cast<size_t>(nn));
    std::vector<double> a(size_t(nn) * 3 * size_t(N)), b(a.size());
    for (auto& v : w)
        v = 0.5 + 0.5 * std::abs(dist(rng));
    for (auto& v : a)
        v = dist(rng);
    for (auto& v : b)
        v = dist(rng);

    SUBCASE("identical fields give exactly zero") {
        CHECK(relative_error_fields(a, a, w, 3, N) == 0.0);
    }
    SUBCASE("doubling the field gives exactly one") {
        std::vector<double> twice(a.size());
        for (size_t k = 0; k < a.size(); ++k)
            twice[k] = 2.0 * a[k];
        CHECK(relative_error_fields(twice, a, w, 3, N) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("matches an independent direct summation") {
        double num = 0.0, den = 0.0;
        for (int node = 0; node < nn; ++node)
            for (int n = 0; n < N; ++n) {
                double d2 = 0.0, r2 = 0.0;
                for (int i = 0; i < 3; ++i) {
                    const size_t at = size_t((node * 3 + i) * N + n);
                    d2 += (a[at] - b[at]) * (a[at] - b[at]);
                    r2 += b[at] * b[at];
                }
                num += w[size_t(node)] * std::sqrt(d2);
                den += w[size_t(node)] * std::sqrt(r2);
            }
        CHECK(relative_error_fields(a, b, w, 3, N) == doctest::Approx(num / den).epsilon(1e-14));
    }
    SUBCASE("zero reference is an error") {
        std::vector<double> zero(a.size(), 0.0);
        CHECK_THROWS_AS(relative_error_fields(a, zero, w, 3, N), ParseError);
        std::vector<double> sa(5, 1.0), sz(5, 0.0);
        CHECK_THROWS_AS(relative_error_signal(sa, sz), ParseError);
        CHECK(relative_error_signal(sa, sa) == 0.0);
    }
}

TEST_CASE("patch flow rate: plug flow gives area, zero field gives zero") {
    const Mesh m = generate_tube(0.5, 1.0, 0.2);
    const auto* outlet = m.find_patch("outlet");
    REQUIRE(outlet != nullptr);
    SpectralBasis b(3, 1.0);
    HarmonicState st(b, m.num_nodes());
    // uniform u.n = 1 on the outlet plane (normal +z)
    for (int a = 0; a < m.num_nodes(); ++a)
        for (int n = 0; n < b.time_points; ++n)
            st.u(a, 2)[size_t(n)] = 1.0;
    const auto q = patch_flow_series(m, *outlet, st);
    for (double v : q)
        CHECK(v == doctest::Approx(outlet->area).epsilon(1e-13));

    HarmonicState zero(b, m.num_nodes());
    for (double v : patch_flow_series(m, *outlet, zero))
        CHECK(v == 0.0);
}

TEST_CASE("build_case: inflow-to-Dirichlet mapping conserves the flow rate") {
    CaseDefinition def;
    def.mesh_kind = "tube";
    def.tube_radius = 0.3;
    def.tube_length = 1.0;
    def.mesh_h = 0.075;
    def.period = 0.8;
    def.modes = 4;
    def.inflow_kind = InflowKind::SmoothSvc;
    def.mean_flow = 2.0;
    const CaseInputs in = build_case(def);

    const auto& inlet = in.mesh.patches[size_t(in.inlet_patch)];
    const int N = in.basis.time_points;
    const PeriodicSignal q = truncate_signal(in.inflow_dense, in.basis);
    // flow through the inlet of the installed g equals the truncated signal
    std::vector<double> u(size_t(in.mesh.num_nodes()) * 3);
    for (int n = 0; n < N; ++n) {
        for (int a = 0; a < in.mesh.num_nodes(); ++a)
            for (int i = 0; i < 3; ++i)
                u[size_t(a * 3 + i)] = in.bcs.dirichlet_g[size_t((a * 3 + i) * N + n)];
        const double flux = patch_flow_instant(in.mesh, inlet, u);
        // inward flow: the outward-normal flux is -Q_n
        CHECK(std::abs(-flux - q.values[size_t(n)]) <= 0.01 * std::abs(q.values[size_t(n)]));
        CHECK(-flux == doctest::Approx(q.values[size_t(n)]).epsilon(1e-10));
    }

    SUBCASE("wall nodes stay pinned to zero") {
        for (int a : in.mesh.dirichlet_nodes) {
            bool on_wall = false;
            for (const auto& f : in.mesh.find_patch("wall")->facets)
                for (int v = 0; v < 3; ++v)
                    if (f[size_t(v)] == a)
                        on_wall = true;
            if (!on_wall)
                continue;
            for (int i = 0; i < 3; ++i)
                for (int n = 0; n < N; ++n)
                    CHECK(in.bcs.dirichlet_g[size_t((a * 3 + i) * N + n)] == 0.0);
        }
    }
    SUBCASE("outlet traction encodes the prescribed pressure") {
        CaseDefinition d2 = def;
        d2.outlet_pressure_mmhg = 7.5;
        const CaseInputs in2 = build_case(d2);
        REQUIRE(in2.bcs.neumann.size() == 1);
        for (double h : in2.bcs.neumann[0].h)
            CHECK(h == doctest::Approx(-7.5 * kDynPerMmHg).epsilon(1e-14));
    }
    SUBCASE("rebuild_spectral changes only the spectral content") {
        CaseInputs in2 = build_case(def);
        rebuild_spectral(in2, 7);
        CHECK(in2.basis.time_points == 13);
        CHECK(in2.inlet_truncation < in.inlet_truncation);
        CHECK(in2.bcs.dirichlet_g.size() ==
              size_t(in2.mesh.num_nodes()) * 3 * 13);
    }
}
