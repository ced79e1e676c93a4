#include "hbflow/errors.hpp"
#include "hbflow/spectral.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hbflow;
using hbflow::testing::oracle_h_dense;
using hbflow::testing::oracle_truncate;

namespace {

std::vector<double> sample_dense(int count, double period, double (*f)(double, double)) {
    std::vector<double> out(static_cast<size_t>(count));
    for (int s = 0; s < count; ++s)
        out[size_t(s)] = f(period * double(s) / double(count), period);
    return out;
}

} // namespace

TEST_CASE("basis: N = 2M-1, odd-N enforcement, omega*T = 2pi") {
    SpectralBasis b(4, 0.8);
    CHECK(b.time_points == 7);
    CHECK(b.omega * b.period == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-15));
    CHECK_NOTHROW(SpectralBasis::from_time_points(13, 1.0));
    CHECK_THROWS_AS(SpectralBasis::from_time_points(8, 1.0), ParseError);
    CHECK_THROWS_AS(SpectralBasis(0, 1.0), ParseError);
}

TEST_CASE("truncate_signal: constant signal is reproduced for any M") {
    for (int M : {1, 2, 5}) {
        SpectralBasis b(M, 2.0);
        std::vector<double> dense(200, 3.25);
        const auto sig = truncate_signal(dense, b);
        for (double v : sig.values)
            CHECK(v == doctest::Approx(3.25).epsilon(1e-13));
    }
}

TEST_CASE("truncate_signal: in-band sine is exact (M = 2, N = 3)") {
    SpectralBasis b(2, 1.0);
    auto dense = sample_dense(500, 1.0,
                              [](double t, double T) { return std::sin(2.0 * std::numbers::pi * t / T); });
    const auto sig = truncate_signal(dense, b);
    CHECK(truncation_error(dense, b) < 1e-12);
    for (double t : {0.0, 0.1, 0.37, 0.8}) {
        CHECK(sig.reconstruct(t) ==
              doctest::Approx(std::sin(2.0 * std::numbers::pi * t)).epsilon(1e-11));
    }
}

TEST_CASE("truncate_signal: square pulse matches the dense-DFT oracle, error decreases in M") {
    std::vector<double> dense(1000);
    for (int s = 0; s < 1000; ++s)
        dense[size_t(s)] = (s < 300) ? 1.0 : 0.0;

    double prev = 2.0;
    for (int M : {4, 7, 10}) {
        SpectralBasis b(M, 1.0);
        const auto sig = truncate_signal(dense, b);
        const auto ref = oracle_truncate(dense, M, 1.0);
        for (int n = 0; n < b.time_points; ++n)
            CHECK(sig.values[size_t(n)] == doctest::Approx(ref[size_t(n)]).epsilon(1e-10));
        const double err = truncation_error(dense, b);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("truncate_signal: too few samples is an error") {
    SpectralBasis b(5, 1.0);
    std::vector<double> dense(5, 1.0);
    CHECK_THROWS_AS(truncate_signal(dense, b), ParseError);
}

TEST_CASE("reconstruct: interpolation property at the sample times") {
    SpectralBasis b(4, 0.7);
    PeriodicSignal sig;
    sig.basis = b;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    sig.values.resize(size_t(b.time_points));
    for (auto& v : sig.values)
        v = dist(rng);
    for (int n = 0; n < b.time_points; ++n)
        CHECK(sig.reconstruct(b.sample_time(n)) == doctest::Approx(sig.values[size_t(n)]).epsilon(1e-12));
}

TEST_CASE("reconstruct: sine at T/8 gives sin(pi/4)") {
    SpectralBasis b(2, 1.0);
    PeriodicSignal sig;
    sig.basis = b;
    sig.values.resize(3);
    for (int n = 0; n < 3; ++n)
        sig.values[size_t(n)] = std::sin(b.omega * b.sample_time(n));
    CHECK(sig.reconstruct(1.0 / 8.0) == doctest::Approx(std::sin(std::numbers::pi / 4.0)).epsilon(1e-12));
}

TEST_CASE("apply_H: derivative identities and dense oracle") {
    SUBCASE("constant vector is annihilated") {
        SpectralBasis b(5, 1.3);
        SpectralOperators ops(b);
        std::vector<double> v(size_t(b.time_points), 4.2);
        for (double x : ops.apply(v))
            CHECK(std::abs(x) < 1e-12 * b.omega);
    }
    SUBCASE("in-band sine differentiates to the cosine") {
        for (int N : {3, 5, 9, 25}) {
            const double T = 0.6979;
            SpectralBasis b = SpectralBasis::from_time_points(N, T);
            SpectralOperators ops(b);
            std::vector<double> v(static_cast<size_t>(N));
            for (int n = 0; n < N; ++n)
                v[size_t(n)] = std::sin(b.omega * b.sample_time(n));
            const auto d = ops.apply(v);
            for (int n = 0; n < N; ++n)
                CHECK(d[size_t(n)] ==
                      doctest::Approx(b.omega * std::cos(b.omega * b.sample_time(n))).epsilon(1e-10));
        }
    }
    SUBCASE("random vector matches dense complex triple product, N = 7") {
        SpectralBasis b(4, 2.0);
        SpectralOperators ops(b);
        const auto H = oracle_h_dense(4, 2.0);
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<double> v(7);
        for (auto& x : v)
            x = dist(rng);
        const auto got = ops.apply(v);
        for (int n = 0; n < 7; ++n) {
            double ref = 0.0;
            for (int m = 0; m < 7; ++m)
                ref += H[size_t(n * 7 + m)] * v[size_t(m)];
            CHECK(got[size_t(n)] == doctest::Approx(ref).epsilon(1e-11));
        }
    }
    SUBCASE("length mismatch is rejected") {
        SpectralBasis b(3, 1.0);
        SpectralOperators ops(b);
        std::vector<double> bad(4, 0.0);
        std::vector<double> out(5, 0.0);
        auto ws = ops.make_workspace();
        CHECK_THROWS_AS(ops.apply(bad, out, *ws), std::invalid_argument);
    }
}

TEST_CASE("H dense: steady 1x1 zero, exact skew symmetry, zero diagonal") {
    SUBCASE("N = 1 gives the 1x1 zero matrix") {
        SpectralBasis b(1, 1.0);
        SpectralOperators ops(b);
        const auto H = ops.dense();
        REQUIRE(H.size() == 1);
        CHECK(H[0] == 0.0);
    }
    SUBCASE("H + H^T = 0 and diag(H) = 0") {
        for (int M : {2, 3, 7}) {
            SpectralBasis b(M, 0.8);
            SpectralOperators ops(b);
            const int N = b.time_points;
            const auto H = ops.dense();
            for (int i = 0; i < N; ++i) {
                CHECK(std::abs(H[size_t(i * N + i)]) < 1e-13 * b.omega);
                for (int j = 0; j < N; ++j)
                    CHECK(std::abs(H[size_t(i * N + j)] + H[size_t(j * N + i)]) < 1e-12 * b.omega);
            }
        }
    }
    SUBCASE("N = 3, omega = 1: entrywise match with the complex brute force") {
        const double T = 2.0 * std::numbers::pi;  // omega = 1
        SpectralBasis b(2, T);
        SpectralOperators ops(b);
        const auto H = ops.dense();
        const auto ref = oracle_h_dense(2, T);
        for (size_t i = 0; i < H.size(); ++i)
            CHECK(H[i] == doctest::Approx(ref[i]).epsilon(1e-13));
    }
}

TEST_CASE("truncation_error: in-band zero, out-of-band unity") {
    SpectralBasis b(3, 1.0);
    auto inband = sample_dense(600, 1.0, [](double t, double T) {
        return 1.0 + std::cos(2.0 * std::numbers::pi * t / T) -
               0.5 * std::sin(4.0 * std::numbers::pi * t / T);
    });
    CHECK(truncation_error(inband, b) < 1e-12);

    // sin(M omega t) lies entirely outside the band |m| < M
    auto outband = sample_dense(600, 1.0, [](double t, double T) {
        return std::sin(3.0 * 2.0 * std::numbers::pi * t / T);
    });
    CHECK(truncation_error(outband, b) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> zeros(100, 0.0);
    CHECK_THROWS_AS(truncation_error(zeros, b), ParseError);
}

TEST_CASE("truncation_error: piecewise-linear profile is non-increasing in M") {
    // coronary-like two-phase shape with slope discontinuities
    std::vector<double> dense(2000);
    for (int s = 0; s < 2000; ++s) {
        const double x = double(s) / 2000.0;
        double v;
        if (x < 0.35)
            v = 0.4 + 0.2 * x / 0.35;
        else if (x < 0.5)
            v = 0.6 + 1.2 * (x - 0.35) / 0.15;
        else if (x < 0.8)
            v = 1.8 - 0.4 * (x - 0.5) / 0.3;
        else
            v = 1.4 - 1.0 * (x - 0.8) / 0.2;
        dense[size_t(s)] = v;
    }
    double prev = 1e9;
    for (int M : {3, 5, 7, 10, 13}) {
        const double err = truncation_error(dense, SpectralBasis(M, 1.0));
        CHECK(err <= prev + 1e-15);
        prev = err;
    }
}

TEST_CASE("property: apply_H is linear and skew (v^T H v = 0)") {
    SpectralBasis b(7, 1.0);
    SpectralOperators ops(b);
    const int N = b.time_points;
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> u(static_cast<size_t>(N)), v(static_cast<size_t>(N)), lin(static_cast<size_t>(N));
        for (int n = 0; n < N; ++n) {
            u[size_t(n)] = dist(rng);
            v[size_t(n)] = dist(rng);
        }
        const double alpha = dist(rng), beta = dist(rng);
        for (int n = 0; n < N; ++n)
            lin[size_t(n)] = alpha * u[size_t(n)] + beta * v[size_t(n)];
        const auto hu = ops.apply(u);
        const auto hv = ops.apply(v);
        const auto hl = ops.apply(lin);
        double scale = 0.0, sym = 0.0;
        for (int n = 0; n < N; ++n) {
            CHECK(hl[size_t(n)] ==
                  doctest::Approx(alpha * hu[size_t(n)] + beta * hv[size_t(n)]).epsilon(1e-12));
            sym += v[size_t(n)] * hv[size_t(n)];
            scale += std::abs(v[size_t(n)] * hv[size_t(n)]);
        }
        CHECK(std::abs(sym) < 1e-12 * (scale + b.omega));
    }
}

TEST_CASE("property: band-limited truncation is the identity on its samples") {
    SpectralBasis b(5, 0.9);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    // random in-band signal evaluated densely
    std::vector<double> amp(5), phase(5);
    for (int k = 0; k < 5; ++k) {
        amp[size_t(k)] = dist(rng);
        phase[size_t(k)] = dist(rng);
    }
    auto eval = [&](double t) {
        double v = amp[0];
        for (int k = 1; k < 5; ++k)
            v += amp[size_t(k)] * std::cos(k * b.omega * t + phase[size_t(k)]);
        return v;
    };
    std::vector<double> dense(1200);
    for (int s = 0; s < 1200; ++s)
        dense[size_t(s)] = eval(b.period * double(s) / 1200.0);
    const auto sig = truncate_signal(dense, b);
    for (int n = 0; n < b.time_points; ++n)
        CHECK(sig.values[size_t(n)] == doctest::Approx(eval(b.sample_time(n))).epsilon(1e-11));
}

TEST_CASE("property: apply_H equals dense multiplication for N in {1,3,5,7,13,25}") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int N : {1, 3, 5, 7, 13, 25}) {
        SpectralBasis b = SpectralBasis::from_time_points(N, 0.7);
        SpectralOperators ops(b);
        const auto H = oracle_h_dense(b.modes, b.period);
        std::vector<double> v(static_cast<size_t>(N));
        for (auto& x : v)
            x = dist(rng);
        const auto got = ops.apply(v);
        double scale = 0.0;
        for (double x : v)
            scale = std::max(scale, std::abs(x));
        for (int n = 0; n < N; ++n) {
            double ref = 0.0;
            for (int m = 0; m < N; ++m)
                ref += H[size_t(n * N + m)] * v[size_t(m)];
            CHECK(std::abs(got[size_t(n)] - ref) <= 1e-11 * b.omega * scale + 1e-14);
        }
    }
}
