#include "hbflow/spectral.hpp"
#include "hbflow/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

namespace hbflow {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Transform-natural mode index: k -> k for k < M, k - N otherwise.
inline int natural_mode(int k, int M, int N) { return k < M ? k : k - N; }
} // namespace

SpectralBasis::SpectralBasis(int M, double T) {
    if (M < 1)
        throw ParseError("spectral basis requires at least one mode (M >= 1)");
    if (!(T > 0.0))
        throw ParseError("spectral basis requires a positive period");
    modes = M;
    time_points = 2 * M - 1;
    period = T;
    omega = kTwoPi / T;
}

SpectralBasis SpectralBasis::from_time_points(int N, double T) {
    if (N < 1 || N % 2 == 0)
        throw ParseError("time-point count must be odd (N = 2M-1), got " + std::to_string(N));
    return SpectralBasis((N + 1) / 2, T);
}

std::vector<std::complex<double>> PeriodicSignal::coefficients() const {
    const int N = basis.time_points;
    const int M = basis.modes;
    std::vector<std::complex<double>> c(N);
    // c_m = (1/N) sum_n v_n e^{-2 pi i m n / N}; m = -M+1..M-1 stored in that order.
    for (int j = 0; j < N; ++j) {
        const int m = j - (M - 1);
        std::complex<double> acc(0.0, 0.0);
        for (int n = 0; n < N; ++n) {
            const double phase = -kTwoPi * double(m) * double(n) / double(N);
            acc += values[size_t(n)] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        c[size_t(j)] = acc / double(N);
    }
    return c;
}

double PeriodicSignal::reconstruct(double t) const {
    const int M = basis.modes;
    const auto c = coefficients();
    std::complex<double> acc(0.0, 0.0);
    for (int j = 0; j < basis.time_points; ++j) {
        const int m = j - (M - 1);
        const double phase = double(m) * basis.omega * t;
        acc += c[size_t(j)] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return acc.real();
}

double PeriodicSignal::reconstruct_derivative(double t) const {
    const int M = basis.modes;
    const auto c = coefficients();
    std::complex<double> acc(0.0, 0.0);
    for (int j = 0; j < basis.time_points; ++j) {
        const int m = j - (M - 1);
        const double phase = double(m) * basis.omega * t;
        const std::complex<double> im(0.0, double(m) * basis.omega);
        acc += im * c[size_t(j)] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return acc.real();
}

PeriodicSignal truncate_signal(std::span<const double> dense, const SpectralBasis& basis) {
    const int N = basis.time_points;
    const int M = basis.modes;
    const int S = int(dense.size());
    if (S < N)
        throw ParseError("signal has " + std::to_string(S) + " samples, need at least " +
                         std::to_string(N) + " for " + std::to_string(M) + " modes");

    // Exact-to-roundoff Fourier coefficients on the dense uniform grid,
    // kept only for |m| < M.
    std::vector<std::complex<double>> c(size_t(2 * M - 1));
    for (int m = -(M - 1); m <= M - 1; ++m) {
        std::complex<double> acc(0.0, 0.0);
        for (int s = 0; s < S; ++s) {
            const double phase = -kTwoPi * double(m) * double(s) / double(S);
            acc += dense[size_t(s)] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        c[size_t(m + M - 1)] = acc / double(S);
    }

    PeriodicSignal sig;
    sig.basis = basis;
    sig.values.resize(size_t(N));
    for (int n = 0; n < N; ++n) {
        std::complex<double> acc(0.0, 0.0);
        for (int m = -(M - 1); m <= M - 1; ++m) {
            const double phase = kTwoPi * double(m) * double(n) / double(N);
            acc += c[size_t(m + M - 1)] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        sig.values[size_t(n)] = acc.real();
    }
    return sig;
}

double truncation_error(std::span<const double> dense, const SpectralBasis& basis) {
    const int S = int(dense.size());
    const PeriodicSignal sig = truncate_signal(dense, basis);
    const auto c = sig.coefficients();
    const int M = basis.modes;

    double num = 0.0, den = 0.0;
    for (int s = 0; s < S; ++s) {
        std::complex<double> acc(0.0, 0.0);
        for (int m = -(M - 1); m <= M - 1; ++m) {
            const double phase = kTwoPi * double(m) * double(s) / double(S);
            acc += c[size_t(m + M - 1)] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        const double d = acc.real() - dense[size_t(s)];
        num += d * d;
        den += dense[size_t(s)] * dense[size_t(s)];
    }
    if (den == 0.0)
        throw ParseError("truncation error undefined for an identically zero signal");
    return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// SpectralOperators

SpectralOperators::Workspace::Workspace(int n, int count) {
    in_ = fftw_malloc(sizeof(fftw_complex) * size_t(n) * size_t(count));
    out_ = fftw_malloc(sizeof(fftw_complex) * size_t(n) * size_t(count));
}

SpectralOperators::Workspace::~Workspace() {
    fftw_free(in_);
    fftw_free(out_);
}

SpectralOperators::SpectralOperators(const SpectralBasis& basis) : basis_(basis) {
    const int N = basis_.time_points;
    const int M = basis_.modes;
    mode_freq_.resize(size_t(N));
    for (int k = 0; k < N; ++k)
        mode_freq_[size_t(k)] = basis_.omega * double(natural_mode(k, M, N));

    plan_buf_ = std::make_unique<Workspace>(N, kBatch);
    auto* in = static_cast<fftw_complex*>(plan_buf_->in_);
    auto* out = static_cast<fftw_complex*>(plan_buf_->out_);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plan_fwd_ = fftw_plan_dft_1d(N, in, out, FFTW_FORWARD, flags);
    plan_bwd_ = fftw_plan_dft_1d(N, out, in, FFTW_BACKWARD, flags);
    const int n[1] = {N};
    plan_fwd_many_ = fftw_plan_many_dft(1, n, kBatch, in, nullptr, 1, N, out, nullptr, 1, N,
                                        FFTW_FORWARD, flags);
    plan_bwd_many_ = fftw_plan_many_dft(1, n, kBatch, out, nullptr, 1, N, in, nullptr, 1, N,
                                        FFTW_BACKWARD, flags);
}

SpectralOperators::~SpectralOperators() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_many_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_many_));
}

std::unique_ptr<SpectralOperators::Workspace> SpectralOperators::make_workspace() const {
    return std::make_unique<Workspace>(basis_.time_points, kBatch);
}

void SpectralOperators::apply(std::span<const double> v, std::span<double> out,
                              Workspace& ws) const {
    const int N = basis_.time_points;
    if (int(v.size()) != N || int(out.size()) != N)
        throw std::invalid_argument("apply_H: vector length does not match time-point count");
    apply_many(v, out, 1, ws);
}

void SpectralOperators::apply_many(std::span<const double> vin, std::span<double> vout, int count,
                                   Workspace& ws) const {
    const int N = basis_.time_points;
    if (int(vin.size()) < count * N || int(vout.size()) < count * N)
        throw std::invalid_argument("apply_H: batch buffer too small");

    auto* in = static_cast<fftw_complex*>(ws.in_);
    auto* mid = static_cast<fftw_complex*>(ws.out_);
    const double invN = 1.0 / double(N);
    int done = 0;
    while (done < count) {
        const int batch = std::min(kBatch, count - done);
        const double* src = &vin[size_t(done) * size_t(N)];
        for (int k = 0; k < batch * N; ++k) {
            in[k][0] = src[k];
            in[k][1] = 0.0;
        }
        if (batch == kBatch) {
            fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_many_), in, mid);
        } else {
            for (int b = 0; b < batch; ++b)
                fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), in + b * N, mid + b * N);
        }
        for (int b = 0; b < batch; ++b)
            for (int k = 0; k < N; ++k) {
                const int at = b * N + k;
                const double re = mid[at][0], im = mid[at][1];
                const double f = mode_freq_[size_t(k)] * invN;
                mid[at][0] = -f * im;
                mid[at][1] = f * re;
            }
        if (batch == kBatch) {
            fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_many_), mid, in);
        } else {
            for (int b = 0; b < batch; ++b)
                fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), mid + b * N, in + b * N);
        }
        double* dst = &vout[size_t(done) * size_t(N)];
        for (int k = 0; k < batch * N; ++k)
            dst[k] = in[k][0];
        done += batch;
    }
}

std::vector<double> SpectralOperators::apply(std::span<const double> v) const {
    auto ws = make_workspace();
    std::vector<double> out(v.size());
    apply(v, out, *ws);
    return out;
}

std::vector<double> SpectralOperators::dense() const {
    const int N = basis_.time_points;
    const int M = basis_.modes;
    std::vector<double> H(size_t(N) * size_t(N), 0.0);
    // H = E^{-1} Omega E with E(j,k) = (1/N) e^{-2 pi i j k / N}.
    for (int j = 0; j < N; ++j) {
        for (int k = 0; k < N; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (int l = 0; l < N; ++l) {
                const double ph1 = kTwoPi * double(j) * double(l) / double(N);
                const double ph2 = -kTwoPi * double(l) * double(k) / double(N);
                const std::complex<double> einv(std::cos(ph1), std::sin(ph1));
                const std::complex<double> e(std::cos(ph2) / N, std::sin(ph2) / N);
                const std::complex<double> om(0.0, basis_.omega * double(natural_mode(l, M, N)));
                acc += einv * om * e;
            }
            H[size_t(j) * size_t(N) + size_t(k)] = acc.real();
        }
    }
    return H;
}

} // namespace hbflow
