#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace hbflow {

/// Truncated Fourier basis for one flow period: modes -M+1..M-1 sampled at
/// N = 2M-1 equally spaced time points t_n = n T / N.
struct SpectralBasis {
    int modes = 1;        // M
    int time_points = 1;  // N = 2M-1, always odd
    double period = 1.0;  // T (s)
    double omega = 0.0;   // 2*pi/T (rad/s)

    SpectralBasis() = default;
    SpectralBasis(int M, double T);

    /// Construct from an odd time-point count N.
    static SpectralBasis from_time_points(int N, double T);

    double sample_time(int n) const { return period * double(n) / double(time_points); }
};

/// A periodic scalar signal stored by its values at the N basis sample times.
struct PeriodicSignal {
    SpectralBasis basis;
    std::vector<double> values;  // length N

    /// Fourier coefficients c_m, m = -M+1..M-1, computed from the samples.
    std::vector<std::complex<double>> coefficients() const;

    /// Evaluate the band-limited trigonometric interpolant at time t.
    double reconstruct(double t) const;

    /// Time derivative of the interpolant at time t.
    double reconstruct_derivative(double t) const;
};

/// Band-limit a densely sampled signal (uniform grid over one period) to the
/// basis and return its values at the N sample times. Content at modes >= M
/// is discarded, so the result is alias-free by construction.
PeriodicSignal truncate_signal(std::span<const double> dense_samples, const SpectralBasis& basis);

/// Relative L2 distance between a dense signal and its band-limited
/// reconstruction, evaluated on the dense grid.
double truncation_error(std::span<const double> dense_samples, const SpectralBasis& basis);

/// Pseudo-spectral time machinery: the diagonal frequency matrix applied
/// between a DFT pair, H = E^{-1} * Omega * E, realized with fast transforms.
/// Immutable after construction; concurrent apply() calls are safe as long as
/// each worker owns its Workspace.
class SpectralOperators {
public:
    explicit SpectralOperators(const SpectralBasis& basis);
    ~SpectralOperators();

    SpectralOperators(const SpectralOperators&) = delete;
    SpectralOperators& operator=(const SpectralOperators&) = delete;

    const SpectralBasis& basis() const { return basis_; }
    int size() const { return basis_.time_points; }

    /// Transforms processed per batched plan invocation.
    static constexpr int kBatch = 48;

    /// Per-worker FFT scratch sized for one batch. Allocation is aligned for
    /// the planner.
    class Workspace {
    public:
        Workspace(int n, int count);
        ~Workspace();
        Workspace(const Workspace&) = delete;
        Workspace& operator=(const Workspace&) = delete;

    private:
        friend class SpectralOperators;
        void* in_;
        void* out_;
    };

    std::unique_ptr<Workspace> make_workspace() const;

    /// out = real(E^{-1} Omega E v): exact derivative of the band-limited
    /// interpolant at the sample points. v and out are length N and may alias.
    void apply(std::span<const double> v, std::span<double> out, Workspace& ws) const;

    /// Batched application to `count` packed series, layout [k*N + n].
    void apply_many(std::span<const double> in, std::span<double> out, int count,
                    Workspace& ws) const;

    /// Convenience allocating overload.
    std::vector<double> apply(std::span<const double> v) const;

    /// Dense N x N real matrix of the operator, built by the explicit
    /// complex triple product. Intended for tests and small-N tangents.
    std::vector<double> dense() const;  // row-major N*N

private:
    SpectralBasis basis_;
    std::vector<double> mode_freq_;  // omega * m_k in transform-natural order
    void* plan_fwd_;
    void* plan_bwd_;
    void* plan_fwd_many_;
    void* plan_bwd_many_;
    std::unique_ptr<Workspace> plan_buf_;
};

} // namespace hbflow
