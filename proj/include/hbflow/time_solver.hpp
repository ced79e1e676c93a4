#pragma once

#include "hbflow/assembly.hpp"
#include "hbflow/cases.hpp"
#include "hbflow/linalg.hpp"

#include <vector>

namespace hbflow {

struct TimeSolverConfig {
    int steps_per_cycle = 500;
    int cycles = 4;
    double rho_inf = 0.2;
    double newton_tol_orders = 3.0;
    int max_newton_iters = 8;
    KrylovConfig krylov;
    bool steady = false;  // drop the acceleration term and solve one steady system
    int threads = 1;

    static TimeSolverConfig from_case(const CaseDefinition& def);
};

/// Snapshots of the last simulated cycle at uniform step boundaries
/// t_j = j * period / steps, j = 0..steps.
struct CycleHistory {
    double period = 0.0;
    int steps = 0;
    int num_nodes = 0;
    std::vector<double> u;  // (steps+1) * nodes*3, snapshot-major
    std::vector<double> p;  // (steps+1) * nodes

    std::span<const double> u_at(int j) const {
        return {&u[size_t(j) * size_t(num_nodes) * 3], size_t(num_nodes) * 3};
    }
    std::span<const double> p_at(int j) const {
        return {&p[size_t(j) * size_t(num_nodes)], size_t(num_nodes)};
    }
};

struct TimeSolution {
    CycleHistory cycle;
    double cycle_change = 0.0;  // last-vs-previous cycle velocity difference
    double total_seconds = 0.0;
    int total_steps = 0;
    int total_newton_iters = 0;
    double omega_hat_last = 0.0;  // acceleration frequency scale of the last step
};

/// Generalized-alpha time integration of the GLS-stabilized system, run for
/// cfg.cycles cycles; returns the final cycle. Throws DivergenceError with
/// the step index if a step's Newton solve blows up.
TimeSolution solve_time(const CaseInputs& inputs, const TimeSolverConfig& cfg);

/// Linear interpolation of fields at time t in [0, period]. Layouts:
/// u_out nodes*3 (node*3+i), p_out nodes.
void sample_cycle(const CycleHistory& cycle, double t, std::span<double> u_out,
                  std::span<double> p_out);

/// Fields at the N spectral sample times; layouts match state_velocity /
/// state_pressure.
struct SampledFields {
    std::vector<double> u;  // (node*3 + i)*N + n
    std::vector<double> p;  // node*N + n
};
SampledFields sample_cycle(const CycleHistory& cycle, const SpectralBasis& basis);

} // namespace hbflow
