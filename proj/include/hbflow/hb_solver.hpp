#pragma once

#include "hbflow/assembly.hpp"
#include "hbflow/cases.hpp"
#include "hbflow/linalg.hpp"

#include <string>
#include <vector>

namespace hbflow {

struct SolverConfig {
    double pseudo_dt = 0.0;  // 0 = choose h_c/u_c automatically
    double newton_tol_orders = 3.0;
    int max_newton_iters = 60;
    KrylovConfig krylov;
    TauMode tau_mode = TauMode::QuadraturePoint;
    bool backflow_in_tangent = false;
    double divergence_ratio = 1e3;
    int threads = 1;

    static SolverConfig from_case(const CaseDefinition& def);
};

struct ConvergenceEntry {
    int iter = 0;
    double res = 0.0;
    double res_rel = 1.0;
    int linear_iters = 0;
    double seconds = 0.0;
};

struct ConvergenceLog {
    std::vector<ConvergenceEntry> entries;
    bool converged = false;

    std::string to_csv() const;
};

struct HbSolution {
    HarmonicState state;
    ConvergenceLog log;
    double pseudo_dt = 0.0;   // value actually used
    double cfl = 0.0;
    double assembly_seconds = 0.0;
    double linear_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Pseudo-time step suggestion dt = h_c/u_c; falls back to T/N (flagged)
/// when the boundary data carries no flow.
struct PseudoDtSuggestion {
    double dt = 0.0;
    bool fallback = false;
};
PseudoDtSuggestion suggest_pseudo_dt(const Mesh& mesh, const BoundaryConditionSet& bcs,
                                     const SpectralBasis& basis);

/// Convective CFL number u_c * dt / h_c with u_c the peak mean inlet
/// velocity encoded in the Dirichlet data.
double compute_cfl(const Mesh& mesh, const BoundaryConditionSet& bcs, const SpectralBasis& basis,
                   double pseudo_dt);

/// Newton-Raphson with pseudo-time-augmented tangent on the harmonic
/// balance system. Throws DivergenceError when the residual ratio passes
/// cfg.divergence_ratio and StagnationError when GMRES makes no progress.
HbSolution solve_harmonic(const Mesh& mesh, const std::vector<ElementGeometry>& geoms,
                          const SpectralBasis& basis, const FluidProperties& props,
                          const BoundaryConditionSet& bcs, const SolverConfig& cfg);

/// Case-level wrapper.
HbSolution solve_harmonic(const CaseInputs& inputs);

} // namespace hbflow
