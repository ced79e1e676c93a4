#pragma once

// Independent reference implementations used to freeze expected values.
// Everything here recomputes results from first principles with naive loops
// and explicit dense matrices; none of it shares code paths with the
// implementations under test beyond basic mesh geometry.

#include "hbflow/assembly.hpp"
#include "hbflow/mesh.hpp"
#include "hbflow/spectral.hpp"

#include <complex>
#include <vector>

namespace hbflow::testing {

/// Dense pseudo-spectral derivative built from explicit complex E, Omega and
/// E^{-1} matrices multiplied together (row-major N x N, real part).
std::vector<double> oracle_h_dense(int modes, double period);

/// Dense-DFT band-limiting: project dense uniform samples onto modes |m| < M
/// with explicit complex matrices and evaluate at the N sample times.
std::vector<double> oracle_truncate(const std::vector<double>& dense, int modes, double period);

/// Straight-loop residual of the harmonic-balance GLS system: naive
/// quadrature loops, dense H applied per quadrature point, no FFT, no
/// accumulator tricks. Dirichlet velocity rows zeroed. Layout matches
/// HarmonicState::data.
std::vector<double> oracle_residual(const Mesh& mesh, const HarmonicState& state,
                                    const FluidProperties& props,
                                    const BoundaryConditionSet& bcs, const AssemblyConfig& cfg);

/// Same weak form with frozen convection/stabilization coefficients (taken
/// from u0) and the time-coupling terms dropped; the exact object the
/// pointwise tangent P differentiates. No boundary terms.
std::vector<double> oracle_frozen_residual(const Mesh& mesh, const HarmonicState& state,
                                           const HarmonicState& coeff_state,
                                           const FluidProperties& props,
                                           const AssemblyConfig& cfg);

/// Dense square matrix of the full tangent L = C + P with the Kronecker
/// expansion of C = H (x) mass, Dirichlet rows/columns as identity.
/// Row-major over (node*4 + comp)*N + n.
std::vector<double> oracle_dense_tangent(const Mesh& mesh,
                                         const std::vector<ElementGeometry>& geoms,
                                         const HarmonicState& state,
                                         const FluidProperties& props,
                                         const BoundaryConditionSet& bcs,
                                         const AssemblyConfig& cfg);

/// Gaussian elimination with partial pivoting (oracle for Krylov solves).
std::vector<double> oracle_dense_solve(std::vector<double> a, std::vector<double> b);

double l2_diff(const std::vector<double>& a, const std::vector<double>& b);
double l2(const std::vector<double>& a);

} // namespace hbflow::testing
