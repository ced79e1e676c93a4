#pragma once

#include "hbflow/linalg.hpp"
#include "hbflow/mesh.hpp"
#include "hbflow/spectral.hpp"

#include <limits>
#include <span>
#include <vector>

namespace hbflow {

/// Shape-function constant in the stabilization parameter for linear
/// tetrahedra.
inline constexpr double kTauConstant = 3.0;

struct FluidProperties {
    double rho = 1.06;  // g/cm^3
    double mu = 0.04;   // g/(cm*s)

    double nu() const { return mu / rho; }
    void validate() const;
};

/// All unknowns at all N time points: per node, three velocity components
/// and pressure, each a length-N time series. Storage is node-major:
/// index(node, comp, n) = (node*4 + comp)*N + n with comp 3 = pressure.
struct HarmonicState {
    SpectralBasis basis;
    int num_nodes = 0;
    std::vector<double> data;

    HarmonicState() = default;
    HarmonicState(const SpectralBasis& b, int nnodes)
        : basis(b), num_nodes(nnodes),
          data(size_t(nnodes) * 4 * size_t(b.time_points), 0.0) {}

    int stride() const { return 4 * basis.time_points; }
    std::span<double> u(int a, int i) {
        return {&data[size_t(a * stride() + i * basis.time_points)], size_t(basis.time_points)};
    }
    std::span<const double> u(int a, int i) const {
        return {&data[size_t(a * stride() + i * basis.time_points)], size_t(basis.time_points)};
    }
    std::span<double> p(int a) { return u(a, 3); }
    std::span<const double> p(int a) const { return u(a, 3); }
};

/// Dirichlet values for constrained nodes plus Neumann traction levels.
struct BoundaryConditionSet {
    /// Dense (num_nodes*3*N); meaningful only where the mesh marks a node
    /// Dirichlet. Layout (node*3 + i)*N + n.
    std::vector<double> dirichlet_g;
    struct NeumannBC {
        int patch_index = -1;
        std::vector<double> h;  // dyn/cm^2 at each time point
    };
    std::vector<NeumannBC> neumann;
    double backflow_beta = 0.2;
};

enum class TauMode { QuadraturePoint, ElementMean };

struct AssemblyConfig {
    TauMode tau_mode = TauMode::QuadraturePoint;
    /// Pseudo-time step for the tangent augmentation; infinity disables it.
    double pseudo_dt = std::numeric_limits<double>::infinity();
    double pseudo_c1 = 1.5;  // generalized-alpha factor at rho_inf = 0
    bool backflow_in_tangent = false;
};

/// tau_n = (u_n . xi u_n + C_I nu^2 xi:xi)^(-1/2) per time point.
/// u_qp has layout i*N + n. Throws std::domain_error when the argument
/// vanishes (zero velocity and zero viscosity).
void compute_tau(const ElementGeometry& geom, std::span<const double> u_qp,
                 const FluidProperties& props, std::span<double> tau);

/// Consistent mass entries m_ab = rho * int N_a N_b for a linear tet:
/// rho*V/10 on the diagonal, rho*V/20 off it. Row-major 4x4.
std::array<double, 16> element_mass(const ElementGeometry& geom, double rho);

/// Element Womersley number beta = h*sqrt((N-1)*omega/(2 nu)).
double element_womersley(double h, int time_points, double omega, double nu);

/// Element residual of the harmonic-balance GLS form.
///
/// Nodal input layouts: u, hu are (a*3+i)*N+n; p is a*N+n, a = 0..3.
/// hu carries the pseudo-spectral time derivative of u at the nodes.
/// Outputs are accumulated (+=):
///   r_m (4*3*N)  momentum rows: Galerkin + advective least-squares part
///   r_c (4*N)    continuity rows (complete)
///   s   (4*3*N)  least-squares time-coupling accumulator; the caller must
///                subtract H*s (per node and direction) from the momentum
///                rows to complete the residual.
void element_residual(const ElementGeometry& geom, int time_points,
                      std::span<const double> u, std::span<const double> p,
                      std::span<const double> hu, const FluidProperties& props,
                      const AssemblyConfig& cfg, std::span<double> r_m, std::span<double> r_c,
                      std::span<double> s);

/// Pointwise tangent blocks (time-diagonal), accumulated (+=):
///   K (16*N)   velocity-velocity, layout (a*4+b)*N+n
///   G (48*N)   velocity_i-pressure, layout ((a*4+b)*3+i)*N+n
///   D (48*N)   pressure-velocity_j, same layout as G
///   L (16*N)   pressure-pressure, layout as K
/// Includes the pseudo-time mass augmentation when cfg.pseudo_dt is finite.
void element_tangent_p(const ElementGeometry& geom, int time_points,
                       std::span<const double> u, const FluidProperties& props,
                       const AssemblyConfig& cfg, std::span<double> K, std::span<double> G,
                       std::span<double> D, std::span<double> L);

/// Neumann traction and backflow stabilization for one boundary patch,
/// accumulated into the global residual (layout of HarmonicState::data).
void accumulate_boundary_terms(const BoundaryPatch& patch, std::span<const double> h,
                               const HarmonicState& state, const FluidProperties& props,
                               double backflow_beta, std::span<double> residual);

/// Write Dirichlet values into the state. Every Dirichlet-flagged node takes
/// its g values; pressure entries are untouched.
void install_dirichlet(const Mesh& mesh, const BoundaryConditionSet& bcs, HarmonicState& state);

/// Area-weighted time-mean pressure level of the Neumann data (-h), used to
/// seed the pressure field so initial residuals are flow-scaled.
double initial_pressure_level(const Mesh& mesh, const BoundaryConditionSet& bcs);

/// Full residual of the discrete system: Galerkin + least-squares + Neumann +
/// backflow, with Dirichlet velocity rows zeroed. Layout matches
/// HarmonicState::data.
std::vector<double> assemble_residual(const Mesh& mesh,
                                      const std::vector<ElementGeometry>& geoms,
                                      const HarmonicState& state, const SpectralOperators& ops,
                                      const FluidProperties& props,
                                      const BoundaryConditionSet& bcs, const AssemblyConfig& cfg,
                                      int threads = 1);

/// Assemble the pointwise tangent P into a preallocated block-sparse matrix.
/// Dirichlet velocity rows/columns are dropped and their diagonals set to 1.
void assemble_tangent(const Mesh& mesh, const std::vector<ElementGeometry>& geoms,
                      const HarmonicState& state, const FluidProperties& props,
                      const BoundaryConditionSet& bcs, const AssemblyConfig& cfg,
                      BlockSparseMatrix& P);

/// Node-pair consistent mass (rho-weighted scalars) on the given pattern,
/// the spatial factor of the time-coupling tangent C.
std::vector<double> assemble_mass(const Mesh& mesh, const std::vector<ElementGeometry>& geoms,
                                  double rho, const NodePattern& pattern);

} // namespace hbflow
