#pragma once

#include "hbflow/assembly.hpp"
#include "hbflow/mesh.hpp"
#include "hbflow/spectral.hpp"

#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hbflow {

inline constexpr double kDynPerMmHg = 1333.22;

enum class InflowKind { SmoothSvc, MultiHarmonicCerebral, KinkedCoronary, File, Womersley };
enum class InflowProfile { ParabolicRound, ParabolicRect, Plug };

/// Everything a case file can say, as plain values. Units: CGS internally;
/// mmHg and mL/s are accepted at this surface.
struct CaseDefinition {
    // [mesh]
    std::string mesh_kind = "tube";  // tube | bifurcation | file
    double tube_radius = 0.3;
    double tube_length = 3.0;
    double bif_width = 0.4;
    double bif_depth = 0.4;
    double bif_inlet_length = 1.2;
    double bif_branch_length = 1.2;
    double mesh_h = 0.06;
    std::string mesh_path;
    MeshFormat mesh_format = MeshFormat::NativeText;

    // [fluid]
    double rho = 1.06;  // g/cm^3
    double mu = 0.04;   // poise

    // [spectral]
    double period = 1.0;  // s
    int modes = 4;        // M, N = 2M-1

    // [inflow]
    InflowKind inflow_kind = InflowKind::SmoothSvc;
    double mean_flow = 1.0;  // cm^3/s (= mL/s)
    InflowProfile profile = InflowProfile::ParabolicRound;
    std::string signal_path;
    double womersley_g0 = 0.0;  // steady component of -dp/dz (dyn/cm^3)
    std::complex<double> womersley_g1{0.0, 0.0};
    std::complex<double> womersley_g2{0.0, 0.0};

    // [outlets]
    double outlet_pressure_mmhg = 0.0;
    std::map<std::string, double> outlet_pressure_overrides;
    double backflow_beta = 0.2;

    // [solver-hb]
    double pseudo_dt = 0.0;  // 0 = auto (h_c / u_c)
    double newton_tol_orders = 3.0;
    int max_newton_iters = 60;
    double gmres_tol = 0.03;
    int gmres_restart = 200;
    int gmres_max_iters = 1000;
    TauMode tau_mode = TauMode::QuadraturePoint;
    bool backflow_in_tangent = false;

    // [solver-time]
    int steps_per_cycle = 500;
    int cycles = 4;
    double rho_inf = 0.2;
    double time_newton_tol_orders = 3.0;
    int time_max_newton_iters = 8;

    // [output]
    std::string output_dir = "out";
    bool write_fields = true;
    int threads = 1;
};

CaseDefinition load_case(const std::string& path);
CaseDefinition parse_case(const std::string& text, const std::string& origin = "<string>");

/// Synthetic inflow generators mirroring the three spectral characters:
/// a smooth low-harmonic profile, a profile with exactly ten nonzero
/// harmonic coefficients (modes 0..9), and a kinked piecewise-linear
/// two-phase profile. Mean value 1; scale by the target mean flow.
std::vector<double> synthetic_inflow(InflowKind kind, int samples = 2048);

/// Axial velocity of pulsatile flow in a rigid circular pipe driven by
/// G(t) = -dp/dz = g0 + sum_k Re(g_k e^{i k omega t}): the steady Poiseuille
/// part plus the per-harmonic Bessel-function solution.
struct WomersleyFlow {
    double radius = 1.0;
    double omega = 1.0;
    double g0 = 0.0;
    std::vector<std::complex<double>> harmonics;  // g_k for k = 1..K

    double alpha(const FluidProperties& props, int k = 1) const;
};
double womersley_velocity(const WomersleyFlow& flow, double r, double t,
                          const FluidProperties& props);
double womersley_velocity_dt(const WomersleyFlow& flow, double r, double t,
                             const FluidProperties& props);

/// Integrated relative error E = sum w |f_a - f_b| / sum w |f_b| with
/// nodal-volume weights in space and uniform weights over the sample
/// columns. Fields are (node*comps + i)*N + n; vector entries use the
/// Euclidean norm over comps. Throws when the reference is identically zero.
double relative_error_fields(std::span<const double> f, std::span<const double> ref,
                             std::span<const double> nodal_weights, int comps, int time_points);

/// Same functional for scalar signals sampled on a common grid.
double relative_error_signal(std::span<const double> f, std::span<const double> ref);

/// Flow rate through a patch for one velocity snapshot (nodes*3, layout
/// node*3+i). Positive along the outward normal.
double patch_flow_instant(const Mesh& mesh, const BoundaryPatch& patch,
                          std::span<const double> u);

/// Per-time-point flow rates of a harmonic state through a patch.
std::vector<double> patch_flow_series(const Mesh& mesh, const BoundaryPatch& patch,
                                      const HarmonicState& state);

/// Velocity / pressure views of a harmonic state in the layouts the error
/// functional consumes: (node*3 + i)*N + n and node*N + n.
std::vector<double> state_velocity(const HarmonicState& state);
std::vector<double> state_pressure(const HarmonicState& state);

/// Dirichlet evaluation for the time-domain reference solver.
using TimeDirichletFn =
    std::function<void(double t, std::vector<double>& g, std::vector<double>& gdot)>;

/// A case resolved into concrete solver inputs.
struct CaseInputs {
    CaseDefinition def;
    Mesh mesh;
    FluidProperties props;
    SpectralBasis basis;
    BoundaryConditionSet bcs;           // band-limited Dirichlet data
    int inlet_patch = -1;
    std::vector<double> inflow_dense;   // raw dense samples (empty for womersley)
    double inlet_truncation = 0.0;      // relative L2 truncation of the inflow
    std::vector<double> inlet_shape;    // per-node profile value (inlet nodes)
    double inlet_shape_integral = 0.0;  // facet-quadrature integral of the shape
    std::optional<WomersleyFlow> womersley;
    TimeDirichletFn time_dirichlet;     // g and dg/dt at arbitrary time

    double characteristic_h = 0.0;
    double element_womersley_beta = 0.0;
};

CaseInputs build_case(const CaseDefinition& def);

/// Re-resolve the spectral parts of existing inputs for a different mode
/// count (mesh and geometry are reused).
void rebuild_spectral(CaseInputs& inputs, int modes);

} // namespace hbflow
