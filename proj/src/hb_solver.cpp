#include "hbflow/hb_solver.hpp"
#include "hbflow/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hbflow {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// Peak mean inlet velocity from the prescribed Dirichlet data: for every
// Dirichlet patch carrying flow, |Q_n|/area maximized over time points.
double peak_inlet_velocity(const Mesh& mesh, const BoundaryConditionSet& bcs, int N) {
    constexpr double tri[3][3] = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                  {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                  {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};
    double best = 0.0;
    for (const auto& patch : mesh.patches) {
        if (patch.kind != PatchKind::Dirichlet || !(patch.area > 0.0))
            continue;
        for (int n = 0; n < N; ++n) {
            double q = 0.0;
            for (size_t f = 0; f < patch.facets.size(); ++f) {
                const auto& fac = patch.facets[f];
                const auto& nv = patch.normals[f];
                const double w = patch.facet_areas[f] / 3.0;
                for (int qp = 0; qp < 3; ++qp) {
                    double un = 0.0;
                    for (int a = 0; a < 3; ++a)
                        for (int i = 0; i < 3; ++i)
                            un += tri[qp][a] *
                                  bcs.dirichlet_g[size_t((fac[size_t(a)] * 3 + i) * N + n)] *
                                  nv[size_t(i)];
                    q += w * un;
                }
            }
            best = std::max(best, std::abs(q) / patch.area);
        }
    }
    return best;
}

} // namespace

SolverConfig SolverConfig::from_case(const CaseDefinition& def) {
    SolverConfig cfg;
    cfg.pseudo_dt = def.pseudo_dt;
    cfg.newton_tol_orders = def.newton_tol_orders;
    cfg.max_newton_iters = def.max_newton_iters;
    cfg.krylov.tolerance = def.gmres_tol;
    cfg.krylov.restart = def.gmres_restart;
    cfg.krylov.max_iters = def.gmres_max_iters;
    cfg.tau_mode = def.tau_mode;
    cfg.backflow_in_tangent = def.backflow_in_tangent;
    cfg.threads = def.threads;
    return cfg;
}

std::string ConvergenceLog::to_csv() const {
    std::ostringstream out;
    out << "iter,res,res_rel,linear_iters,seconds\n";
    char buf[160];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%.6f\n", e.iter, e.res, e.res_rel,
                      e.linear_iters, e.seconds);
        out << buf;
    }
    return out.str();
}

PseudoDtSuggestion suggest_pseudo_dt(const Mesh& mesh, const BoundaryConditionSet& bcs,
                                     const SpectralBasis& basis) {
    const double h_c = characteristic_length(mesh);
    const double u_c = peak_inlet_velocity(mesh, bcs, basis.time_points);
    PseudoDtSuggestion s;
    if (u_c <= 0.0) {
        s.dt = basis.period / double(basis.time_points);
        s.fallback = true;
    } else {
        s.dt = h_c / u_c;
    }
    return s;
}

double compute_cfl(const Mesh& mesh, const BoundaryConditionSet& bcs, const SpectralBasis& basis,
                   double pseudo_dt) {
    bool has_inlet = false;
    for (const auto& p : mesh.patches)
        if (p.kind == PatchKind::Dirichlet && p.area > 0.0)
            has_inlet = true;
    if (!has_inlet)
        throw GeometryError("CFL number needs a Dirichlet inlet patch with positive area");
    const double h_c = characteristic_length(mesh);
    const double u_c = peak_inlet_velocity(mesh, bcs, basis.time_points);
    return u_c * pseudo_dt / h_c;
}

HbSolution solve_harmonic(const Mesh& mesh, const std::vector<ElementGeometry>& geoms,
                          const SpectralBasis& basis, const FluidProperties& props,
                          const BoundaryConditionSet& bcs, const SolverConfig& cfg) {
    const auto t_total = clock_type::now();
    const int N = basis.time_points;
    SpectralOperators ops(basis);

    HbSolution sol;
    sol.state = HarmonicState(basis, mesh.num_nodes());
    install_dirichlet(mesh, bcs, sol.state);

    // Start from rest with the pressure at the prescribed outlet level, so
    // the initial residual measures the flow imbalance rather than the
    // traction offset of the Neumann data.
    const double p0 = initial_pressure_level(mesh, bcs);
    if (p0 != 0.0)
        for (int a = 0; a < mesh.num_nodes(); ++a) {
            auto pa = sol.state.p(a);
            std::fill(pa.begin(), pa.end(), p0);
        }

    sol.pseudo_dt = cfg.pseudo_dt > 0.0 ? cfg.pseudo_dt : suggest_pseudo_dt(mesh, bcs, basis).dt;
    sol.cfl = compute_cfl(mesh, bcs, basis, sol.pseudo_dt);

    AssemblyConfig acfg;
    acfg.tau_mode = cfg.tau_mode;
    acfg.pseudo_dt = sol.pseudo_dt;
    acfg.backflow_in_tangent = cfg.backflow_in_tangent;

    auto pattern = std::make_shared<NodePattern>(NodePattern::build(mesh));
    TangentOperator L;
    L.mesh = &mesh;
    L.ops = &ops;
    L.pattern = pattern;
    L.P = BlockSparseMatrix(pattern, N);
    L.threads = cfg.threads;

    {
        const auto t0 = clock_type::now();
        L.mass = assemble_mass(mesh, geoms, props.rho, *pattern);
        sol.assembly_seconds += seconds_since(t0);
    }

    const double target = std::pow(10.0, -cfg.newton_tol_orders);
    double r0 = 0.0;
    for (int iter = 0; iter <= cfg.max_newton_iters; ++iter) {
        const auto t_iter = clock_type::now();
        const auto t0 = clock_type::now();
        const auto r = assemble_residual(mesh, geoms, sol.state, ops, props, bcs, acfg,
                                         cfg.threads);
        sol.assembly_seconds += seconds_since(t0);
        const double res = norm2(r);
        if (!std::isfinite(res)) {
            sol.log.entries.push_back({iter, res, res / (r0 > 0 ? r0 : 1.0), 0,
                                       seconds_since(t_iter)});
            throw DivergenceError("residual is not finite at iteration " + std::to_string(iter),
                                  sol.log.to_csv());
        }
        if (iter == 0)
            r0 = res;
        const double rel = iter == 0 ? 1.0 : (r0 > 0.0 ? res / r0 : 0.0);

        if (r0 <= 1e-30 || rel <= target) {
            sol.log.entries.push_back({iter, res, rel, 0, seconds_since(t_iter)});
            sol.log.converged = true;
            break;
        }
        if (rel > cfg.divergence_ratio) {
            sol.log.entries.push_back({iter, res, rel, 0, seconds_since(t_iter)});
            throw DivergenceError("nonlinear solve diverged: residual ratio " +
                                      std::to_string(rel) + " at iteration " +
                                      std::to_string(iter),
                                  sol.log.to_csv());
        }
        if (iter == cfg.max_newton_iters) {
            sol.log.entries.push_back({iter, res, rel, 0, seconds_since(t_iter)});
            break;  // iteration cap: flagged, not an error
        }

        const auto t1 = clock_type::now();
        assemble_tangent(mesh, geoms, sol.state, props, bcs, acfg, L.P);
        sol.assembly_seconds += seconds_since(t1);

        const auto t2 = clock_type::now();
        const auto pc = jacobi_preconditioner(L);
        const auto lin = gmres_solve(L, r, pc, cfg.krylov);
        sol.linear_seconds += seconds_since(t2);
        if (lin.status == KrylovStatus::Stagnated)
            throw StagnationError("GMRES stagnated at Newton iteration " + std::to_string(iter) +
                                  " (relative residual " + std::to_string(lin.relative_residual) +
                                  ")");

        for (int a = 0; a < mesh.num_nodes(); ++a) {
            const bool fixed = mesh.is_dirichlet_node[size_t(a)] != 0;
            double* ua = &sol.state.data[size_t(a) * 4 * size_t(N)];
            const double* da = &lin.x[size_t(a) * 4 * size_t(N)];
            for (int c = 0; c < 4; ++c) {
                if (fixed && c < 3)
                    continue;  // Dirichlet values stay exact
                for (int n = 0; n < N; ++n)
                    ua[c * N + n] -= da[c * N + n];
            }
        }
        sol.log.entries.push_back({iter, res, rel, lin.iterations, seconds_since(t_iter)});
    }

    sol.total_seconds = seconds_since(t_total);
    return sol;
}

HbSolution solve_harmonic(const CaseInputs& inputs) {
    const auto geoms = precompute_geometry(inputs.mesh);
    SolverConfig cfg = SolverConfig::from_case(inputs.def);
    return solve_harmonic(inputs.mesh, geoms, inputs.basis, inputs.props, inputs.bcs, cfg);
}

} // namespace hbflow
