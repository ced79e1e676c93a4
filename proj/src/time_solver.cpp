#include "hbflow/time_solver.hpp"
#include "hbflow/errors.hpp"
#include "hbflow/parallel.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hbflow {

namespace {

constexpr double kTetA = 0.5854101966249684544613761;
constexpr double kTetB = 0.1381966011250105151795414;
constexpr double kTetShape[4][4] = {{kTetA, kTetB, kTetB, kTetB},
                                    {kTetB, kTetA, kTetB, kTetB},
                                    {kTetB, kTetB, kTetA, kTetB},
                                    {kTetB, kTetB, kTetB, kTetA}};
constexpr double kTriShape[3][3] = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

// tau_hat = (omega_hat^2 + u.xi u + C_I nu^2 xi:xi)^(-1/2)
double tau_hat(const ElementGeometry& g, const double u[3], double nu, double omega_hat) {
    double conv = 0.0, xx = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            conv += u[i] * g.xi_at(i, j) * u[j];
            xx += g.xi_at(i, j) * g.xi_at(i, j);
        }
    return 1.0 / std::sqrt(omega_hat * omega_hat + conv + kTauConstant * nu * nu * xx);
}

// Fields carried by the stepping loop, layouts node*3+i and node.
struct TimeFields {
    std::vector<double> u, udot, p;
};

struct StepContext {
    const Mesh& mesh;
    const std::vector<ElementGeometry>& geoms;
    const FluidProperties& props;
    const BoundaryConditionSet& bcs;  // Neumann values; Dirichlet comes from the closure
    double omega_hat = 0.0;
    int threads = 1;
};

// Residual of the time-domain GLS system at the evaluation state
// (u at n+alpha_f, udot at n+alpha_m, p at n+1), Dirichlet rows zeroed.
// Layout: node*4 + comp, comp 3 = pressure.
std::vector<double> time_residual(const StepContext& ctx, std::span<const double> u,
                                  std::span<const double> udot, std::span<const double> p) {
    const Mesh& mesh = ctx.mesh;
    const double rho = ctx.props.rho, mu = ctx.props.mu, nu = ctx.props.nu();
    const int nn = mesh.num_nodes();
    const int nthreads = (ctx.threads <= 1 || mesh.num_elements() < 2 * ctx.threads)
                             ? 1
                             : ctx.threads;
    std::vector<std::vector<double>> acc(static_cast<size_t>(nthreads));
    parallel_for_chunks(nthreads, mesh.num_elements(), [&](int t, int eb, int ee) {
        auto& r = acc[size_t(t)];
        r.assign(size_t(nn) * 4, 0.0);
        for (int e = eb; e < ee; ++e) {
            const auto& g = ctx.geoms[size_t(e)];
            const auto& conn = mesh.elements[size_t(e)];
            const double w = g.volume / 4.0;
            double gradu[3][3] = {}, gradp[3] = {};
            for (int a = 0; a < 4; ++a) {
                const int A = conn[size_t(a)];
                for (int i = 0; i < 3; ++i) {
                    for (int j = 0; j < 3; ++j)
                        gradu[i][j] += g.grad_N[size_t(a)][size_t(j)] * u[size_t(A * 3 + i)];
                    gradp[i] += g.grad_N[size_t(a)][size_t(i)] * p[size_t(A)];
                }
            }
            const double divu = gradu[0][0] + gradu[1][1] + gradu[2][2];
            for (int q = 0; q < 4; ++q) {
                double uq[3] = {}, aq[3] = {}, pq = 0.0;
                for (int a = 0; a < 4; ++a) {
                    const int A = conn[size_t(a)];
                    const double sa = kTetShape[q][a];
                    for (int i = 0; i < 3; ++i) {
                        uq[i] += sa * u[size_t(A * 3 + i)];
                        aq[i] += sa * udot[size_t(A * 3 + i)];
                    }
                    pq += sa * p[size_t(A)];
                }
                const double th = tau_hat(g, uq, nu, ctx.omega_hat);
                double lq[3];
                for (int i = 0; i < 3; ++i) {
                    double conv = 0.0;
                    for (int j = 0; j < 3; ++j)
                        conv += uq[j] * gradu[i][j];
                    lq[i] = rho * aq[i] + rho * conv + gradp[i];
                }
                for (int a = 0; a < 4; ++a) {
                    const int A = conn[size_t(a)];
                    const double sa = kTetShape[q][a];
                    double adv = 0.0;
                    for (int j = 0; j < 3; ++j)
                        adv += uq[j] * g.grad_N[size_t(a)][size_t(j)];
                    for (int i = 0; i < 3; ++i) {
                        double conv = 0.0, visc = 0.0;
                        for (int j = 0; j < 3; ++j) {
                            conv += uq[j] * gradu[i][j];
                            visc += g.grad_N[size_t(a)][size_t(j)] * gradu[i][j];
                        }
                        r[size_t(A * 4 + i)] +=
                            w * (rho * sa * (aq[i] + conv) -
                                 g.grad_N[size_t(a)][size_t(i)] * pq + mu * visc +
                                 adv * th * lq[i]);
                    }
                    double pspg = 0.0;
                    for (int i = 0; i < 3; ++i)
                        pspg += g.grad_N[size_t(a)][size_t(i)] * th * lq[i];
                    r[size_t(A * 4 + 3)] += w * (sa * divu + pspg / rho);
                }
            }
        }
    });
    std::vector<double> r = std::move(acc[0]);
    for (int t = 1; t < nthreads; ++t)
        for (size_t k = 0; k < r.size(); ++k)
            r[k] += acc[size_t(t)][k];

    // Neumann traction and backflow stabilization.
    for (const auto& nb : ctx.bcs.neumann) {
        const auto& patch = mesh.patches[size_t(nb.patch_index)];
        const double h = nb.h[0];  // steady outlet traction
        for (size_t f = 0; f < patch.facets.size(); ++f) {
            const auto& fac = patch.facets[f];
            const auto& nv = patch.normals[f];
            const double w = patch.facet_areas[f] / 3.0;
            for (int q = 0; q < 3; ++q) {
                double uq[3] = {};
                for (int a = 0; a < 3; ++a)
                    for (int i = 0; i < 3; ++i)
                        uq[i] += kTriShape[q][a] * u[size_t(fac[size_t(a)] * 3 + i)];
                double un = 0.0;
                for (int i = 0; i < 3; ++i)
                    un += uq[i] * nv[size_t(i)];
                const double neg = std::min(un, 0.0);
                for (int a = 0; a < 3; ++a) {
                    const int A = fac[size_t(a)];
                    for (int i = 0; i < 3; ++i)
                        r[size_t(A * 4 + i)] +=
                            w * kTriShape[q][a] *
                            (-h * nv[size_t(i)] -
                             0.5 * rho * ctx.bcs.backflow_beta * neg * uq[i]);
                }
            }
        }
    }

    for (int a = 0; a < nn; ++a)
        if (mesh.is_dirichlet_node[size_t(a)])
            for (int i = 0; i < 3; ++i)
                r[size_t(a * 4 + i)] = 0.0;
    return r;
}

// Tangent w.r.t. the acceleration increment (and pressure), with the
// generalized-alpha factors am (acceleration terms) and fg = alpha_f *
// gamma * dt (velocity terms). Steady mode passes am = 0, fg = 1 and
// interprets the increment as a velocity update.
void time_tangent(const StepContext& ctx, std::span<const double> u, double am, double fg,
                  BlockSparseMatrix& P) {
    const Mesh& mesh = ctx.mesh;
    const double rho = ctx.props.rho, mu = ctx.props.mu, nu = ctx.props.nu();
    const int N = 1;
    P.zero();
    const auto& pat = *P.pattern;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& g = ctx.geoms[size_t(e)];
        const auto& conn = mesh.elements[size_t(e)];
        const double w = g.volume / 4.0;
        const auto mass = element_mass(g, 1.0);
        double K[16] = {}, G[16][3] = {{}}, D[16][3] = {{}}, L[16] = {};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                double gg = 0.0;
                for (int j = 0; j < 3; ++j)
                    gg += g.grad_N[size_t(a)][size_t(j)] * g.grad_N[size_t(b)][size_t(j)];
                K[a * 4 + b] += am * rho * mass[size_t(4 * a + b)] + fg * mu * g.volume * gg;
                L[a * 4 + b] = 0.0;
                for (int i = 0; i < 3; ++i) {
                    G[a * 4 + b][i] += -g.grad_N[size_t(a)][size_t(i)] * g.volume / 4.0;
                    D[a * 4 + b][i] += fg * g.grad_N[size_t(b)][size_t(i)] * g.volume / 4.0;
                }
            }
        for (int q = 0; q < 4; ++q) {
            double uq[3] = {};
            for (int a = 0; a < 4; ++a) {
                const double sa = kTetShape[q][a];
                for (int i = 0; i < 3; ++i)
                    uq[i] += sa * u[size_t(conn[size_t(a)] * 3 + i)];
            }
            const double th = tau_hat(g, uq, nu, ctx.omega_hat);
            double adv[4];
            for (int a = 0; a < 4; ++a) {
                adv[a] = 0.0;
                for (int j = 0; j < 3; ++j)
                    adv[a] += uq[j] * g.grad_N[size_t(a)][size_t(j)];
            }
            for (int a = 0; a < 4; ++a) {
                const double sa = kTetShape[q][a];
                for (int b = 0; b < 4; ++b) {
                    const double sb = kTetShape[q][b];
                    K[a * 4 + b] += w * (fg * rho * (sa * adv[b] + adv[a] * th * adv[b]) +
                                         am * rho * adv[a] * th * sb);
                    double gg = 0.0;
                    for (int j = 0; j < 3; ++j)
                        gg += g.grad_N[size_t(a)][size_t(j)] * g.grad_N[size_t(b)][size_t(j)];
                    L[a * 4 + b] += w * gg * th / rho;
                    for (int i = 0; i < 3; ++i) {
                        G[a * 4 + b][i] += w * adv[a] * th * g.grad_N[size_t(b)][size_t(i)];
                        D[a * 4 + b][i] += w * g.grad_N[size_t(a)][size_t(i)] * th *
                                           (am * sb + fg * adv[b]);
                    }
                }
            }
        }
        for (int a = 0; a < 4; ++a) {
            const int A = conn[size_t(a)];
            const bool afix = mesh.is_dirichlet_node[size_t(A)] != 0;
            for (int b = 0; b < 4; ++b) {
                const int B = conn[size_t(b)];
                const bool bfix = mesh.is_dirichlet_node[size_t(B)] != 0;
                double* vals = P.block(pat.find(A, B));
                if (!afix && !bfix)
                    vals[BlockSparseMatrix::kSlotK * N] += K[a * 4 + b];
                for (int i = 0; i < 3; ++i) {
                    if (!afix)
                        vals[(BlockSparseMatrix::kSlotG + i) * N] += G[a * 4 + b][i];
                    if (!bfix)
                        vals[(BlockSparseMatrix::kSlotD + i) * N] += D[a * 4 + b][i];
                }
                vals[BlockSparseMatrix::kSlotL * N] += L[a * 4 + b];
            }
        }
    }
    for (int a : mesh.dirichlet_nodes)
        P.block(pat.find(a, a))[BlockSparseMatrix::kSlotK * N] = 1.0;
}

} // namespace

TimeSolverConfig TimeSolverConfig::from_case(const CaseDefinition& def) {
    TimeSolverConfig cfg;
    cfg.steps_per_cycle = def.steps_per_cycle;
    cfg.cycles = def.cycles;
    cfg.rho_inf = def.rho_inf;
    cfg.newton_tol_orders = def.time_newton_tol_orders;
    cfg.max_newton_iters = def.time_max_newton_iters;
    cfg.krylov.tolerance = def.gmres_tol;
    cfg.krylov.restart = def.gmres_restart;
    cfg.krylov.max_iters = def.gmres_max_iters;
    cfg.threads = def.threads;
    return cfg;
}

TimeSolution solve_time(const CaseInputs& inputs, const TimeSolverConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const Mesh& mesh = inputs.mesh;
    const int nn = mesh.num_nodes();
    const auto geoms = precompute_geometry(mesh);
    const auto weights = nodal_volumes(mesh);
    const double T = inputs.def.period;
    const double dt = T / double(cfg.steps_per_cycle);

    const double am = cfg.steady ? 0.0 : 0.5 * (3.0 - cfg.rho_inf) / (1.0 + cfg.rho_inf);
    const double af = cfg.steady ? 1.0 : 1.0 / (1.0 + cfg.rho_inf);
    const double gamma = cfg.steady ? 1.0 : 0.5 + am - af;

    StepContext ctx{mesh, geoms, inputs.props, inputs.bcs, 0.0, cfg.threads};

    auto pattern = std::make_shared<NodePattern>(NodePattern::build(mesh));
    TangentOperator L;
    L.mesh = &mesh;
    SpectralBasis steady_basis(1, T);
    SpectralOperators steady_ops(steady_basis);
    L.ops = &steady_ops;
    L.pattern = pattern;
    L.P = BlockSparseMatrix(pattern, 1);
    L.mass.assign(size_t(pattern->nnz()), 0.0);  // no time coupling here
    L.threads = cfg.threads;

    TimeFields f;
    f.u.assign(size_t(nn) * 3, 0.0);
    f.udot.assign(size_t(nn) * 3, 0.0);
    f.p.assign(size_t(nn), initial_pressure_level(mesh, inputs.bcs));
    std::vector<double> g(size_t(nn) * 3), gdot(size_t(nn) * 3);
    inputs.time_dirichlet(0.0, g, gdot);
    for (int a = 0; a < nn; ++a)
        if (mesh.is_dirichlet_node[size_t(a)])
            for (int i = 0; i < 3; ++i) {
                f.u[size_t(a * 3 + i)] = g[size_t(a * 3 + i)];
                f.udot[size_t(a * 3 + i)] = gdot[size_t(a * 3 + i)];
            }

    TimeSolution sol;
    auto weighted_norm = [&](std::span<const double> field) {
        double s = 0.0;
        for (int a = 0; a < nn; ++a) {
            double m2 = 0.0;
            for (int i = 0; i < 3; ++i)
                m2 += field[size_t(a * 3 + i)] * field[size_t(a * 3 + i)];
            s += weights[size_t(a)] * m2;
        }
        return std::sqrt(s);
    };

    auto newton_step = [&](TimeFields& state, double t_new, int step_index) {
        // generalized-alpha predictor
        TimeFields next = state;
        if (!cfg.steady) {
            for (auto& v : next.udot)
                v *= (gamma - 1.0) / gamma;
        }
        inputs.time_dirichlet(t_new, g, gdot);
        for (int a = 0; a < nn; ++a)
            if (mesh.is_dirichlet_node[size_t(a)])
                for (int i = 0; i < 3; ++i) {
                    const size_t k = size_t(a * 3 + i);
                    if (cfg.steady) {
                        next.u[k] = g[k];
                        next.udot[k] = 0.0;
                    } else {
                        // acceleration consistent with landing on g(t_new)
                        next.udot[k] =
                            (g[k] - state.u[k]) / (gamma * dt) -
                            (1.0 - gamma) / gamma * state.udot[k];
                        next.u[k] = g[k];
                    }
                }

        std::vector<double> ual(size_t(nn) * 3), aal(size_t(nn) * 3);
        double r0 = -1.0;
        for (int k = 0; k <= cfg.max_newton_iters; ++k) {
            for (size_t j = 0; j < ual.size(); ++j) {
                ual[j] = state.u[j] + af * (next.u[j] - state.u[j]);
                aal[j] = state.udot[j] + am * (next.udot[j] - state.udot[j]);
            }
            // acceleration scale of the current iterate
            const double un = weighted_norm(cfg.steady ? next.u : ual);
            ctx.omega_hat =
                cfg.steady ? 0.0
                           : (un > 1e-14 ? weighted_norm(aal) / un : 0.0);
            const auto r = time_residual(ctx, cfg.steady ? next.u : ual,
                                         cfg.steady ? next.udot : aal, next.p);
            const double res = norm2(r);
            if (!std::isfinite(res))
                throw DivergenceError("time solver diverged at step " +
                                      std::to_string(step_index));
            if (r0 < 0.0)
                r0 = res;
            if (res <= 1e-30 || res <= r0 * std::pow(10.0, -cfg.newton_tol_orders))
                break;
            if (r0 > 0.0 && res / r0 > 1e4)
                throw DivergenceError("time solver diverged at step " +
                                      std::to_string(step_index));
            if (k == cfg.max_newton_iters)
                break;

            time_tangent(ctx, cfg.steady ? next.u : ual, am, cfg.steady ? 1.0 : af * gamma * dt,
                         L.P);
            const auto pc = jacobi_preconditioner(L);
            const auto lin = gmres_solve(L, r, pc, cfg.krylov);
            if (lin.status == KrylovStatus::Stagnated)
                throw StagnationError("time solver GMRES stagnated at step " +
                                      std::to_string(step_index));
            sol.total_newton_iters += 1;
            for (int a = 0; a < nn; ++a) {
                const bool fixed = mesh.is_dirichlet_node[size_t(a)] != 0;
                for (int i = 0; i < 3; ++i) {
                    if (fixed)
                        continue;
                    const size_t kk = size_t(a * 3 + i);
                    const double dv = lin.x[size_t(a * 4 + i)];
                    if (cfg.steady) {
                        next.u[kk] -= dv;
                    } else {
                        next.udot[kk] -= dv;
                        next.u[kk] -= gamma * dt * dv;
                    }
                }
                next.p[size_t(a)] -= lin.x[size_t(a * 4 + 3)];
            }
        }
        sol.omega_hat_last = ctx.omega_hat;
        state = std::move(next);
    };

    if (cfg.steady) {
        newton_step(f, 0.0, 0);
        sol.cycle.period = T;
        sol.cycle.steps = 0;
        sol.cycle.num_nodes = nn;
        sol.cycle.u = f.u;
        sol.cycle.p = f.p;
        sol.total_steps = 1;
        sol.total_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return sol;
    }

    const int steps = cfg.steps_per_cycle;
    CycleHistory& cyc = sol.cycle;
    cyc.period = T;
    cyc.steps = steps;
    cyc.num_nodes = nn;
    cyc.u.assign(size_t(steps + 1) * size_t(nn) * 3, 0.0);
    cyc.p.assign(size_t(steps + 1) * size_t(nn), 0.0);

    // previous-cycle velocity buffer for the periodicity gate
    std::vector<double> prev(size_t(steps) * size_t(nn) * 3, 0.0);
    double diff2 = 0.0, norm2acc = 0.0;

    for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
        const bool last = cycle == cfg.cycles - 1;
        if (last)
            std::copy(f.u.begin(), f.u.end(), cyc.u.begin());
        if (last)
            std::copy(f.p.begin(), f.p.end(), cyc.p.begin());
        if (cycle == cfg.cycles - 1 || cycle == cfg.cycles - 2) {
            diff2 = 0.0;
            norm2acc = 0.0;
        }
        for (int j = 0; j < steps; ++j) {
            const double t_new = (double(cycle) * steps + j + 1) * dt;
            newton_step(f, t_new, cycle * steps + j);
            sol.total_steps += 1;
            // cycle-to-cycle change, accumulated against the stored buffer
            double* buf = &prev[size_t(j) * size_t(nn) * 3];
            if (cycle > 0) {
                for (size_t k = 0; k < size_t(nn) * 3; ++k) {
                    const double d = f.u[k] - buf[k];
                    diff2 += d * d;
                    norm2acc += f.u[k] * f.u[k];
                }
            }
            std::copy(f.u.begin(), f.u.end(), buf);
            if (last) {
                std::copy(f.u.begin(), f.u.end(),
                          cyc.u.begin() + ptrdiff_t(size_t(j + 1) * size_t(nn) * 3));
                std::copy(f.p.begin(), f.p.end(),
                          cyc.p.begin() + ptrdiff_t(size_t(j + 1) * size_t(nn)));
            }
        }
        if (cycle > 0)
            sol.cycle_change = norm2acc > 0.0 ? std::sqrt(diff2 / norm2acc) : 0.0;
    }

    sol.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return sol;
}

void sample_cycle(const CycleHistory& cyc, double t, std::span<double> u_out,
                  std::span<double> p_out) {
    if (t < 0.0 || t > cyc.period)
        throw std::out_of_range("sample_cycle: time " + std::to_string(t) +
                                " outside the covered period [0, " +
                                std::to_string(cyc.period) + "]");
    if (cyc.steps == 0) {
        std::copy(cyc.u.begin(), cyc.u.end(), u_out.begin());
        std::copy(cyc.p.begin(), cyc.p.end(), p_out.begin());
        return;
    }
    const double x = t / cyc.period * double(cyc.steps);
    const int j0 = std::min(int(x), cyc.steps - 1);
    const double f = x - double(j0);
    const auto u0 = cyc.u_at(j0), u1 = cyc.u_at(j0 + 1);
    const auto p0 = cyc.p_at(j0), p1 = cyc.p_at(j0 + 1);
    for (size_t k = 0; k < u_out.size(); ++k)
        u_out[k] = u0[k] + f * (u1[k] - u0[k]);
    for (size_t k = 0; k < p_out.size(); ++k)
        p_out[k] = p0[k] + f * (p1[k] - p0[k]);
}

SampledFields sample_cycle(const CycleHistory& cyc, const SpectralBasis& basis) {
    const int N = basis.time_points;
    const int nn = cyc.num_nodes;
    SampledFields out;
    out.u.assign(size_t(nn) * 3 * size_t(N), 0.0);
    out.p.assign(size_t(nn) * size_t(N), 0.0);
    std::vector<double> u(size_t(nn) * 3), p(static_cast<size_t>(nn));
    for (int n = 0; n < N; ++n) {
        sample_cycle(cyc, basis.sample_time(n), u, p);
        for (int a = 0; a < nn; ++a) {
            for (int i = 0; i < 3; ++i)
                out.u[size_t((a * 3 + i) * N + n)] = u[size_t(a * 3 + i)];
            out.p[size_t(a * N + n)] = p[size_t(a)];
        }
    }
    return out;
}

} // namespace hbflow
