#include "hbflow/assembly.hpp"
#include "hbflow/errors.hpp"
#include "hbflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace hbflow {

namespace {

// 4-point Gauss rule for tetrahedra, exact through quadratic integrands.
constexpr double kTetA = 0.5854101966249684544613761;
constexpr double kTetB = 0.1381966011250105151795414;
constexpr double kTetShape[4][4] = {{kTetA, kTetB, kTetB, kTetB},
                                    {kTetB, kTetA, kTetB, kTetB},
                                    {kTetB, kTetB, kTetA, kTetB},
                                    {kTetB, kTetB, kTetB, kTetA}};

// 3-point rule on triangles, exact through quadratic integrands.
constexpr double kTriShape[3][3] = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};

inline double xi_quadratic(const ElementGeometry& g, const double* v) {
    // v . xi v for a 3-vector
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            s += v[i] * g.xi_at(i, j) * v[j];
    return s;
}

} // namespace

void FluidProperties::validate() const {
    if (!(rho > 0.0) || !(mu > 0.0))
        throw ParseError("fluid density and viscosity must be strictly positive");
}

void compute_tau(const ElementGeometry& geom, std::span<const double> u_qp,
                 const FluidProperties& props, std::span<double> tau) {
    const int N = int(tau.size());
    const double nu = props.mu / props.rho;
    const double diff = kTauConstant * nu * nu * geom.xi_double_dot();
    for (int n = 0; n < N; ++n) {
        const double un[3] = {u_qp[size_t(n)], u_qp[size_t(N + n)], u_qp[size_t(2 * N + n)]};
        const double arg = xi_quadratic(geom, un) + diff;
        if (!(arg > 0.0))
            throw std::domain_error(
                "singular stabilization parameter: zero velocity with zero viscosity");
        tau[size_t(n)] = 1.0 / std::sqrt(arg);
    }
}

std::array<double, 16> element_mass(const ElementGeometry& geom, double rho) {
    std::array<double, 16> m;
    const double diag = rho * geom.volume / 10.0;
    const double off = rho * geom.volume / 20.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            m[size_t(4 * a + b)] = (a == b) ? diag : off;
    return m;
}

double element_womersley(double h, int time_points, double omega, double nu) {
    return h * std::sqrt(double(time_points - 1) * omega / (2.0 * nu));
}

namespace {

// Per-element scratch sized once per sweep.
struct ElementWork {
    std::vector<double> grad_u;   // [i*3+j]*N
    std::vector<double> grad_p;   // i*N
    std::vector<double> div_u;    // N
    std::vector<double> uq;       // i*N
    std::vector<double> huq;      // i*N
    std::vector<double> lq;       // i*N (strong momentum residual)
    std::vector<double> tau;      // N
    std::vector<double> adv;      // a*N (u . grad N_a)
    std::vector<double> umean;    // i*N, element-mean velocity (tau mode)

    explicit ElementWork(int N)
        : grad_u(size_t(9 * N)), grad_p(size_t(3 * N)), div_u(size_t(N)), uq(size_t(3 * N)),
          huq(size_t(3 * N)), lq(size_t(3 * N)), tau(size_t(N)), adv(size_t(4 * N)),
          umean(size_t(3 * N)) {}
};

void element_fields(const ElementGeometry& geom, int N, std::span<const double> u,
                    std::span<const double> p, ElementWork& w) {
    std::fill(w.grad_u.begin(), w.grad_u.end(), 0.0);
    std::fill(w.grad_p.begin(), w.grad_p.end(), 0.0);
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < 3; ++i) {
            const double* ua = &u[size_t((a * 3 + i) * N)];
            for (int j = 0; j < 3; ++j) {
                const double g = geom.grad_N[size_t(a)][size_t(j)];
                double* out = &w.grad_u[size_t((i * 3 + j) * N)];
                for (int n = 0; n < N; ++n)
                    out[n] += g * ua[n];
            }
        }
    for (int a = 0; a < 4; ++a) {
        const double* pa = &p[size_t(a * N)];
        for (int i = 0; i < 3; ++i) {
            const double g = geom.grad_N[size_t(a)][size_t(i)];
            double* out = &w.grad_p[size_t(i * N)];
            for (int n = 0; n < N; ++n)
                out[n] += g * pa[n];
        }
    }
    for (int n = 0; n < N; ++n)
        w.div_u[size_t(n)] = w.grad_u[size_t(0 * N + n)] + w.grad_u[size_t(4 * N + n)] +
                             w.grad_u[size_t(8 * N + n)];
}

void interpolate_qp(int q, int N, std::span<const double> u, std::span<const double> hu,
                    ElementWork& w) {
    for (int i = 0; i < 3; ++i) {
        double* uq = &w.uq[size_t(i * N)];
        double* huq = &w.huq[size_t(i * N)];
        std::fill(uq, uq + N, 0.0);
        std::fill(huq, huq + N, 0.0);
        for (int a = 0; a < 4; ++a) {
            const double s = kTetShape[q][a];
            const double* ua = &u[size_t((a * 3 + i) * N)];
            const double* hua = &hu[size_t((a * 3 + i) * N)];
            for (int n = 0; n < N; ++n) {
                uq[n] += s * ua[n];
                huq[n] += s * hua[n];
            }
        }
    }
}

} // namespace

void element_residual(const ElementGeometry& geom, int N, std::span<const double> u,
                      std::span<const double> p, std::span<const double> hu,
                      const FluidProperties& props, const AssemblyConfig& cfg,
                      std::span<double> r_m, std::span<double> r_c, std::span<double> s) {
    static thread_local std::unique_ptr<ElementWork> work;
    if (!work || int(work->tau.size()) != N)
        work = std::make_unique<ElementWork>(N);
    ElementWork& w = *work;

    element_fields(geom, N, u, p, w);
    const double V = geom.volume;
    const double rho = props.rho;
    const double mu = props.mu;
    const double wq = V / 4.0;

    // Exact constant-gradient terms: viscous stress, pressure gradient and
    // continuity Galerkin rows, plus the consistent-mass acceleration.
    double pbar_scale[4];  // int N_a = V/4
    for (int a = 0; a < 4; ++a)
        pbar_scale[a] = V / 4.0;
    const auto mass = element_mass(geom, 1.0);
    for (int a = 0; a < 4; ++a) {
        for (int i = 0; i < 3; ++i) {
            double* out = &r_m[size_t((a * 3 + i) * N)];
            // mu * grad N_a . grad u_i
            for (int j = 0; j < 3; ++j) {
                const double c = mu * V * geom.grad_N[size_t(a)][size_t(j)];
                const double* gu = &w.grad_u[size_t((i * 3 + j) * N)];
                for (int n = 0; n < N; ++n)
                    out[n] += c * gu[n];
            }
            // -grad N_a,i * int p
            const double gi = geom.grad_N[size_t(a)][size_t(i)];
            for (int b = 0; b < 4; ++b) {
                const double* pb = &p[size_t(b * N)];
                const double c = -gi * pbar_scale[b] * 1.0;
                for (int n = 0; n < N; ++n)
                    out[n] += c * pb[n];
            }
            // rho * int N_a N_b * (H u)_b
            for (int b = 0; b < 4; ++b) {
                const double c = rho * mass[size_t(4 * a + b)];
                const double* hub = &hu[size_t((b * 3 + i) * N)];
                for (int n = 0; n < N; ++n)
                    out[n] += c * hub[n];
            }
        }
        // continuity Galerkin: int N_a div u = (V/4) div u
        double* rc = &r_c[size_t(a * N)];
        for (int n = 0; n < N; ++n)
            rc[n] += wq * w.div_u[size_t(n)];
    }

    // Element-mean velocity for the optional tau mode.
    if (cfg.tau_mode == TauMode::ElementMean) {
        for (int i = 0; i < 3; ++i) {
            double* um = &w.umean[size_t(i * N)];
            std::fill(um, um + N, 0.0);
            for (int a = 0; a < 4; ++a) {
                const double* ua = &u[size_t((a * 3 + i) * N)];
                for (int n = 0; n < N; ++n)
                    um[n] += 0.25 * ua[n];
            }
        }
        compute_tau(geom, w.umean, props, w.tau);
    }

    for (int q = 0; q < 4; ++q) {
        interpolate_qp(q, N, u, hu, w);
        if (cfg.tau_mode == TauMode::QuadraturePoint)
            compute_tau(geom, w.uq, props, w.tau);

        // Strong momentum residual (diffusion drops for linear elements).
        for (int i = 0; i < 3; ++i) {
            double* lq = &w.lq[size_t(i * N)];
            const double* huq = &w.huq[size_t(i * N)];
            const double* gp = &w.grad_p[size_t(i * N)];
            for (int n = 0; n < N; ++n) {
                double conv = 0.0;
                for (int j = 0; j < 3; ++j)
                    conv += w.uq[size_t(j * N + n)] * w.grad_u[size_t((i * 3 + j) * N + n)];
                lq[n] = rho * huq[n] + rho * conv + gp[n];
            }
        }
        for (int a = 0; a < 4; ++a) {
            double* adv = &w.adv[size_t(a * N)];
            for (int n = 0; n < N; ++n) {
                double v = 0.0;
                for (int j = 0; j < 3; ++j)
                    v += w.uq[size_t(j * N + n)] * geom.grad_N[size_t(a)][size_t(j)];
                adv[n] = v;
            }
        }

        for (int a = 0; a < 4; ++a) {
            const double sa = kTetShape[q][a];
            const double* adv = &w.adv[size_t(a * N)];
            for (int i = 0; i < 3; ++i) {
                double* out = &r_m[size_t((a * 3 + i) * N)];
                double* sout = &s[size_t((a * 3 + i) * N)];
                const double* lq = &w.lq[size_t(i * N)];
                for (int n = 0; n < N; ++n) {
                    double conv = 0.0;
                    for (int j = 0; j < 3; ++j)
                        conv += w.uq[size_t(j * N + n)] * w.grad_u[size_t((i * 3 + j) * N + n)];
                    const double tl = w.tau[size_t(n)] * lq[n];
                    // Galerkin convection + advective least-squares row.
                    out[n] += wq * (rho * sa * conv + adv[n] * tl);
                    // Time-coupling least-squares row, H applied by the caller.
                    sout[n] += wq * sa * tl;
                }
            }
            double* rc = &r_c[size_t(a * N)];
            for (int n = 0; n < N; ++n) {
                double v = 0.0;
                for (int i = 0; i < 3; ++i)
                    v += geom.grad_N[size_t(a)][size_t(i)] * w.tau[size_t(n)] *
                         w.lq[size_t(i * N + n)];
                rc[n] += wq * v / rho;
            }
        }
    }
}

void element_tangent_p(const ElementGeometry& geom, int N, std::span<const double> u,
                       const FluidProperties& props, const AssemblyConfig& cfg,
                       std::span<double> K, std::span<double> G, std::span<double> D,
                       std::span<double> L) {
    static thread_local std::unique_ptr<ElementWork> work;
    if (!work || int(work->tau.size()) != N)
        work = std::make_unique<ElementWork>(N);
    ElementWork& w = *work;

    const double V = geom.volume;
    const double rho = props.rho;
    const double mu = props.mu;
    const double wq = V / 4.0;

    // Constant terms: viscous stiffness, Galerkin pressure coupling, the
    // pressure-free mass augmentation from pseudo-time stepping.
    const auto mass = element_mass(geom, 1.0);
    const bool pseudo = std::isfinite(cfg.pseudo_dt);
    const double pseudo_c = pseudo ? cfg.pseudo_c1 * rho / cfg.pseudo_dt : 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            double gg = 0.0;
            for (int j = 0; j < 3; ++j)
                gg += geom.grad_N[size_t(a)][size_t(j)] * geom.grad_N[size_t(b)][size_t(j)];
            const double kc = mu * V * gg + pseudo_c * mass[size_t(4 * a + b)];
            double* kab = &K[size_t((a * 4 + b) * N)];
            for (int n = 0; n < N; ++n)
                kab[n] += kc;
            for (int i = 0; i < 3; ++i) {
                const double gplus = -geom.grad_N[size_t(a)][size_t(i)] * V / 4.0;
                const double dplus = geom.grad_N[size_t(b)][size_t(i)] * V / 4.0;
                double* gab = &G[size_t(((a * 4 + b) * 3 + i) * N)];
                double* dab = &D[size_t(((a * 4 + b) * 3 + i) * N)];
                for (int n = 0; n < N; ++n) {
                    gab[n] += gplus;
                    dab[n] += dplus;
                }
            }
        }

    if (cfg.tau_mode == TauMode::ElementMean) {
        for (int i = 0; i < 3; ++i) {
            double* um = &w.umean[size_t(i * N)];
            std::fill(um, um + N, 0.0);
            for (int a = 0; a < 4; ++a) {
                const double* ua = &u[size_t((a * 3 + i) * N)];
                for (int n = 0; n < N; ++n)
                    um[n] += 0.25 * ua[n];
            }
        }
        compute_tau(geom, w.umean, props, w.tau);
    }

    for (int q = 0; q < 4; ++q) {
        for (int i = 0; i < 3; ++i) {
            double* uq = &w.uq[size_t(i * N)];
            std::fill(uq, uq + N, 0.0);
            for (int a = 0; a < 4; ++a) {
                const double sa = kTetShape[q][a];
                const double* ua = &u[size_t((a * 3 + i) * N)];
                for (int n = 0; n < N; ++n)
                    uq[n] += sa * ua[n];
            }
        }
        if (cfg.tau_mode == TauMode::QuadraturePoint)
            compute_tau(geom, w.uq, props, w.tau);
        for (int a = 0; a < 4; ++a) {
            double* adv = &w.adv[size_t(a * N)];
            for (int n = 0; n < N; ++n) {
                double v = 0.0;
                for (int j = 0; j < 3; ++j)
                    v += w.uq[size_t(j * N + n)] * geom.grad_N[size_t(a)][size_t(j)];
                adv[n] = v;
            }
        }

        for (int a = 0; a < 4; ++a) {
            const double sa = kTetShape[q][a];
            const double* adva = &w.adv[size_t(a * N)];
            for (int b = 0; b < 4; ++b) {

                const double* advb = &w.adv[size_t(b * N)];
                double* kab = &K[size_t((a * 4 + b) * N)];
                double* lab = &L[size_t((a * 4 + b) * N)];
                for (int n = 0; n < N; ++n) {
                    const double tn = w.tau[size_t(n)];
                    kab[n] += wq * rho * (sa * advb[n] + adva[n] * tn * advb[n]);
                }
                // L: (1/rho) grad N_a . grad N_b tau (constant gradients, tau at qp)
                double gg = 0.0;
                for (int j = 0; j < 3; ++j)
                    gg += geom.grad_N[size_t(a)][size_t(j)] * geom.grad_N[size_t(b)][size_t(j)];
                for (int n = 0; n < N; ++n)
                    lab[n] += wq * gg * w.tau[size_t(n)] / rho;
                for (int i = 0; i < 3; ++i) {
                    double* gab = &G[size_t(((a * 4 + b) * 3 + i) * N)];
                    double* dab = &D[size_t(((a * 4 + b) * 3 + i) * N)];
                    const double gbi = geom.grad_N[size_t(b)][size_t(i)];
                    const double gaj = geom.grad_N[size_t(a)][size_t(i)];
                    for (int n = 0; n < N; ++n) {
                        const double tn = w.tau[size_t(n)];
                        gab[n] += wq * adva[n] * tn * gbi;
                        dab[n] += wq * gaj * tn * advb[n];
                    }
                }
            }
        }
    }
    
}

void accumulate_boundary_terms(const BoundaryPatch& patch, std::span<const double> h,
                               const HarmonicState& state, const FluidProperties& props,
                               double backflow_beta, std::span<double> residual) {
    const int N = state.basis.time_points;
    std::vector<double> uq(size_t(3 * N));
    for (size_t f = 0; f < patch.facets.size(); ++f) {
        const auto& fac = patch.facets[f];
        const Vec3& nvec = patch.normals[f];
        const double wq = patch.facet_areas[f] / 3.0;
        for (int q = 0; q < 3; ++q) {
            std::fill(uq.begin(), uq.end(), 0.0);
            for (int a = 0; a < 3; ++a) {
                const double sa = kTriShape[q][a];
                for (int i = 0; i < 3; ++i) {
                    const auto ua = state.u(fac[size_t(a)], i);
                    for (int n = 0; n < N; ++n)
                        uq[size_t(i * N + n)] += sa * ua[size_t(n)];
                }
            }
            for (int a = 0; a < 3; ++a) {
                const double sa = kTriShape[q][a];
                const int node = fac[size_t(a)];
                for (int i = 0; i < 3; ++i) {
                    double* out = &residual[size_t((node * 4 + i) * N)];
                    for (int n = 0; n < N; ++n) {
                        double un = 0.0;
                        for (int j = 0; j < 3; ++j)
                            un += uq[size_t(j * N + n)] * nvec[size_t(j)];
                        const double neg = un < 0.0 ? un : 0.0;
                        out[n] += wq * sa *
                                  (-h[size_t(n)] * nvec[size_t(i)] -
                                   0.5 * props.rho * backflow_beta * neg * uq[size_t(i * N + n)]);
                    }
                }
            }
        }
    }
}

double initial_pressure_level(const Mesh& mesh, const BoundaryConditionSet& bcs) {
    double wsum = 0.0, acc = 0.0;
    for (const auto& nb : bcs.neumann) {
        const auto& patch = mesh.patches[size_t(nb.patch_index)];
        double hbar = 0.0;
        for (double h : nb.h)
            hbar += h;
        hbar /= double(nb.h.size());
        acc += patch.area * (-hbar);
        wsum += patch.area;
    }
    return wsum > 0.0 ? acc / wsum : 0.0;
}

void install_dirichlet(const Mesh& mesh, const BoundaryConditionSet& bcs, HarmonicState& state) {
    const int N = state.basis.time_points;
    for (int a = 0; a < mesh.num_nodes(); ++a) {
        if (!mesh.is_dirichlet_node[size_t(a)])
            continue;
        for (int i = 0; i < 3; ++i) {
            auto ua = state.u(a, i);
            const double* g = &bcs.dirichlet_g[size_t((a * 3 + i) * N)];
            for (int n = 0; n < N; ++n)
                ua[size_t(n)] = g[n];
        }
    }
}

std::vector<double> assemble_residual(const Mesh& mesh,
                                      const std::vector<ElementGeometry>& geoms,
                                      const HarmonicState& state, const SpectralOperators& ops,
                                      const FluidProperties& props,
                                      const BoundaryConditionSet& bcs, const AssemblyConfig& cfg,
                                      int threads) {
    const int N = state.basis.time_points;
    const int nn = mesh.num_nodes();
    const size_t total = size_t(nn) * 4 * size_t(N);

    // Nodal time derivative, batched per chunk.
    std::vector<double> hu(size_t(nn) * 3 * size_t(N));
    parallel_for_chunks(threads, nn, [&](int, int b, int e) {
        auto ws = ops.make_workspace();
        for (int a = b; a < e; ++a) {
            const double* u0 = &state.data[size_t(a) * 4 * size_t(N)];
            std::copy(u0, u0 + 3 * N, &hu[size_t(a) * 3 * size_t(N)]);
        }
        std::span<double> chunk{&hu[size_t(b) * 3 * size_t(N)], size_t(e - b) * 3 * size_t(N)};
        ops.apply_many(chunk, chunk, (e - b) * 3, *ws);
    });

    const int nthreads =
        (threads <= 1 || mesh.num_elements() < 2 * threads) ? 1 : threads;
    std::vector<std::vector<double>> r_acc(static_cast<size_t>(nthreads));
    std::vector<std::vector<double>> s_acc(static_cast<size_t>(nthreads));
    parallel_for_chunks(nthreads, mesh.num_elements(), [&](int t, int b, int e) {
        auto& r = r_acc[size_t(t)];
        auto& sacc = s_acc[size_t(t)];
        r.assign(total, 0.0);
        sacc.assign(size_t(nn) * 3 * size_t(N), 0.0);
        std::vector<double> eu(size_t(12 * N)), ep(size_t(4 * N)), ehu(size_t(12 * N));
        std::vector<double> rm(size_t(12 * N)), rc(size_t(4 * N)), es(size_t(12 * N));
        for (int el = b; el < e; ++el) {
            const auto& conn = mesh.elements[size_t(el)];
            for (int a = 0; a < 4; ++a) {
                const int node = conn[size_t(a)];
                for (int i = 0; i < 3; ++i) {
                    const auto ua = state.u(node, i);
                    std::copy(ua.begin(), ua.end(), &eu[size_t((a * 3 + i) * N)]);
                    std::copy(&hu[size_t((node * 3 + i) * N)], &hu[size_t((node * 3 + i + 1) * N)],
                              &ehu[size_t((a * 3 + i) * N)]);
                }
                const auto pa = state.p(node);
                std::copy(pa.begin(), pa.end(), &ep[size_t(a * N)]);
            }
            std::fill(rm.begin(), rm.end(), 0.0);
            std::fill(rc.begin(), rc.end(), 0.0);
            std::fill(es.begin(), es.end(), 0.0);
            element_residual(geoms[size_t(el)], N, eu, ep, ehu, props, cfg, rm, rc, es);
            for (int a = 0; a < 4; ++a) {
                const int node = conn[size_t(a)];
                for (int i = 0; i < 3; ++i) {
                    double* out = &r[size_t((node * 4 + i) * N)];
                    double* souts = &sacc[size_t((node * 3 + i) * N)];
                    const double* rmi = &rm[size_t((a * 3 + i) * N)];
                    const double* esi = &es[size_t((a * 3 + i) * N)];
                    for (int n = 0; n < N; ++n) {
                        out[n] += rmi[n];
                        souts[n] += esi[n];
                    }
                }
                double* outp = &r[size_t((node * 4 + 3) * N)];
                const double* rca = &rc[size_t(a * N)];
                for (int n = 0; n < N; ++n)
                    outp[n] += rca[n];
            }
        }
    });

    // Deterministic reduction in thread order.
    std::vector<double>& r = r_acc[0];
    std::vector<double>& s = s_acc[0];
    for (int t = 1; t < nthreads; ++t) {
        for (size_t k = 0; k < total; ++k)
            r[k] += r_acc[size_t(t)][k];
        for (size_t k = 0; k < s.size(); ++k)
            s[k] += s_acc[size_t(t)][k];
    }

    // Complete the least-squares rows: subtract H * s node-wise (batched,
    // in place over the accumulator).
    parallel_for_chunks(threads, nn, [&](int, int b, int e) {
        auto ws = ops.make_workspace();
        std::span<double> chunk{&s[size_t(b) * 3 * size_t(N)], size_t(e - b) * 3 * size_t(N)};
        ops.apply_many(chunk, chunk, (e - b) * 3, *ws);
        for (int a = b; a < e; ++a) {
            double* out = &r[size_t(a) * 4 * size_t(N)];
            const double* hs = &s[size_t(a) * 3 * size_t(N)];
            for (int j = 0; j < 3 * N; ++j)
                out[j] -= hs[j];
        }
    });

    for (const auto& nb : bcs.neumann)
        accumulate_boundary_terms(mesh.patches[size_t(nb.patch_index)], nb.h, state, props,
                                  bcs.backflow_beta, r);

    // Dirichlet velocity rows are constrained: zero them.
    for (int a = 0; a < nn; ++a)
        if (mesh.is_dirichlet_node[size_t(a)])
            std::fill(&r[size_t((a * 4) * N)], &r[size_t((a * 4 + 3) * N)], 0.0);

    std::vector<double> out = std::move(r);
    return out;
}

void assemble_tangent(const Mesh& mesh, const std::vector<ElementGeometry>& geoms,
                      const HarmonicState& state, const FluidProperties& props,
                      const BoundaryConditionSet& bcs, const AssemblyConfig& cfg,
                      BlockSparseMatrix& P) {
    const int N = state.basis.time_points;
    P.zero();
    const auto& pat = *P.pattern;

    std::vector<double> eu(size_t(12 * N));
    std::vector<double> K(size_t(16 * N)), G(size_t(48 * N)), D(size_t(48 * N)),
        L(size_t(16 * N));
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const auto& conn = mesh.elements[size_t(el)];
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < 3; ++i) {
                const auto ua = state.u(conn[size_t(a)], i);
                std::copy(ua.begin(), ua.end(), &eu[size_t((a * 3 + i) * N)]);
            }
        std::fill(K.begin(), K.end(), 0.0);
        std::fill(G.begin(), G.end(), 0.0);
        std::fill(D.begin(), D.end(), 0.0);
        std::fill(L.begin(), L.end(), 0.0);
        element_tangent_p(geoms[size_t(el)], N, eu, props, cfg, K, G, D, L);

        for (int a = 0; a < 4; ++a) {
            const int A = conn[size_t(a)];
            const bool a_fixed = mesh.is_dirichlet_node[size_t(A)] != 0;
            for (int b = 0; b < 4; ++b) {
                const int B = conn[size_t(b)];
                const bool b_fixed = mesh.is_dirichlet_node[size_t(B)] != 0;
                const int blk = pat.find(A, B);
                double* vals = P.block(blk);
                // velocity-velocity diagonal (shared across components)
                if (!a_fixed && !b_fixed) {
                    const double* kab = &K[size_t((a * 4 + b) * N)];
                    double* slot = vals + BlockSparseMatrix::kSlotK * N;
                    for (int n = 0; n < N; ++n)
                        slot[n] += kab[n];
                }
                // velocity-pressure and pressure-velocity couplings
                for (int i = 0; i < 3; ++i) {
                    if (!a_fixed) {
                        const double* gab = &G[size_t(((a * 4 + b) * 3 + i) * N)];
                        double* slot = vals + (BlockSparseMatrix::kSlotG + i) * N;
                        for (int n = 0; n < N; ++n)
                            slot[n] += gab[n];
                    }
                    if (!b_fixed) {
                        const double* dab = &D[size_t(((a * 4 + b) * 3 + i) * N)];
                        double* slot = vals + (BlockSparseMatrix::kSlotD + i) * N;
                        for (int n = 0; n < N; ++n)
                            slot[n] += dab[n];
                    }
                }
                const double* lab = &L[size_t((a * 4 + b) * N)];
                double* slot = vals + BlockSparseMatrix::kSlotL * N;
                for (int n = 0; n < N; ++n)
                    slot[n] += lab[n];
            }
        }
    }

    // Optional backflow contribution to the tangent (frozen coefficient).
    if (cfg.backflow_in_tangent) {
        std::vector<double> uq(size_t(3 * N));
        for (const auto& nb : bcs.neumann) {
            const auto& patch = mesh.patches[size_t(nb.patch_index)];
            for (size_t f = 0; f < patch.facets.size(); ++f) {
                const auto& fac = patch.facets[f];
                const Vec3& nvec = patch.normals[f];
                const double wq = patch.facet_areas[f] / 3.0;
                for (int q = 0; q < 3; ++q) {
                    std::fill(uq.begin(), uq.end(), 0.0);
                    for (int a = 0; a < 3; ++a) {
                        const double sa = kTriShape[q][a];
                        for (int i = 0; i < 3; ++i) {
                            const auto ua = state.u(fac[size_t(a)], i);
                            for (int n = 0; n < N; ++n)
                                uq[size_t(i * N + n)] += sa * ua[size_t(n)];
                        }
                    }
                    for (int a = 0; a < 3; ++a) {
                        const int A = fac[size_t(a)];
                        if (mesh.is_dirichlet_node[size_t(A)])
                            continue;
                        for (int b = 0; b < 3; ++b) {
                            const int B = fac[size_t(b)];
                            if (mesh.is_dirichlet_node[size_t(B)])
                                continue;
                            const int blk = pat.find(A, B);
                            double* vals = P.block(blk);
                            const double c =
                                wq * kTriShape[q][a] * kTriShape[q][b] * 0.5 * props.rho *
                                bcs.backflow_beta;
                            double* slot = vals + BlockSparseMatrix::kSlotK * N;
                            for (int n = 0; n < N; ++n) {
                                double un = 0.0;
                                for (int j = 0; j < 3; ++j)
                                    un += uq[size_t(j * N + n)] * nvec[size_t(j)];
                                if (un < 0.0)
                                    slot[n] -= c * un;
                            }
                        }
                    }
                }
            }
        }
    }

    // Identity rows for constrained velocity dofs.
    for (int a : mesh.dirichlet_nodes) {
        const int blk = pat.find(a, a);
        double* slot = P.block(blk) + BlockSparseMatrix::kSlotK * N;
        for (int n = 0; n < N; ++n)
            slot[n] = 1.0;
    }
}

std::vector<double> assemble_mass(const Mesh& mesh, const std::vector<ElementGeometry>& geoms,
                                  double rho, const NodePattern& pattern) {
    std::vector<double> mass(size_t(pattern.nnz()), 0.0);
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const auto& conn = mesh.elements[size_t(el)];
        const auto m = element_mass(geoms[size_t(el)], rho);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const int blk = pattern.find(conn[size_t(a)], conn[size_t(b)]);
                mass[size_t(blk)] += m[size_t(4 * a + b)];
            }
    }
    return mass;
}

} // namespace hbflow
