#include "hbflow/linalg.hpp"
#include "hbflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hbflow {

NodePattern NodePattern::build(const Mesh& mesh) {
    NodePattern pat;
    pat.num_nodes = mesh.num_nodes();
    std::vector<std::vector<int>> adj(size_t(pat.num_nodes));
    for (const auto& el : mesh.elements)
        for (int a : el)
            for (int b : el)
                adj[size_t(a)].push_back(b);
    pat.row_ptr.resize(size_t(pat.num_nodes) + 1, 0);
    for (int a = 0; a < pat.num_nodes; ++a) {
        auto& row = adj[size_t(a)];
        row.push_back(a);  // keep the diagonal even for isolated nodes
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        pat.row_ptr[size_t(a) + 1] = pat.row_ptr[size_t(a)] + int(row.size());
    }
    pat.col_idx.reserve(size_t(pat.row_ptr.back()));
    for (const auto& row : adj)
        pat.col_idx.insert(pat.col_idx.end(), row.begin(), row.end());
    return pat;
}

int NodePattern::find(int a, int b) const {
    const int lo = row_ptr[size_t(a)], hi = row_ptr[size_t(a) + 1];
    const auto begin = col_idx.begin() + lo, end = col_idx.begin() + hi;
    const auto it = std::lower_bound(begin, end, b);
    if (it == end || *it != b)
        return -1;
    return int(it - col_idx.begin());
}

void BlockSparseMatrix::matvec(std::span<const double> y, std::span<double> out, int threads,
                               bool accumulate) const {
    const int N = time_points;
    const auto& pat = *pattern;
    if (y.size() != size_t(pat.num_nodes) * 4 * size_t(N) || out.size() != y.size())
        throw std::invalid_argument("block matvec: vector size mismatch");

    parallel_for_chunks(threads, pat.num_nodes, [&](int, int abegin, int aend) {
        for (int a = abegin; a < aend; ++a) {
            double* oa = &out[size_t(a) * 4 * size_t(N)];
            if (!accumulate)
                std::fill(oa, oa + 4 * N, 0.0);
            for (int k = pat.row_ptr[size_t(a)]; k < pat.row_ptr[size_t(a) + 1]; ++k) {
                const int b = pat.col_idx[size_t(k)];
                const double* blk = block(k);
                const double* yb = &y[size_t(b) * 4 * size_t(N)];
                const double* kd = blk + kSlotK * N;
                const double* yp = yb + 3 * N;
                double* op = oa + 3 * N;
                for (int i = 0; i < 3; ++i) {
                    const double* gd = blk + (kSlotG + i) * N;
                    const double* dd = blk + (kSlotD + i) * N;
                    const double* yu = yb + i * N;
                    double* ou = oa + i * N;
                    for (int n = 0; n < N; ++n) {
                        ou[n] += kd[n] * yu[n] + gd[n] * yp[n];
                        op[n] += dd[n] * yu[n];
                    }
                }
                const double* ld = blk + kSlotL * N;
                for (int n = 0; n < N; ++n)
                    op[n] += ld[n] * yp[n];
            }
        }
    });
}

void TangentOperator::matvec(std::span<const double> y, std::span<double> out) const {
    const int N = time_points();
    const int nn = mesh->num_nodes();
    if (y.size() != size() || out.size() != size())
        throw std::invalid_argument("tangent matvec: vector size mismatch");

    P.matvec(y, out, threads, /*accumulate=*/false);

    // C part: gather mass-weighted velocity series, then batched H
    // transforms per group of nodes. Dirichlet velocity rows and columns
    // are masked.
    const auto& pat = *pattern;
    parallel_for_chunks(threads, nn, [&](int, int abegin, int aend) {
        auto ws = ops->make_workspace();
        constexpr int kGroup = SpectralOperators::kBatch / 3;
        std::vector<double> tmp(size_t(kGroup) * 3 * size_t(N));
        std::array<int, kGroup> group{};
        int g = 0;
        auto flush = [&]() {
            if (g == 0)
                return;
            ops->apply_many(tmp, tmp, 3 * g, *ws);
            for (int k = 0; k < g; ++k) {
                double* oa = &out[size_t(group[size_t(k)]) * 4 * size_t(N)];
                const double* t = &tmp[size_t(k) * 3 * size_t(N)];
                for (int j = 0; j < 3 * N; ++j)
                    oa[j] += t[j];
            }
            g = 0;
        };
        for (int a = abegin; a < aend; ++a) {
            if (mesh->is_dirichlet_node[size_t(a)])
                continue;
            double* t = &tmp[size_t(g) * 3 * size_t(N)];
            std::fill(t, t + 3 * N, 0.0);
            for (int k = pat.row_ptr[size_t(a)]; k < pat.row_ptr[size_t(a) + 1]; ++k) {
                const int b = pat.col_idx[size_t(k)];
                if (mesh->is_dirichlet_node[size_t(b)])
                    continue;
                const double m = mass[size_t(k)];
                const double* yb = &y[size_t(b) * 4 * size_t(N)];
                for (int j = 0; j < 3 * N; ++j)
                    t[j] += m * yb[j];
            }
            group[size_t(g)] = a;
            if (++g == kGroup)
                flush();
        }
        flush();
    });
}

JacobiPreconditioner jacobi_preconditioner(const TangentOperator& L) {
    const int N = L.time_points();
    const int nn = L.mesh->num_nodes();
    JacobiPreconditioner pc;
    pc.inv_diag.assign(size_t(nn) * 4 * size_t(N), 1.0);
    for (int a = 0; a < nn; ++a) {
        const int k = L.pattern->find(a, a);
        const double* blk = L.P.block(k);
        double* d = &pc.inv_diag[size_t(a) * 4 * size_t(N)];
        for (int c = 0; c < 4; ++c) {
            const double* diag =
                blk + (c < 3 ? BlockSparseMatrix::kSlotK : BlockSparseMatrix::kSlotL) * N;
            for (int n = 0; n < N; ++n) {
                const double v = diag[n];
                if (std::abs(v) < 1e-30) {
                    pc.degenerate_entries += 1;
                    d[c * N + n] = 1.0;
                } else {
                    d[c * N + n] = 1.0 / v;
                }
            }
        }
    }
    return pc;
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

} // namespace

KrylovResult gmres_solve(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                         std::span<const double> rhs, std::span<const double> inv_diag,
                         const KrylovConfig& cfg) {
    // Split Jacobi scaling: solve (S A S) w = S b with S = diag(sqrt(|inv_diag|))
    // and x = S w, which balances the equation scales so the loose relative
    // tolerance is meaningful row-wise. The reported residual is that of the
    // scaled system.
    const size_t n = rhs.size();
    KrylovResult res;
    res.x.assign(n, 0.0);

    std::vector<double> scale(n);
    for (size_t i = 0; i < n; ++i)
        scale[i] = std::sqrt(std::abs(inv_diag[i]));

    std::vector<double> b(n);
    for (size_t i = 0; i < n; ++i)
        b[i] = scale[i] * rhs[i];
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        res.relative_residual = 0.0;
        return res;
    }

    const int m = std::max(1, cfg.restart);
    std::vector<std::vector<double>> V;
    std::vector<double> H(size_t(m + 1) * size_t(m), 0.0);  // column-major h(i,j) = H[j*(m+1)+i]
    std::vector<double> cs(static_cast<size_t>(m)), sn(static_cast<size_t>(m));
    std::vector<double> g(static_cast<size_t>(m) + 1);
    std::vector<double> r(n), w(n), z(n);

    // r = b - (SAS) w (w = 0 initially)
    std::copy(b.begin(), b.end(), r.begin());
    double rnorm = bnorm;
    res.history.push_back(1.0);

    while (res.iterations < cfg.max_iters) {
        const double cycle_start = rnorm;
        std::fill(H.begin(), H.end(), 0.0);
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = rnorm;
        V.assign(1, std::vector<double>(n));
        for (size_t i = 0; i < n; ++i)
            V[0][i] = r[i] / rnorm;

        int j = 0;
        for (; j < m && res.iterations < cfg.max_iters; ++j) {
            // w = S A S v_j
            for (size_t i = 0; i < n; ++i)
                z[i] = scale[i] * V[size_t(j)][i];
            apply(z, w);
            for (size_t i = 0; i < n; ++i)
                w[i] *= scale[i];

            for (int i = 0; i <= j; ++i) {
                double h = 0.0;
                for (size_t k = 0; k < n; ++k)
                    h += w[k] * V[size_t(i)][k];
                H[size_t(j) * size_t(m + 1) + size_t(i)] = h;
                for (size_t k = 0; k < n; ++k)
                    w[k] -= h * V[size_t(i)][k];
            }
            const double hj1 = norm2(w);
            H[size_t(j) * size_t(m + 1) + size_t(j + 1)] = hj1;
            if (hj1 > 0.0) {
                V.emplace_back(n);
                for (size_t k = 0; k < n; ++k)
                    V[size_t(j + 1)][k] = w[k] / hj1;
            }

            // Givens rotations.
            double* hcol = &H[size_t(j) * size_t(m + 1)];
            for (int i = 0; i < j; ++i) {
                const double t = cs[size_t(i)] * hcol[i] + sn[size_t(i)] * hcol[i + 1];
                hcol[i + 1] = -sn[size_t(i)] * hcol[i] + cs[size_t(i)] * hcol[i + 1];
                hcol[i] = t;
            }
            const double denom = std::hypot(hcol[j], hcol[j + 1]);
            cs[size_t(j)] = denom == 0.0 ? 1.0 : hcol[j] / denom;
            sn[size_t(j)] = denom == 0.0 ? 0.0 : hcol[j + 1] / denom;
            hcol[j] = denom;
            hcol[j + 1] = 0.0;
            g[size_t(j) + 1] = -sn[size_t(j)] * g[size_t(j)];
            g[size_t(j)] = cs[size_t(j)] * g[size_t(j)];

            res.iterations += 1;
            const double est = std::abs(g[size_t(j) + 1]);
            res.history.push_back(est / bnorm);
            if (est / bnorm <= cfg.tolerance || hj1 == 0.0) {
                ++j;
                break;
            }
        }

        // Back substitution and solution update: x += S V y.
        // Zero pivots (lucky or unlucky breakdown) truncate the update.
        while (j > 0 && H[size_t(j - 1) * size_t(m + 1) + size_t(j - 1)] == 0.0)
            --j;
        std::vector<double> y(size_t(j), 0.0);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[size_t(i)];
            for (int k = i + 1; k < j; ++k)
                s -= H[size_t(k) * size_t(m + 1) + size_t(i)] * y[size_t(k)];
            y[size_t(i)] = s / H[size_t(i) * size_t(m + 1) + size_t(i)];
        }
        for (int i = 0; i < j; ++i)
            for (size_t k = 0; k < n; ++k)
                res.x[k] += scale[k] * V[size_t(i)][k] * y[size_t(i)];

        // Recomputed scaled residual.
        apply(res.x, w);
        for (size_t k = 0; k < n; ++k)
            r[k] = scale[k] * (rhs[k] - w[k]);
        rnorm = norm2(r);
        res.relative_residual = rnorm / bnorm;
        if (res.relative_residual <= cfg.tolerance) {
            res.status = KrylovStatus::Converged;
            return res;
        }
        if (rnorm >= cycle_start) {
            res.status = KrylovStatus::Stagnated;
            return res;
        }
    }
    res.status = KrylovStatus::MaxIterations;
    return res;
}

} // namespace hbflow
