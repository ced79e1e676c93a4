#pragma once

#include "hbflow/mesh.hpp"
#include "hbflow/spectral.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace hbflow {

/// CSR sparsity over node pairs (element adjacency plus the diagonal).
struct NodePattern {
    int num_nodes = 0;
    std::vector<int> row_ptr;  // num_nodes + 1
    std::vector<int> col_idx;  // sorted within each row

    static NodePattern build(const Mesh& mesh);
    int nnz() const { return int(col_idx.size()); }
    /// Index of block (a,b), -1 if structurally zero.
    int find(int a, int b) const;
};

/// Block-sparse matrix with the tangent's structure: per node pair a 4x4
/// grid of length-N diagonals, so at most 16N scalars per block and never
/// 16N^2. The velocity diagonal K repeats on all three components and the
/// velocity off-diagonals are structurally zero, so the distinct diagonals
/// K, G_1..3, D_1..3, L are condensed into 8N stored scalars per block.
/// Slot layout within a block: [K | G_i (3) | D_j (3) | L], each length N.
struct BlockSparseMatrix {
    static constexpr int kSlotK = 0;
    static constexpr int kSlotG = 1;  // +i
    static constexpr int kSlotD = 4;  // +j
    static constexpr int kSlotL = 7;
    static constexpr int kSlots = 8;

    std::shared_ptr<const NodePattern> pattern;
    int time_points = 0;
    std::vector<double> vals;

    BlockSparseMatrix() = default;
    BlockSparseMatrix(std::shared_ptr<const NodePattern> pat, int N)
        : pattern(std::move(pat)), time_points(N),
          vals(size_t(pattern->nnz()) * kSlots * size_t(N), 0.0) {}

    void zero() { std::fill(vals.begin(), vals.end(), 0.0); }
    double* block(int blk) { return &vals[size_t(blk) * kSlots * size_t(time_points)]; }
    const double* block(int blk) const {
        return &vals[size_t(blk) * kSlots * size_t(time_points)];
    }

    /// out += M*y (or out = M*y when accumulate=false); vectors have the
    /// node-major layout (node*4 + comp)*N + n. Row-parallel, so results are
    /// independent of scheduling.
    void matvec(std::span<const double> y, std::span<double> out, int threads = 1,
                bool accumulate = false) const;
};

/// The split tangent L = C + P: block-sparse pointwise part plus the
/// matrix-free time-coupling part, C = H (x) mass on the velocity rows.
/// Dirichlet velocity rows/columns are encoded in P (identity rows) and
/// masked in C.
struct TangentOperator {
    const Mesh* mesh = nullptr;
    const SpectralOperators* ops = nullptr;
    std::shared_ptr<const NodePattern> pattern;
    BlockSparseMatrix P;
    std::vector<double> mass;  // rho-weighted node-pair scalars (nnz)
    int threads = 1;

    int time_points() const { return ops->basis().time_points; }
    size_t size() const { return size_t(mesh->num_nodes()) * 4 * size_t(time_points()); }

    void matvec(std::span<const double> y, std::span<double> out) const;
};

/// Reciprocal of P's diagonal (C has zero diagonal). Near-zero entries are
/// replaced by 1; their count is reported.
struct JacobiPreconditioner {
    std::vector<double> inv_diag;
    int degenerate_entries = 0;
};
JacobiPreconditioner jacobi_preconditioner(const TangentOperator& L);

struct KrylovConfig {
    int restart = 200;
    int max_iters = 1000;
    double tolerance = 0.03;  // relative
};

enum class KrylovStatus { Converged, MaxIterations, Stagnated };

struct KrylovResult {
    std::vector<double> x;
    int iterations = 0;
    double relative_residual = 1.0;
    KrylovStatus status = KrylovStatus::Converged;
    std::vector<double> history;  // preconditioned residual estimates
};

/// Restarted GMRES on the split-Jacobi-scaled system: both sides are scaled
/// by diag(sqrt(|inv_diag|)), which balances the momentum and continuity row
/// magnitudes so the loose relative tolerance is meaningful for every field.
/// The reported residual is that of the scaled system. A cycle with no
/// residual decrease signals stagnation and the best iterate is returned.
KrylovResult gmres_solve(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                         std::span<const double> rhs, std::span<const double> inv_diag,
                         const KrylovConfig& cfg);

inline KrylovResult gmres_solve(const TangentOperator& L, std::span<const double> rhs,
                                const JacobiPreconditioner& pc, const KrylovConfig& cfg) {
    return gmres_solve([&L](std::span<const double> y, std::span<double> out) { L.matvec(y, out); },
                       rhs, pc.inv_diag, cfg);
}

} // namespace hbflow
