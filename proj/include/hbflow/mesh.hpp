#pragma once

#include <array>
#include <string>
#include <vector>

namespace hbflow {

using Vec3 = std::array<double, 3>;

enum class PatchKind { Dirichlet, Neumann };

enum class MeshFormat { NativeText, LegacyVtk };

/// A named boundary patch: triangular facets with outward unit normals.
struct BoundaryPatch {
    std::string name;
    PatchKind kind = PatchKind::Dirichlet;
    std::vector<std::array<int, 3>> facets;  // node indices
    std::vector<Vec3> normals;               // unit, outward, per facet
    std::vector<double> facet_areas;         // cm^2
    double area = 0.0;                       // sum of facet areas
};

/// Per-element geometric quantities for a linear tetrahedron.
struct ElementGeometry {
    std::array<Vec3, 4> grad_N;  // constant shape-function gradients (1/cm)
    double volume = 0.0;         // cm^3
    std::array<double, 9> xi{};  // covariant tensor, row-major 3x3 (1/cm^2)

    double xi_at(int i, int j) const { return xi[size_t(3 * i + j)]; }
    /// xi : xi (Frobenius inner product with itself)
    double xi_double_dot() const;
};

/// Immutable linear tetrahedral mesh with boundary patches.
/// All geometric validation happens at construction (finalize()).
struct Mesh {
    std::vector<Vec3> nodes;                    // cm
    std::vector<std::array<int, 4>> elements;   // node indices, positive volume
    std::vector<BoundaryPatch> patches;
    std::vector<int> dirichlet_nodes;           // eta_g, sorted unique
    std::vector<char> is_dirichlet_node;        // size nodes

    int num_nodes() const { return int(nodes.size()); }
    int num_elements() const { return int(elements.size()); }

    const BoundaryPatch* find_patch(const std::string& name) const;

    /// Canonicalize element orientation, build normals/areas/node sets and
    /// check invariants. Throws GeometryError / ParseError on violation.
    void finalize();
};

/// Geometry of element e. Throws GeometryError for degenerate elements.
ElementGeometry element_geometry(const Mesh& mesh, int e);

/// All element geometries, computed once for assembly loops.
std::vector<ElementGeometry> precompute_geometry(const Mesh& mesh);

/// Edge length of the regular tetrahedron whose volume equals the mean
/// element volume: h_c = (6*sqrt(2)*Vbar)^(1/3).
double characteristic_length(const Mesh& mesh);

/// Nodal volume weights (lumped element volumes), used as quadrature weights
/// for field norms.
std::vector<double> nodal_volumes(const Mesh& mesh);

/// Structured tube: cylinder of given radius/length along +z. Patches:
/// "inlet" (Dirichlet, z=0), "outlet" (Neumann, z=length), "wall" (Dirichlet).
Mesh generate_tube(double radius, double length, double target_h);

/// Ring/layer counts the tube generator would use; element count is
/// 18 * rings^2 * layers by construction.
struct TubeResolution {
    int rings = 0;
    int layers = 0;
};
TubeResolution tube_resolution(double radius, double length, double target_h);

/// Structured branching duct (synthetic bifurcation): square inlet duct of
/// width w along +z splitting into two branch ducts along +/-x. Patches:
/// "inlet" (Dirichlet), "outlet-a"/"outlet-b" (Neumann), "wall" (Dirichlet).
Mesh generate_bifurcation(double width, double depth, double inlet_length,
                          double branch_length, double target_h);

Mesh load_mesh(const std::string& path, MeshFormat format);
void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format);

} // namespace hbflow
