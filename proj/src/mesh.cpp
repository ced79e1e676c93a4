#include "hbflow/mesh.hpp"
#include "hbflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace hbflow {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return dot(sub(b, a), cross(sub(c, a), sub(d, a))) / 6.0;
}

// Sorted face key for boundary extraction.
using FaceKey = std::array<int, 3>;
FaceKey face_key(int a, int b, int c) {
    FaceKey k{a, b, c};
    std::sort(k.begin(), k.end());
    return k;
}

struct FaceKeyHash {
    size_t operator()(const FaceKey& k) const {
        size_t h = 1469598103934665603ull;
        for (int v : k) {
            h ^= size_t(v);
            h *= 1099511628211ull;
        }
        return h;
    }
};

} // namespace

double ElementGeometry::xi_double_dot() const {
    double s = 0.0;
    for (double v : xi)
        s += v * v;
    return s;
}

const BoundaryPatch* Mesh::find_patch(const std::string& name) const {
    for (const auto& p : patches)
        if (p.name == name)
            return &p;
    return nullptr;
}

void Mesh::finalize() {
    const int nn = num_nodes();
    for (auto& el : elements) {
        for (int a : el)
            if (a < 0 || a >= nn)
                throw ParseError("element references node " + std::to_string(a + 1) +
                                 " out of range 1.." + std::to_string(nn));
        double v = signed_volume(nodes[size_t(el[0])], nodes[size_t(el[1])],
                                 nodes[size_t(el[2])], nodes[size_t(el[3])]);
        if (v < 0.0) {
            std::swap(el[1], el[2]);
            v = -v;
        }
        if (!(v > 0.0))
            throw GeometryError("degenerate element with zero volume");
    }

    // Boundary facets are element faces seen exactly once. Each must belong
    // to exactly one patch.
    std::unordered_map<FaceKey, std::pair<int, int>, FaceKeyHash> face_count;  // (count, opposite node)
    face_count.reserve(elements.size() * 4);
    for (const auto& el : elements) {
        const std::array<std::array<int, 3>, 4> faces = {{{el[1], el[2], el[3]},
                                                          {el[0], el[3], el[2]},
                                                          {el[0], el[1], el[3]},
                                                          {el[0], el[2], el[1]}}};
        const std::array<int, 4> opposite = {el[0], el[1], el[2], el[3]};
        for (int f = 0; f < 4; ++f) {
            auto key = face_key(faces[size_t(f)][0], faces[size_t(f)][1], faces[size_t(f)][2]);
            auto it = face_count.find(key);
            if (it == face_count.end())
                face_count.emplace(key, std::make_pair(1, opposite[size_t(f)]));
            else
                it->second.first += 1;
        }
    }
    std::unordered_map<FaceKey, int, FaceKeyHash> boundary_opposite;
    for (const auto& [key, v] : face_count)
        if (v.first == 1)
            boundary_opposite[key] = v.second;

    std::unordered_map<FaceKey, int, FaceKeyHash> claimed;  // patch index
    for (size_t pi = 0; pi < patches.size(); ++pi) {
        auto& patch = patches[pi];
        patch.normals.resize(patch.facets.size());
        patch.facet_areas.resize(patch.facets.size());
        patch.area = 0.0;
        for (size_t fi = 0; fi < patch.facets.size(); ++fi) {
            auto& fac = patch.facets[fi];
            for (int a : fac)
                if (a < 0 || a >= nn)
                    throw ParseError("patch '" + patch.name + "' references node out of range");
            const auto key = face_key(fac[0], fac[1], fac[2]);
            auto bit = boundary_opposite.find(key);
            if (bit == boundary_opposite.end())
                throw GeometryError("patch '" + patch.name + "' facet is not a boundary face");
            if (claimed.count(key))
                throw GeometryError("boundary facet assigned to more than one patch");
            claimed[key] = int(pi);

            const Vec3& a = nodes[size_t(fac[0])];
            const Vec3& b = nodes[size_t(fac[1])];
            const Vec3& c = nodes[size_t(fac[2])];
            Vec3 n = cross(sub(b, a), sub(c, a));
            const double len = std::sqrt(dot(n, n));
            if (!(len > 0.0))
                throw GeometryError("zero-area facet in patch '" + patch.name + "'");
            for (double& x : n)
                x /= len;
            // Point away from the interior: the opposite node of the owning
            // element lies inside.
            const Vec3& opp = nodes[size_t(bit->second)];
            if (dot(n, sub(opp, a)) > 0.0) {
                for (double& x : n)
                    x = -x;
                std::swap(fac[1], fac[2]);
            }
            patch.normals[fi] = n;
            patch.facet_areas[fi] = 0.5 * len;
            patch.area += 0.5 * len;
        }
    }
    if (!patches.empty() && claimed.size() != boundary_opposite.size())
        throw GeometryError("patches do not cover the boundary: " +
                            std::to_string(boundary_opposite.size() - claimed.size()) +
                            " unclaimed facets");

    is_dirichlet_node.assign(size_t(nn), 0);
    for (const auto& p : patches)
        if (p.kind == PatchKind::Dirichlet)
            for (const auto& f : p.facets)
                for (int a : f)
                    is_dirichlet_node[size_t(a)] = 1;
    dirichlet_nodes.clear();
    for (int a = 0; a < nn; ++a)
        if (is_dirichlet_node[size_t(a)])
            dirichlet_nodes.push_back(a);
}

ElementGeometry element_geometry(const Mesh& mesh, int e) {
    const auto& el = mesh.elements[size_t(e)];
    const Vec3& x0 = mesh.nodes[size_t(el[0])];
    const Vec3& x1 = mesh.nodes[size_t(el[1])];
    const Vec3& x2 = mesh.nodes[size_t(el[2])];
    const Vec3& x3 = mesh.nodes[size_t(el[3])];

    // Columns of J map parent coordinates to physical ones.
    const Vec3 c0 = sub(x1, x0), c1 = sub(x2, x0), c2 = sub(x3, x0);
    const double det = c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) -
                       c1[0] * (c0[1] * c2[2] - c0[2] * c2[1]) +
                       c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]);
    ElementGeometry g;
    g.volume = det / 6.0;
    if (!(g.volume > 0.0))
        throw GeometryError("element " + std::to_string(e) + " has non-positive volume");

    // Jinv rows are the parent-coordinate gradients d(xi_hat_k)/dx.
    const Vec3 r0 = cross(c1, c2);
    const Vec3 r1 = cross(c2, c0);
    const Vec3 r2 = cross(c0, c1);
    std::array<Vec3, 3> jinv;
    for (int i = 0; i < 3; ++i) {
        jinv[0][size_t(i)] = r0[size_t(i)] / det;
        jinv[1][size_t(i)] = r1[size_t(i)] / det;
        jinv[2][size_t(i)] = r2[size_t(i)] / det;
    }

    for (int i = 0; i < 3; ++i) {
        g.grad_N[1][size_t(i)] = jinv[0][size_t(i)];
        g.grad_N[2][size_t(i)] = jinv[1][size_t(i)];
        g.grad_N[3][size_t(i)] = jinv[2][size_t(i)];
        g.grad_N[0][size_t(i)] = -(jinv[0][size_t(i)] + jinv[1][size_t(i)] + jinv[2][size_t(i)]);
    }

    // xi_ij = sum_k d(xi_hat_k)/dx_i * d(xi_hat_k)/dx_j
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                s += jinv[size_t(k)][size_t(i)] * jinv[size_t(k)][size_t(j)];
            g.xi[size_t(3 * i + j)] = s;
        }
    return g;
}

std::vector<ElementGeometry> precompute_geometry(const Mesh& mesh) {
    std::vector<ElementGeometry> out;
    out.reserve(size_t(mesh.num_elements()));
    for (int e = 0; e < mesh.num_elements(); ++e)
        out.push_back(element_geometry(mesh, e));
    return out;
}

double characteristic_length(const Mesh& mesh) {
    if (mesh.elements.empty())
        throw GeometryError("characteristic length of an empty mesh");
    double total = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements[size_t(e)];
        total += signed_volume(mesh.nodes[size_t(el[0])], mesh.nodes[size_t(el[1])],
                               mesh.nodes[size_t(el[2])], mesh.nodes[size_t(el[3])]);
    }
    const double vbar = total / double(mesh.num_elements());
    return std::cbrt(6.0 * std::sqrt(2.0) * vbar);
}

std::vector<double> nodal_volumes(const Mesh& mesh) {
    std::vector<double> w(size_t(mesh.num_nodes()), 0.0);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements[size_t(e)];
        const double v = signed_volume(mesh.nodes[size_t(el[0])], mesh.nodes[size_t(el[1])],
                                       mesh.nodes[size_t(el[2])], mesh.nodes[size_t(el[3])]);
        for (int a : el)
            w[size_t(a)] += v / 4.0;
    }
    return w;
}

} // namespace hbflow
