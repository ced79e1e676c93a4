#include "hbflow/mesh.hpp"
#include "hbflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <unordered_map>

namespace hbflow {

namespace {

// Dompierre-style prism split: three tetrahedra with quad-face diagonals
// fixed by global node ids, so shared faces between neighboring prisms
// receive identical splits.
void split_prism(const std::array<int, 6>& v, std::vector<std::array<int, 4>>& out) {
    static const int rot[6][6] = {{0, 1, 2, 3, 4, 5}, {1, 2, 0, 4, 5, 3}, {2, 0, 1, 5, 3, 4},
                                  {3, 5, 4, 0, 2, 1}, {4, 3, 5, 1, 0, 2}, {5, 4, 3, 2, 1, 0}};
    int smallest = 0;
    for (int i = 1; i < 6; ++i)
        if (v[size_t(i)] < v[size_t(smallest)])
            smallest = i;
    std::array<int, 6> p;
    for (int i = 0; i < 6; ++i)
        p[size_t(i)] = v[size_t(rot[smallest][i])];

    if (std::min(p[1], p[5]) < std::min(p[2], p[4])) {
        out.push_back({p[0], p[1], p[2], p[5]});
        out.push_back({p[0], p[1], p[5], p[4]});
        out.push_back({p[0], p[4], p[5], p[3]});
    } else {
        out.push_back({p[0], p[1], p[2], p[4]});
        out.push_back({p[0], p[4], p[2], p[5]});
        out.push_back({p[0], p[4], p[5], p[3]});
    }
}

// Boundary facet extraction keyed by sorted node triple.
struct FaceHash {
    size_t operator()(const std::array<int, 3>& k) const {
        size_t h = 1469598103934665603ull;
        for (int v : k) {
            h ^= size_t(v);
            h *= 1099511628211ull;
        }
        return h;
    }
};

std::vector<std::array<int, 3>> boundary_faces(const std::vector<std::array<int, 4>>& elements) {
    std::unordered_map<std::array<int, 3>, std::pair<std::array<int, 3>, int>, FaceHash> count;
    count.reserve(elements.size() * 4);
    for (const auto& el : elements) {
        const std::array<std::array<int, 3>, 4> faces = {{{el[1], el[2], el[3]},
                                                          {el[0], el[3], el[2]},
                                                          {el[0], el[1], el[3]},
                                                          {el[0], el[2], el[1]}}};
        for (const auto& f : faces) {
            std::array<int, 3> key = f;
            std::sort(key.begin(), key.end());
            auto it = count.find(key);
            if (it == count.end())
                count.emplace(key, std::make_pair(f, 1));
            else
                it->second.second += 1;
        }
    }
    std::vector<std::array<int, 3>> out;
    for (const auto& [key, v] : count)
        if (v.second == 1)
            out.push_back(v.first);
    return out;
}

// Assign every boundary facet to a patch via a classifier on its nodes.
void build_patches(Mesh& mesh,
                   const std::vector<std::pair<std::string, PatchKind>>& patch_defs,
                   const std::function<int(const std::array<int, 3>&)>& classify) {
    mesh.patches.clear();
    for (const auto& [name, kind] : patch_defs) {
        BoundaryPatch p;
        p.name = name;
        p.kind = kind;
        mesh.patches.push_back(std::move(p));
    }
    for (const auto& f : boundary_faces(mesh.elements)) {
        const int pi = classify(f);
        if (pi < 0 || pi >= int(mesh.patches.size()))
            throw GeometryError("generator produced an unclassifiable boundary facet");
        mesh.patches[size_t(pi)].facets.push_back(f);
    }
}

} // namespace

TubeResolution tube_resolution(double radius, double length, double target_h) {
    if (!(radius > 0.0) || !(length > 0.0) || !(target_h > 0.0))
        throw GeometryError("tube generator requires positive radius, length and element size");
    if (target_h > radius)
        throw GeometryError("target element size exceeds the tube radius");
    TubeResolution r;
    r.rings = std::max(1, int(std::lround(radius / target_h)));
    r.layers = std::max(1, int(std::lround(length / target_h)));
    return r;
}

Mesh generate_tube(double radius, double length, double target_h) {
    const auto res = tube_resolution(radius, length, target_h);
    const int nr = res.rings, nz = res.layers;

    Mesh mesh;

    // Spiderweb disk: center node plus rings of 6j nodes at radius R*j/nr.
    const int disk_nodes = 1 + 3 * nr * (nr + 1);
    std::vector<std::array<double, 2>> disk;
    disk.resize(size_t(disk_nodes));
    std::vector<int> ring_start;
    ring_start.resize(size_t(nr) + 1);
    disk[0] = {0.0, 0.0};
    ring_start[0] = 0;
    int idx = 1;
    for (int j = 1; j <= nr; ++j) {
        ring_start[size_t(j)] = idx;
        const double r = radius * double(j) / double(nr);
        const int cnt = 6 * j;
        for (int t = 0; t < cnt; ++t) {
            const double th = 2.0 * std::numbers::pi * double(t) / double(cnt);
            disk[size_t(idx++)] = {r * std::cos(th), r * std::sin(th)};
        }
    }

    // Annulus triangulation by angular two-pointer merge.
    std::vector<std::array<int, 3>> tris;
    tris.reserve(size_t(6 * nr * nr));
    for (int t = 0; t < 6; ++t)
        tris.push_back({0, ring_start[1] + t, ring_start[1] + (t + 1) % 6});
    for (int j = 1; j < nr; ++j) {
        const int ni = 6 * j, no = 6 * (j + 1);
        const int ibase = ring_start[size_t(j)], obase = ring_start[size_t(j + 1)];
        int i = 0, o = 0;
        while (i < ni || o < no) {
            const double ai = double(i + 1) / double(ni);
            const double ao = double(o + 1) / double(no);
            const bool advance_outer = (o < no) && (i == ni || ao <= ai);
            if (advance_outer) {
                tris.push_back({obase + o % no, obase + (o + 1) % no, ibase + i % ni});
                ++o;
            } else {
                tris.push_back({obase + o % no, ibase + (i + 1) % ni, ibase + i % ni});
                ++i;
            }
        }
    }

    // Extrude along z.
    mesh.nodes.resize(size_t(disk_nodes) * size_t(nz + 1));
    for (int iz = 0; iz <= nz; ++iz) {
        const double z = length * double(iz) / double(nz);
        for (int d = 0; d < disk_nodes; ++d)
            mesh.nodes[size_t(iz * disk_nodes + d)] = {disk[size_t(d)][0], disk[size_t(d)][1], z};
    }
    mesh.elements.reserve(size_t(tris.size()) * size_t(nz) * 3);
    for (int iz = 0; iz < nz; ++iz) {
        const int lo = iz * disk_nodes, hi = (iz + 1) * disk_nodes;
        for (const auto& t : tris)
            split_prism({lo + t[0], lo + t[1], lo + t[2], hi + t[0], hi + t[1], hi + t[2]},
                        mesh.elements);
    }

    const double ztol = 1e-9 * length;
    auto classify = [&](const std::array<int, 3>& f) {
        bool at0 = true, atL = true;
        for (int a : f) {
            at0 = at0 && std::abs(mesh.nodes[size_t(a)][2]) < ztol;
            atL = atL && std::abs(mesh.nodes[size_t(a)][2] - length) < ztol;
        }
        if (at0)
            return 0;
        if (atL)
            return 1;
        return 2;
    };
    build_patches(mesh,
                  {{"inlet", PatchKind::Dirichlet},
                   {"outlet", PatchKind::Neumann},
                   {"wall", PatchKind::Dirichlet}},
                  classify);
    mesh.finalize();
    return mesh;
}

Mesh generate_bifurcation(double width, double depth, double inlet_length, double branch_length,
                          double target_h) {
    if (!(width > 0.0) || !(depth > 0.0) || !(inlet_length > 0.0) || !(branch_length > 0.0) ||
        !(target_h > 0.0))
        throw GeometryError("bifurcation generator requires positive dimensions");
    if (target_h > width / 2.0 || target_h > depth / 2.0)
        throw GeometryError("target element size too coarse for the duct cross-section");

    // Voxel grid sized to the bounding box; a T-shaped union of an inlet duct
    // (|x|<=w/2, z<=Lp) and a crossbar (z in [Lp, Lp+w]) carrying the two
    // branch ducts toward +/-x.
    const int ncw = std::max(2, int(std::lround(width / target_h)));
    const int ncd = std::max(2, int(std::lround(depth / target_h)));
    const double hx = width / double(ncw);
    const int ncb = std::max(1, int(std::lround(branch_length / hx)));
    const int ncp = std::max(1, int(std::lround(inlet_length / hx)));

    const int nx = 2 * ncb + ncw;         // cells along x
    const int ny = ncd;                   // cells along y
    const int nzc = ncp + ncw;            // cells along z
    const double x0 = -(branch_length + width / 2.0);
    const double hy = depth / double(ncd);
    const double hz = hx;
    const double zp = ncp * hz;           // z where the crossbar starts

    auto in_domain = [&](int ix, int iz) {
        const double xc = x0 + (ix + 0.5) * hx;
        const double zc = (iz + 0.5) * hz;
        const bool in_parent = std::abs(xc) <= width / 2.0 && zc <= zp;
        const bool in_bar = zc >= zp && zc <= zp + width;
        return in_parent || in_bar;
    };

    Mesh mesh;
    std::vector<int> node_id(size_t((nx + 1) * (ny + 1) * (nzc + 1)), -1);
    auto vid = [&](int ix, int iy, int iz) {
        return (iz * (ny + 1) + iy) * (nx + 1) + ix;
    };
    auto get_node = [&](int ix, int iy, int iz) {
        int& id = node_id[size_t(vid(ix, iy, iz))];
        if (id < 0) {
            id = int(mesh.nodes.size());
            mesh.nodes.push_back({x0 + ix * hx, iy * hy, iz * hz});
        }
        return id;
    };

    for (int iz = 0; iz < nzc; ++iz)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                if (!in_domain(ix, iz))
                    continue;
                const int n000 = get_node(ix, iy, iz), n100 = get_node(ix + 1, iy, iz);
                const int n010 = get_node(ix, iy + 1, iz), n110 = get_node(ix + 1, iy + 1, iz);
                const int n001 = get_node(ix, iy, iz + 1), n101 = get_node(ix + 1, iy, iz + 1);
                const int n011 = get_node(ix, iy + 1, iz + 1), n111 = get_node(ix + 1, iy + 1, iz + 1);
                // Two vertical prisms per cell, cut along the same local diagonal.
                split_prism({n000, n100, n110, n001, n101, n111}, mesh.elements);
                split_prism({n000, n110, n010, n001, n111, n011}, mesh.elements);
            }

    const double xmax = x0 + nx * hx;
    const double tol = 1e-9 * (width + branch_length);
    auto classify = [&](const std::array<int, 3>& f) {
        bool at_z0 = true, at_xlo = true, at_xhi = true;
        for (int a : f) {
            at_z0 = at_z0 && std::abs(mesh.nodes[size_t(a)][2]) < tol;
            at_xlo = at_xlo && std::abs(mesh.nodes[size_t(a)][0] - x0) < tol;
            at_xhi = at_xhi && std::abs(mesh.nodes[size_t(a)][0] - xmax) < tol;
        }
        if (at_z0)
            return 0;
        if (at_xhi)
            return 1;
        if (at_xlo)
            return 2;
        return 3;
    };
    build_patches(mesh,
                  {{"inlet", PatchKind::Dirichlet},
                   {"outlet-a", PatchKind::Neumann},
                   {"outlet-b", PatchKind::Neumann},
                   {"wall", PatchKind::Dirichlet}},
                  classify);
    mesh.finalize();
    return mesh;
}

} // namespace hbflow
