#include "hbflow/errors.hpp"
#include "hbflow/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace hbflow;

namespace {

Mesh reference_tet() {
    Mesh m;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.elements = {{0, 1, 2, 3}};
    m.finalize();
    return m;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("element_geometry: reference tetrahedron") {
    const Mesh m = reference_tet();
    const auto g = element_geometry(m, 0);
    CHECK(g.volume == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    const double expect[4][3] = {{-1, -1, -1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int a = 0; a < 4; ++a)
        for (int j = 0; j < 3; ++j)
            CHECK(g.grad_N[size_t(a)][size_t(j)] == doctest::Approx(expect[a][j]).epsilon(1e-14));
    // xi = J^T J with J the parent-map gradient; identity map here
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(g.xi_at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));
}

TEST_CASE("element_geometry: uniform scaling sends xi to xi/s^2") {
    const double s = 2.75;
    Mesh m = reference_tet();
    const auto g0 = element_geometry(m, 0);
    for (auto& x : m.nodes)
        for (auto& c : x)
            c *= s;
    m.finalize();
    const auto g1 = element_geometry(m, 0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(g1.xi_at(i, j) == doctest::Approx(g0.xi_at(i, j) / (s * s)).epsilon(1e-14));
}

TEST_CASE("element_geometry: random affine image matches finite-difference oracle") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        Mesh m = reference_tet();
        // random affine map with positive determinant
        double A[3][3], shift[3];
        do {
            for (auto& row : A)
                for (double& v : row)
                    v = dist(rng);
        } while (A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                     A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                     A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]) <
                 0.2);
        for (double& v : shift)
            v = dist(rng);
        for (auto& x : m.nodes) {
            const Vec3 old = x;
            for (int i = 0; i < 3; ++i)
                x[size_t(i)] = shift[i] + A[i][0] * old[0] + A[i][1] * old[1] + A[i][2] * old[2];
        }
        m.finalize();
        const auto g = element_geometry(m, 0);

        // Parent coordinates by solving the affine system; differentiate
        // numerically with central differences.
        auto parent = [&](const Vec3& x) {
            // solve A lambda = x - shift with Cramer's rule
            const double d = A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                             A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                             A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
            const double b[3] = {x[0] - shift[0], x[1] - shift[1], x[2] - shift[2]};
            Vec3 lam;
            for (int k = 0; k < 3; ++k) {
                double M[3][3];
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        M[i][j] = (j == k) ? b[i] : A[i][j];
                lam[size_t(k)] = (M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                                  M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                                  M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0])) /
                                 d;
            }
            return lam;
        };
        const double eps = 1e-5;
        double dparent[3][3];  // dparent[k][i] = d xi_hat_k / d x_i
        const Vec3 x0 = {0.3, 0.2, 0.1};
        for (int i = 0; i < 3; ++i) {
            Vec3 xp = x0, xm = x0;
            xp[size_t(i)] += eps;
            xm[size_t(i)] -= eps;
            const Vec3 lp = parent(xp), lm = parent(xm);
            for (int k = 0; k < 3; ++k)
                dparent[k][i] = (lp[size_t(k)] - lm[size_t(k)]) / (2.0 * eps);
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double xi_fd = 0.0;
                for (int k = 0; k < 3; ++k)
                    xi_fd += dparent[k][i] * dparent[k][j];
                CHECK(g.xi_at(i, j) == doctest::Approx(xi_fd).epsilon(1e-8));
            }
    }
}

TEST_CASE("element_geometry: degenerate element is rejected") {
    Mesh m;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.5, 0.5, 0.0}};
    m.elements = {{0, 1, 2, 3}};
    CHECK_THROWS_AS(m.finalize(), GeometryError);
}

TEST_CASE("characteristic_length: closed forms and brute-force recomputation") {
    SUBCASE("volume 1/(6 sqrt 2) gives h_c = 1") {
        Mesh m = reference_tet();
        const double target = 1.0 / (6.0 * std::sqrt(2.0));
        const double s = std::cbrt(target / (1.0 / 6.0));
        for (auto& x : m.nodes)
            for (auto& c : x)
                c *= s;
        m.finalize();
        CHECK(characteristic_length(m) == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("identical elements of volume V") {
        Mesh m = reference_tet();
        CHECK(characteristic_length(m) ==
              doctest::Approx(std::cbrt(std::sqrt(2.0))).epsilon(1e-13));
    }
    SUBCASE("mixed-volume tube matches mean-then-formula") {
        const Mesh m = generate_tube(0.5, 2.0, 0.2);
        double total = 0.0;
        for (int e = 0; e < m.num_elements(); ++e)
            total += element_geometry(m, e).volume;
        const double expect = std::cbrt(6.0 * std::sqrt(2.0) * total / m.num_elements());
        CHECK(characteristic_length(m) == doctest::Approx(expect).epsilon(1e-12));
        CHECK_THROWS_AS(characteristic_length(Mesh{}), GeometryError);
    }
}

TEST_CASE("generate_tube: patches, inlet area, element count formula") {
    const Mesh m = generate_tube(0.5, 5.0, 0.25);
    REQUIRE(m.patches.size() == 3);
    const auto* inlet = m.find_patch("inlet");
    const auto* outlet = m.find_patch("outlet");
    const auto* wall = m.find_patch("wall");
    REQUIRE(inlet != nullptr);
    REQUIRE(outlet != nullptr);
    REQUIRE(wall != nullptr);
    CHECK(inlet->kind == PatchKind::Dirichlet);
    CHECK(outlet->kind == PatchKind::Neumann);
    CHECK(wall->kind == PatchKind::Dirichlet);

    const double exact = std::numbers::pi * 0.25;
    CHECK(std::abs(inlet->area - exact) / exact < 0.05);

    const auto res = tube_resolution(0.5, 5.0, 0.25);
    CHECK(m.num_elements() == 18 * res.rings * res.rings * res.layers);

    SUBCASE("refinement shrinks the polygonal area error") {
        const Mesh fine = generate_tube(0.5, 5.0, 0.125);
        const double err0 = std::abs(inlet->area - exact);
        const double err1 = std::abs(fine.find_patch("inlet")->area - exact);
        CHECK(err1 < err0);
    }
    SUBCASE("too-coarse resolution is an error") {
        CHECK_THROWS_AS(generate_tube(0.5, 5.0, 0.75), GeometryError);
    }
}

TEST_CASE("generate_bifurcation: one inlet, two outlets, conforming mesh") {
    const Mesh m = generate_bifurcation(0.4, 0.4, 1.2, 1.2, 0.1);
    REQUIRE(m.patches.size() == 4);
    CHECK(m.find_patch("inlet")->kind == PatchKind::Dirichlet);
    CHECK(m.find_patch("outlet-a")->kind == PatchKind::Neumann);
    CHECK(m.find_patch("outlet-b")->kind == PatchKind::Neumann);
    // both outlets span the duct cross-section
    CHECK(m.find_patch("outlet-a")->area == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(m.find_patch("outlet-b")->area == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(m.find_patch("inlet")->area == doctest::Approx(0.16).epsilon(1e-12));

    // total volume: parent duct + crossbar
    double total = 0.0;
    for (int e = 0; e < m.num_elements(); ++e)
        total += element_geometry(m, e).volume;
    CHECK(total == doctest::Approx(0.4 * 0.4 * 1.2 + 0.4 * 0.4 * (2 * 1.2 + 0.4)).epsilon(1e-12));
}

TEST_CASE("mesh invariants: partition of unity, linear completeness, SPD xi") {
    const Mesh m = generate_tube(0.4, 1.0, 0.13);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> pick(0, m.num_elements() - 1);
    for (int rep = 0; rep < 50; ++rep) {
        const int e = pick(rng);
        const auto g = element_geometry(m, e);
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int a = 0; a < 4; ++a)
                s += g.grad_N[size_t(a)][size_t(j)];
            CHECK(std::abs(s) < 1e-12);
        }
        // sum_a grad_N_a (x) x_a = identity
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int a = 0; a < 4; ++a)
                    s += g.grad_N[size_t(a)][size_t(i)] *
                         m.nodes[size_t(m.elements[size_t(e)][size_t(a)])][size_t(j)];
                CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
        // xi positive definite: x^T xi x > 0 for random directions
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int k = 0; k < 5; ++k) {
            double x[3] = {dist(rng), dist(rng), dist(rng)};
            double quad = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    quad += x[i] * g.xi_at(i, j) * x[j];
            const double norm = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            if (norm > 1e-6)
                CHECK(quad > 0.0);
        }
    }
}

TEST_CASE("mesh invariant: closed boundary facet-normal areas sum to zero") {
    for (const Mesh& m : {generate_tube(0.5, 2.0, 0.2), generate_bifurcation(0.4, 0.4, 0.8, 0.8, 0.1)}) {
        double sum[3] = {0, 0, 0};
        double scale = 0.0;
        for (const auto& p : m.patches)
            for (size_t f = 0; f < p.facets.size(); ++f) {
                for (int i = 0; i < 3; ++i)
                    sum[i] += p.normals[f][size_t(i)] * p.facet_areas[f];
                scale += p.facet_areas[f];
            }
        for (double v : sum)
            CHECK(std::abs(v) < 1e-10 * scale);
    }
}

TEST_CASE("load_mesh: reference tetrahedron from native text") {
    const auto path = temp_file("hbflow_ref_tet.txt");
    {
        std::ofstream out(path);
        out << "nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n";
        out << "elements 1\n1 2 3 4\n";
        out << "patch all dirichlet 4\n2 3 4\n1 4 3\n1 2 4\n1 3 2\n";
    }
    const Mesh m = load_mesh(path.string(), MeshFormat::NativeText);
    CHECK(m.num_elements() == 1);
    CHECK(element_geometry(m, 0).volume == doctest::Approx(1.0 / 6.0));
    CHECK(m.dirichlet_nodes.size() == 4);
}

TEST_CASE("load_mesh: malformed element line reports its line number") {
    const auto path = temp_file("hbflow_bad_mesh.txt");
    {
        std::ofstream out(path);
        out << "nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n";
        out << "elements 1\n1 2 3 4 4\n";  // five entries on line 7
    }
    try {
        load_mesh(path.string(), MeshFormat::NativeText);
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(std::string(err.what()).find(":7:") != std::string::npos);
    }
}

TEST_CASE("mesh io: native save/load round-trips a generated tube") {
    const Mesh m = generate_tube(0.5, 1.0, 0.22);
    const auto path = temp_file("hbflow_tube_roundtrip.txt");
    save_mesh(m, path.string(), MeshFormat::NativeText);
    const Mesh m2 = load_mesh(path.string(), MeshFormat::NativeText);
    REQUIRE(m2.num_nodes() == m.num_nodes());
    REQUIRE(m2.num_elements() == m.num_elements());
    for (int a = 0; a < m.num_nodes(); ++a)
        for (int i = 0; i < 3; ++i)
            CHECK(m2.nodes[size_t(a)][size_t(i)] == m.nodes[size_t(a)][size_t(i)]);
    CHECK(m2.elements == m.elements);
    REQUIRE(m2.patches.size() == m.patches.size());
    for (size_t p = 0; p < m.patches.size(); ++p) {
        CHECK(m2.patches[p].name == m.patches[p].name);
        CHECK(m2.patches[p].facets == m.patches[p].facets);
    }
}

TEST_CASE("mesh io: legacy-VTK write/read preserves geometry") {
    const Mesh m = generate_tube(0.4, 0.8, 0.2);
    const auto path = temp_file("hbflow_tube.vtk");
    save_mesh(m, path.string(), MeshFormat::LegacyVtk);
    const Mesh m2 = load_mesh(path.string(), MeshFormat::LegacyVtk);
    REQUIRE(m2.num_nodes() == m.num_nodes());
    REQUIRE(m2.num_elements() == m.num_elements());
    for (int a = 0; a < m.num_nodes(); ++a)
        for (int i = 0; i < 3; ++i)
            CHECK(m2.nodes[size_t(a)][size_t(i)] == m.nodes[size_t(a)][size_t(i)]);
    CHECK(m2.patches.empty());  // patch data is not part of the VTK format
}
