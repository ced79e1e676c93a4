#include "hbflow/mesh.hpp"
#include "hbflow/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hbflow {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

[[noreturn]] void fail(const std::string& path, int line_no, const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

class LineReader {
public:
    LineReader(const std::string& path) : path_(path), in_(path) {
        if (!in_)
            throw ParseError("cannot open mesh file '" + path + "'");
    }

    // Next non-empty, non-comment line; returns false at EOF.
    bool next(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.resize(hash);
            tokens = split_ws(line);
            if (!tokens.empty())
                return true;
        }
        return false;
    }

    int line_no() const { return line_no_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    int line_no_ = 0;
};

double parse_double(LineReader& r, const std::string& tok) {
    try {
        size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size())
            fail(r.path(), r.line_no(), "bad number '" + tok + "'");
        return v;
    } catch (const std::invalid_argument&) {
        fail(r.path(), r.line_no(), "bad number '" + tok + "'");
    } catch (const std::out_of_range&) {
        fail(r.path(), r.line_no(), "number out of range '" + tok + "'");
    }
}

int parse_int(LineReader& r, const std::string& tok) {
    int v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        fail(r.path(), r.line_no(), "bad integer '" + tok + "'");
    return v;
}

Mesh load_native(const std::string& path) {
    LineReader r(path);
    Mesh mesh;
    std::vector<std::string> t;

    if (!r.next(t) || t.size() != 2 || t[0] != "nodes")
        fail(r.path(), r.line_no(), "expected 'nodes <count>' header");
    const int nn = parse_int(r, t[1]);
    mesh.nodes.reserve(size_t(nn));
    for (int i = 0; i < nn; ++i) {
        if (!r.next(t))
            fail(r.path(), r.line_no(), "unexpected end of file in node block");
        if (t.size() != 3)
            fail(r.path(), r.line_no(), "node line needs 3 coordinates, got " + std::to_string(t.size()));
        mesh.nodes.push_back({parse_double(r, t[0]), parse_double(r, t[1]), parse_double(r, t[2])});
    }

    if (!r.next(t) || t.size() != 2 || t[0] != "elements")
        fail(r.path(), r.line_no(), "expected 'elements <count>' header");
    const int ne = parse_int(r, t[1]);
    mesh.elements.reserve(size_t(ne));
    for (int i = 0; i < ne; ++i) {
        if (!r.next(t))
            fail(r.path(), r.line_no(), "unexpected end of file in element block");
        if (t.size() != 4)
            fail(r.path(), r.line_no(),
                 "element line needs 4 node ids, got " + std::to_string(t.size()));
        std::array<int, 4> el;
        for (int k = 0; k < 4; ++k) {
            const int a = parse_int(r, t[size_t(k)]);
            if (a < 1 || a > nn)
                fail(r.path(), r.line_no(), "node id " + std::to_string(a) + " out of range");
            el[size_t(k)] = a - 1;
        }
        mesh.elements.push_back(el);
    }

    while (r.next(t)) {
        if (t.size() != 4 || t[0] != "patch")
            fail(r.path(), r.line_no(), "expected 'patch <name> <dirichlet|neumann> <count>'");
        BoundaryPatch p;
        p.name = t[1];
        if (t[2] == "dirichlet")
            p.kind = PatchKind::Dirichlet;
        else if (t[2] == "neumann")
            p.kind = PatchKind::Neumann;
        else
            fail(r.path(), r.line_no(), "patch kind must be dirichlet or neumann, got '" + t[2] + "'");
        const int nf = parse_int(r, t[3]);
        p.facets.reserve(size_t(nf));
        for (int i = 0; i < nf; ++i) {
            if (!r.next(t))
                fail(r.path(), r.line_no(), "unexpected end of file in patch block");
            if (t.size() != 3)
                fail(r.path(), r.line_no(),
                     "facet line needs 3 node ids, got " + std::to_string(t.size()));
            std::array<int, 3> f;
            for (int k = 0; k < 3; ++k) {
                const int a = parse_int(r, t[size_t(k)]);
                if (a < 1 || a > nn)
                    fail(r.path(), r.line_no(), "node id " + std::to_string(a) + " out of range");
                f[size_t(k)] = a - 1;
            }
            p.facets.push_back(f);
        }
        mesh.patches.push_back(std::move(p));
    }

    mesh.finalize();
    return mesh;
}

void save_native(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    char buf[128];
    out << "nodes " << mesh.num_nodes() << "\n";
    for (const auto& x : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x[0], x[1], x[2]);
        out << buf;
    }
    out << "elements " << mesh.num_elements() << "\n";
    for (const auto& el : mesh.elements)
        out << el[0] + 1 << " " << el[1] + 1 << " " << el[2] + 1 << " " << el[3] + 1 << "\n";
    for (const auto& p : mesh.patches) {
        out << "patch " << p.name << " "
            << (p.kind == PatchKind::Dirichlet ? "dirichlet" : "neumann") << " " << p.facets.size()
            << "\n";
        for (const auto& f : p.facets)
            out << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    }
}

// Minimal legacy-VTK unstructured grid reader: POINTS / CELLS / CELL_TYPES
// with tetrahedra only. Patch information is not part of the format.
Mesh load_vtk(const std::string& path) {
    LineReader r(path);
    Mesh mesh;
    std::vector<std::string> t;
    int npoints = -1, ncells = -1;

    while (r.next(t)) {
        if (t[0] == "POINTS") {
            if (t.size() < 2)
                fail(r.path(), r.line_no(), "POINTS needs a count");
            npoints = parse_int(r, t[1]);
            std::vector<double> vals;
            vals.reserve(size_t(npoints) * 3);
            while (int(vals.size()) < 3 * npoints && r.next(t))
                for (const auto& tok : t)
                    vals.push_back(parse_double(r, tok));
            if (int(vals.size()) != 3 * npoints)
                fail(r.path(), r.line_no(), "POINTS block ended early");
            mesh.nodes.resize(size_t(npoints));
            for (int i = 0; i < npoints; ++i)
                mesh.nodes[size_t(i)] = {vals[size_t(3 * i)], vals[size_t(3 * i + 1)],
                                         vals[size_t(3 * i + 2)]};
        } else if (t[0] == "CELLS") {
            if (t.size() < 3)
                fail(r.path(), r.line_no(), "CELLS needs counts");
            ncells = parse_int(r, t[1]);
            std::vector<int> vals;
            vals.reserve(size_t(ncells) * 5);
            while (int(vals.size()) < 5 * ncells && r.next(t))
                for (const auto& tok : t)
                    vals.push_back(parse_int(r, tok));
            mesh.elements.resize(size_t(ncells));
            for (int i = 0; i < ncells; ++i) {
                if (vals[size_t(5 * i)] != 4)
                    fail(r.path(), r.line_no(), "only 4-node cells (tetrahedra) are supported");
                mesh.elements[size_t(i)] = {vals[size_t(5 * i + 1)], vals[size_t(5 * i + 2)],
                                            vals[size_t(5 * i + 3)], vals[size_t(5 * i + 4)]};
            }
        } else if (t[0] == "CELL_TYPES") {
            const int n = parse_int(r, t[1]);
            std::vector<int> vals;
            vals.reserve(size_t(n));
            while (int(vals.size()) < n && r.next(t))
                for (const auto& tok : t)
                    vals.push_back(parse_int(r, tok));
            for (int v : vals)
                if (v != 10)
                    fail(r.path(), r.line_no(), "unsupported VTK cell type " + std::to_string(v));
        }
    }
    if (npoints < 0 || ncells < 0)
        throw ParseError(path + ": not a legacy-VTK unstructured grid (missing POINTS/CELLS)");
    mesh.finalize();
    return mesh;
}

void save_vtk(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    char buf[128];
    out << "# vtk DataFile Version 3.0\n";
    out << "hbflow mesh\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_nodes() << " double\n";
    for (const auto& x : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x[0], x[1], x[2]);
        out << buf;
    }
    out << "CELLS " << mesh.num_elements() << " " << 5 * mesh.num_elements() << "\n";
    for (const auto& el : mesh.elements)
        out << "4 " << el[0] << " " << el[1] << " " << el[2] << " " << el[3] << "\n";
    out << "CELL_TYPES " << mesh.num_elements() << "\n";
    for (int i = 0; i < mesh.num_elements(); ++i)
        out << "10\n";
}

} // namespace

Mesh load_mesh(const std::string& path, MeshFormat format) {
    return format == MeshFormat::NativeText ? load_native(path) : load_vtk(path);
}

void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format) {
    if (format == MeshFormat::NativeText)
        save_native(mesh, path);
    else
        save_vtk(mesh, path);
}

} // namespace hbflow
