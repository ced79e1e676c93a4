#include "hbflow/io.hpp"
#include "hbflow/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/resource.h>

#ifndef HBFLOW_GIT_REV
#define HBFLOW_GIT_REV "unknown"
#endif

namespace hbflow {

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 14695981039346656037ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path + "' for hashing");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    return fnv1a64(s.data(), s.size());
}

void write_vtk_fields(const std::string& path, const Mesh& mesh, std::span<const double> u,
                      std::span<const double> p, double time) {
    std::ofstream out(path);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    char buf[160];
    out << "# vtk DataFile Version 3.0\n";
    std::snprintf(buf, sizeof buf, "hbflow fields t=%.9g\n", time);
    out << buf;
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_nodes() << " double\n";
    for (const auto& x : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", x[0], x[1], x[2]);
        out << buf;
    }
    out << "CELLS " << mesh.num_elements() << " " << 5 * mesh.num_elements() << "\n";
    for (const auto& el : mesh.elements)
        out << "4 " << el[0] << " " << el[1] << " " << el[2] << " " << el[3] << "\n";
    out << "CELL_TYPES " << mesh.num_elements() << "\n";
    for (int i = 0; i < mesh.num_elements(); ++i)
        out << "10\n";
    out << "POINT_DATA " << mesh.num_nodes() << "\n";
    out << "VECTORS velocity double\n";
    for (int a = 0; a < mesh.num_nodes(); ++a) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", u[size_t(a * 3)], u[size_t(a * 3 + 1)],
                      u[size_t(a * 3 + 2)]);
        out << buf;
    }
    out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (int a = 0; a < mesh.num_nodes(); ++a) {
        std::snprintf(buf, sizeof buf, "%.9g\n", p[size_t(a)]);
        out << buf;
    }
}

void write_native_fields(const std::string& path, const HarmonicState& state) {
    std::ofstream out(path);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    const int N = state.basis.time_points;
    char buf[200];
    out << "hb-fields\n";
    out << "nodes " << state.num_nodes << "\n";
    out << "timepoints " << N << "\n";
    std::snprintf(buf, sizeof buf, "period %.17g\n", state.basis.period);
    out << buf;
    for (int n = 0; n < N; ++n) {
        out << "timepoint " << n << "\n";
        for (int a = 0; a < state.num_nodes; ++a) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", state.u(a, 0)[size_t(n)],
                          state.u(a, 1)[size_t(n)], state.u(a, 2)[size_t(n)],
                          state.p(a)[size_t(n)]);
            out << buf;
        }
    }
}

HarmonicState read_native_fields(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open field file '" + path + "'");
    std::string tok;
    in >> tok;
    if (tok != "hb-fields")
        throw ParseError(path + ": not a native field file");
    int nn = 0, N = 0;
    double period = 0.0;
    in >> tok >> nn;
    if (tok != "nodes")
        throw ParseError(path + ": expected 'nodes'");
    in >> tok >> N;
    if (tok != "timepoints")
        throw ParseError(path + ": expected 'timepoints'");
    in >> tok >> period;
    if (tok != "period")
        throw ParseError(path + ": expected 'period'");
    HarmonicState state(SpectralBasis::from_time_points(N, period), nn);
    for (int n = 0; n < N; ++n) {
        int idx = -1;
        in >> tok >> idx;
        if (tok != "timepoint" || idx != n)
            throw ParseError(path + ": malformed timepoint header");
        for (int a = 0; a < nn; ++a) {
            double ux, uy, uz, p;
            if (!(in >> ux >> uy >> uz >> p))
                throw ParseError(path + ": truncated field data");
            state.u(a, 0)[size_t(n)] = ux;
            state.u(a, 1)[size_t(n)] = uy;
            state.u(a, 2)[size_t(n)] = uz;
            state.p(a)[size_t(n)] = p;
        }
    }
    return state;
}

void write_signal_csv(const std::string& path, std::span<const double> t,
                      std::span<const double> v) {
    std::ofstream out(path);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    out << "t,value\n";
    char buf[80];
    for (size_t k = 0; k < t.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t[k], v[k]);
        out << buf;
    }
}

double peak_rss_mb() {
    struct rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return double(ru.ru_maxrss) / 1024.0;  // linux reports KiB
}

RunManifest::RunManifest(std::string command, std::string case_path)
    : command_(std::move(command)), case_path_(std::move(case_path)) {}

void RunManifest::set(const std::string& key, const std::string& value) {
    settings_.emplace_back(key, value);
}

void RunManifest::set(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    settings_.emplace_back(key, buf);
}

void RunManifest::set_timing(double assembly_s, double linear_s, double total_s) {
    assembly_s_ = assembly_s;
    linear_s_ = linear_s;
    total_s_ = total_s;
}

void RunManifest::add_output(const std::string& path) {
    outputs_.emplace_back(path, fnv1a64_file(path));
}

std::string RunManifest::write(const std::string& dir) {
    nlohmann::json j;
    j["command"] = command_;
    j["case"] = case_path_;
    j["build"] = {{"git", HBFLOW_GIT_REV}};
    nlohmann::json settings = nlohmann::json::object();
    for (const auto& [k, v] : settings_)
        settings[k] = v;
    j["settings"] = settings;
    j["timing"] = {{"assembly_seconds", assembly_s_},
                   {"linear_seconds", linear_s_},
                   {"total_seconds", total_s_}};
    j["peak_rss_mb"] = peak_rss_mb();
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& [p, h] : outputs_) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        outs.push_back({{"path", p}, {"fnv1a64", buf}});
    }
    j["outputs"] = outs;

    const std::string path = (std::filesystem::path(dir) / "manifest.json").string();
    std::ofstream out(path);
    if (!out)
        throw ParseError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    return path;
}

} // namespace hbflow
