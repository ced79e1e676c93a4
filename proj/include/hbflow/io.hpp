#pragma once

#include "hbflow/assembly.hpp"
#include "hbflow/mesh.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hbflow {

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);

/// Legacy-VTK unstructured grid with point data (velocity vector, pressure)
/// for one time instant. u has layout node*3+i.
void write_vtk_fields(const std::string& path, const Mesh& mesh, std::span<const double> u,
                      std::span<const double> p, double time);

/// Native field file: every nodal value of a harmonic state at full
/// precision; write-then-read round-trips bit-exactly.
void write_native_fields(const std::string& path, const HarmonicState& state);
HarmonicState read_native_fields(const std::string& path);

/// Two-column CSV signal writer (t,value).
void write_signal_csv(const std::string& path, std::span<const double> t,
                      std::span<const double> v);

double peak_rss_mb();

/// Run provenance: command, settings echo, build stamp, per-phase wall time
/// and every output file with a content hash.
class RunManifest {
public:
    RunManifest(std::string command, std::string case_path);

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set_timing(double assembly_s, double linear_s, double total_s);
    void add_output(const std::string& path);

    /// Write manifest.json into the directory and return its path.
    std::string write(const std::string& dir);

private:
    std::string command_;
    std::string case_path_;
    std::vector<std::pair<std::string, std::string>> settings_;
    double assembly_s_ = 0.0, linear_s_ = 0.0, total_s_ = 0.0;
    std::vector<std::pair<std::string, uint64_t>> outputs_;
};

} // namespace hbflow
