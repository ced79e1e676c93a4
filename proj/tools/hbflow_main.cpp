// Batch front-end: run the harmonic-balance and time-stepping solvers on
// case files, compare their accuracy and cost, and export meshes, signals
// and fields.

#include "hbflow/cases.hpp"
#include "hbflow/errors.hpp"
#include "hbflow/hb_solver.hpp"
#include "hbflow/io.hpp"
#include "hbflow/time_solver.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace hbflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitGeometry = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitStagnation = 5;

std::string resolve_out_dir(const std::string& flag_value, const CaseDefinition* def) {
    if (!flag_value.empty())
        return flag_value;
    if (const char* env = std::getenv("HBFLOW_OUT_DIR"); env && *env)
        return env;
    if (def)
        return def->output_dir;
    return "out";
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty())
            out.push_back(std::stoi(tok));
    return out;
}

void apply_overrides(CaseDefinition& def, int time_points, double pseudo_dt, int threads) {
    if (time_points > 0) {
        if (time_points % 2 == 0)
            throw ParseError("time-point count must be odd (N = 2M-1), got " +
                             std::to_string(time_points));
        def.modes = (time_points + 1) / 2;
    }
    if (pseudo_dt > 0.0)
        def.pseudo_dt = pseudo_dt;
    if (threads > 0)
        def.threads = threads;
}

struct HbRunArtifacts {
    HbSolution sol;
    std::vector<std::string> files;
};

// Solve and write fields, convergence log and boundary-signal spectra.
HbRunArtifacts run_hb_case(const CaseInputs& in, const std::string& dir, bool write_fields) {
    HbRunArtifacts art;
    art.sol = solve_harmonic(in);
    const auto& state = art.sol.state;
    const int N = in.basis.time_points;

    fs::create_directories(dir);
    {
        const std::string path = (fs::path(dir) / "convergence.csv").string();
        std::ofstream out(path);
        out << art.sol.log.to_csv();
        art.files.push_back(path);
    }
    {
        const std::string path = (fs::path(dir) / "fields.hbf").string();
        write_native_fields(path, state);
        art.files.push_back(path);
    }
    if (write_fields) {
        std::vector<double> u(size_t(in.mesh.num_nodes()) * 3), p(size_t(in.mesh.num_nodes()));
        for (int n = 0; n < N; ++n) {
            for (int a = 0; a < in.mesh.num_nodes(); ++a) {
                for (int i = 0; i < 3; ++i)
                    u[size_t(a * 3 + i)] = state.u(a, i)[size_t(n)];
                p[size_t(a)] = state.p(a)[size_t(n)];
            }
            char name[64];
            std::snprintf(name, sizeof name, "fields_tp%03d.vtk", n);
            const std::string path = (fs::path(dir) / name).string();
            write_vtk_fields(path, in.mesh, u, p, in.basis.sample_time(n));
            art.files.push_back(path);
        }
    }

    // boundary flow-rate signals: sampled values plus the Fourier
    // coefficients of the reconstructed curves
    auto is_reported = [&](size_t pi) {
        return in.mesh.patches[pi].kind == PatchKind::Neumann || int(pi) == in.inlet_patch;
    };
    {
        const std::string path = (fs::path(dir) / "flow_signals.csv").string();
        std::ofstream out(path);
        out << "patch,n,t,flow\n";
        char buf[160];
        for (size_t pi = 0; pi < in.mesh.patches.size(); ++pi) {
            if (!is_reported(pi))
                continue;
            const auto& patch = in.mesh.patches[pi];
            const auto q = patch_flow_series(in.mesh, patch, state);
            for (int n = 0; n < N; ++n) {
                std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g\n", patch.name.c_str(), n,
                              in.basis.sample_time(n), q[size_t(n)]);
                out << buf;
            }
        }
        art.files.push_back(path);
    }
    {
        const std::string path = (fs::path(dir) / "flow_coefficients.csv").string();
        std::ofstream out(path);
        out << "patch,mode,re,im\n";
        char buf[160];
        for (size_t pi = 0; pi < in.mesh.patches.size(); ++pi) {
            if (!is_reported(pi))
                continue;
            const auto& patch = in.mesh.patches[pi];
            PeriodicSignal sig;
            sig.basis = in.basis;
            sig.values = patch_flow_series(in.mesh, patch, state);
            const auto c = sig.coefficients();
            for (int j = 0; j < N; ++j) {
                std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g\n", patch.name.c_str(),
                              j - (in.basis.modes - 1), c[size_t(j)].real(), c[size_t(j)].imag());
                out << buf;
            }
        }
        art.files.push_back(path);
    }
    return art;
}

int cmd_run_hb(const std::string& case_path, const std::string& out_flag, int time_points,
               double pseudo_dt, int threads) {
    CaseDefinition def = load_case(case_path);
    apply_overrides(def, time_points, pseudo_dt, threads);
    const std::string dir = resolve_out_dir(out_flag, &def);
    fs::create_directories(dir);

    CaseInputs in = build_case(def);
    RunManifest manifest("run-hb", case_path);
    manifest.set("time_points", double(in.basis.time_points));
    manifest.set("period", in.basis.period);
    manifest.set("pseudo_dt", def.pseudo_dt > 0 ? std::to_string(def.pseudo_dt) : "auto");
    manifest.set("newton_tol_orders", def.newton_tol_orders);
    manifest.set("gmres_tol", def.gmres_tol);
    manifest.set("gmres_restart", double(def.gmres_restart));
    manifest.set("gmres_max_iters", double(def.gmres_max_iters));
    manifest.set("backflow_beta", def.backflow_beta);
    manifest.set("tau_mode", def.tau_mode == TauMode::QuadraturePoint ? "qp" : "element-mean");
    manifest.set("threads", double(std::max(1, def.threads)));
    manifest.set("elements", double(in.mesh.num_elements()));
    manifest.set("nodes", double(in.mesh.num_nodes()));
    manifest.set("characteristic_h", in.characteristic_h);
    manifest.set("element_womersley_beta", in.element_womersley_beta);
    manifest.set("inlet_truncation_error", in.inlet_truncation);

    HbRunArtifacts art;
    try {
        art = run_hb_case(in, dir, def.write_fields);
    } catch (const DivergenceError& e) {
        const std::string path = (fs::path(dir) / "convergence_partial.csv").string();
        std::ofstream out(path);
        out << e.partial_log_csv;
        std::fprintf(stderr, "hbflow: divergence: %s (partial log in %s)\n", e.what(),
                     path.c_str());
        return kExitDivergence;
    }
    manifest.set("pseudo_dt_used", art.sol.pseudo_dt);
    manifest.set("cfl", art.sol.cfl);
    manifest.set("converged", art.sol.log.converged ? "true" : "false");
    manifest.set_timing(art.sol.assembly_seconds, art.sol.linear_seconds, art.sol.total_seconds);
    for (const auto& f : art.files)
        manifest.add_output(f);
    const std::string mpath = manifest.write(dir);
    std::printf("run-hb: N=%d, %d newton iterations, converged=%s\n", in.basis.time_points,
                int(art.sol.log.entries.size()), art.sol.log.converged ? "yes" : "no");
    std::printf("outputs: %s\n", mpath.c_str());
    if (!art.sol.log.converged)
        std::fprintf(stderr, "hbflow: iteration cap reached without convergence\n");
    return kExitOk;
}

int cmd_run_time(const std::string& case_path, const std::string& out_flag, int steps, int cycles,
                 int threads) {
    CaseDefinition def = load_case(case_path);
    if (steps > 0)
        def.steps_per_cycle = steps;
    if (cycles > 0)
        def.cycles = cycles;
    if (threads > 0)
        def.threads = threads;
    const std::string dir = resolve_out_dir(out_flag, &def);
    fs::create_directories(dir);

    CaseInputs in = build_case(def);
    TimeSolverConfig cfg = TimeSolverConfig::from_case(def);
    const auto sol = solve_time(in, cfg);

    RunManifest manifest("run-time", case_path);
    manifest.set("steps_per_cycle", double(cfg.steps_per_cycle));
    manifest.set("cycles", double(cfg.cycles));
    manifest.set("rho_inf", cfg.rho_inf);
    manifest.set("threads", double(std::max(1, def.threads)));
    manifest.set("cycle_change", sol.cycle_change);
    manifest.set_timing(0.0, 0.0, sol.total_seconds);

    std::vector<std::string> files;
    // snapshots at the spectral sample times, same formats as run-hb
    const auto sampled = sample_cycle(sol.cycle, in.basis);
    HarmonicState state(in.basis, in.mesh.num_nodes());
    const int N = in.basis.time_points;
    for (int a = 0; a < in.mesh.num_nodes(); ++a)
        for (int n = 0; n < N; ++n) {
            for (int i = 0; i < 3; ++i)
                state.u(a, i)[size_t(n)] = sampled.u[size_t((a * 3 + i) * N + n)];
            state.p(a)[size_t(n)] = sampled.p[size_t(a * N + n)];
        }
    {
        const std::string path = (fs::path(dir) / "fields_time.hbf").string();
        write_native_fields(path, state);
        files.push_back(path);
    }
    if (def.write_fields) {
        std::vector<double> u(size_t(in.mesh.num_nodes()) * 3), p(size_t(in.mesh.num_nodes()));
        for (int n = 0; n < N; ++n) {
            for (int a = 0; a < in.mesh.num_nodes(); ++a) {
                for (int i = 0; i < 3; ++i)
                    u[size_t(a * 3 + i)] = state.u(a, i)[size_t(n)];
                p[size_t(a)] = state.p(a)[size_t(n)];
            }
            char name[64];
            std::snprintf(name, sizeof name, "fields_time_tp%03d.vtk", n);
            const std::string path = (fs::path(dir) / name).string();
            write_vtk_fields(path, in.mesh, u, p, in.basis.sample_time(n));
            files.push_back(path);
        }
    }
    for (const auto& f : files)
        manifest.add_output(f);
    const std::string mpath = manifest.write(dir);
    std::printf("run-time: %d steps over %d cycles, cycle change %.3g\n", sol.total_steps,
                cfg.cycles, sol.cycle_change);
    std::printf("outputs: %s\n", mpath.c_str());
    return kExitOk;
}

int cmd_compare(const std::string& case_path, const std::string& out_flag,
                const std::string& nlist_csv, int threads) {
    CaseDefinition def = load_case(case_path);
    if (threads > 0)
        def.threads = threads;
    const auto nlist = parse_int_list(nlist_csv);
    if (nlist.empty())
        throw ParseError("compare needs --time-points N1,N2,...");
    for (int n : nlist)
        if (n < 1 || n % 2 == 0)
            throw ParseError("time-point counts must be odd, got " + std::to_string(n));
    const std::string dir = resolve_out_dir(out_flag, &def);
    fs::create_directories(dir);

    CaseInputs in = build_case(def);
    const auto weights = nodal_volumes(in.mesh);

    TimeSolverConfig tcfg = TimeSolverConfig::from_case(def);
    const auto tsol = solve_time(in, tcfg);

    const std::string path = (fs::path(dir) / "compare.csv").string();
    std::ofstream out(path);
    out << "N,E_velocity,E_pressure";
    std::vector<int> outlet_patches;
    for (size_t pi = 0; pi < in.mesh.patches.size(); ++pi)
        if (in.mesh.patches[pi].kind == PatchKind::Neumann) {
            outlet_patches.push_back(int(pi));
            out << ",E_flow_" << in.mesh.patches[pi].name;
        }
    out << ",inlet_truncation,hb_seconds,time_seconds,speedup\n";

    for (int N : nlist) {
        rebuild_spectral(in, (N + 1) / 2);
        const auto hb = solve_harmonic(in);
        const auto sampled = sample_cycle(tsol.cycle, in.basis);
        const double ev = relative_error_fields(state_velocity(hb.state), sampled.u, weights, 3,
                                                in.basis.time_points);
        const double ep = relative_error_fields(state_pressure(hb.state), sampled.p, weights, 1,
                                                in.basis.time_points);
        char buf[240];
        std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g", N, ev, ep);
        out << buf;
        std::vector<double> u(size_t(in.mesh.num_nodes()) * 3);
        std::vector<double> p(static_cast<size_t>(in.mesh.num_nodes()));
        for (int pi : outlet_patches) {
            const auto qh = patch_flow_series(in.mesh, in.mesh.patches[size_t(pi)], hb.state);
            std::vector<double> qt(static_cast<size_t>(in.basis.time_points));
            for (int n = 0; n < in.basis.time_points; ++n) {
                sample_cycle(tsol.cycle, in.basis.sample_time(n), u, p);
                qt[size_t(n)] = patch_flow_instant(in.mesh, in.mesh.patches[size_t(pi)], u);
            }
            std::snprintf(buf, sizeof buf, ",%.6g", relative_error_signal(qh, qt));
            out << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.6g,%.6g,%.6g,%.6g\n", in.inlet_truncation,
                      hb.total_seconds, tsol.total_seconds,
                      tsol.total_seconds / hb.total_seconds);
        out << buf;
    }
    out.close();

    RunManifest manifest("compare", case_path);
    manifest.set("time_points", nlist_csv);
    manifest.set("steps_per_cycle", double(tcfg.steps_per_cycle));
    manifest.set("cycles", double(tcfg.cycles));
    manifest.add_output(path);
    const std::string mpath = manifest.write(dir);
    std::printf("compare: table in %s\n", path.c_str());
    std::printf("outputs: %s\n", mpath.c_str());
    return kExitOk;
}

int cmd_sweep_scaling(const std::string& case_path, const std::string& out_flag,
                      const std::string& nlist_csv, int threads) {
    CaseDefinition def = load_case(case_path);
    if (threads > 0)
        def.threads = threads;
    const auto nlist = parse_int_list(nlist_csv);
    if (nlist.empty())
        throw ParseError("sweep-scaling needs --time-points N1,N2,...");
    const std::string dir = resolve_out_dir(out_flag, &def);
    fs::create_directories(dir);

    CaseInputs in = build_case(def);
    std::vector<double> logn, logt;
    const std::string path = (fs::path(dir) / "sweep.csv").string();
    std::ofstream out(path);
    out << "N,seconds,newton_iters,converged\n";
    for (int N : nlist) {
        if (N < 1 || N % 2 == 0)
            throw ParseError("time-point counts must be odd, got " + std::to_string(N));
        rebuild_spectral(in, (N + 1) / 2);
        const auto hb = solve_harmonic(in);
        char buf[120];
        std::snprintf(buf, sizeof buf, "%d,%.6g,%d,%s\n", N, hb.total_seconds,
                      int(hb.log.entries.size()), hb.log.converged ? "true" : "false");
        out << buf;
        logn.push_back(std::log(double(N)));
        logt.push_back(std::log(hb.total_seconds));
    }
    double slope = std::nan("");
    if (nlist.size() >= 2) {
        double sn = 0, st = 0, snn = 0, snt = 0;
        const double k = double(logn.size());
        for (size_t i = 0; i < logn.size(); ++i) {
            sn += logn[i];
            st += logt[i];
            snn += logn[i] * logn[i];
            snt += logn[i] * logt[i];
        }
        slope = (k * snt - sn * st) / (k * snn - sn * sn);
        out << "slope," << slope << ",,\n";
    } else {
        out << "slope,n/a,,\n";
    }
    out.close();

    RunManifest manifest("sweep-scaling", case_path);
    manifest.set("time_points", nlist_csv);
    if (std::isnan(slope))
        manifest.set("slope", "n/a");
    else
        manifest.set("slope", slope);
    manifest.add_output(path);
    const std::string mpath = manifest.write(dir);
    if (std::isnan(slope))
        std::printf("sweep-scaling: single point, slope n/a\n");
    else
        std::printf("sweep-scaling: log-log slope %.3f\n", slope);
    std::printf("outputs: %s\n", mpath.c_str());
    return kExitOk;
}

int cmd_truncate_signal(const std::string& case_path, const std::string& signal_path,
                        double period, int modes, const std::string& out_flag) {
    std::vector<double> dense;
    std::string origin;
    CaseDefinition def;
    bool have_case = false;
    if (!case_path.empty()) {
        def = load_case(case_path);
        have_case = true;
        origin = case_path;
        if (def.inflow_kind == InflowKind::Womersley)
            throw ParseError("truncate-signal needs a flow-rate inflow, not womersley");
        CaseInputs in = build_case(def);
        dense = in.inflow_dense;
        period = def.period;
    } else {
        if (signal_path.empty())
            throw ParseError("truncate-signal needs --case or --signal");
        if (!(period > 0.0))
            throw ParseError("truncate-signal with --signal needs --period");
        origin = signal_path;
        // minimal case shell to reuse the CSV loader and resampling path
        CaseDefinition tmp;
        tmp.inflow_kind = InflowKind::File;
        tmp.signal_path = signal_path;
        tmp.period = period;
        tmp.mesh_kind = "tube";
        tmp.tube_radius = 0.3;
        tmp.tube_length = 0.9;
        tmp.mesh_h = 0.15;
        CaseInputs in = build_case(tmp);
        dense = in.inflow_dense;
    }
    if (modes < 1)
        throw ParseError("truncate-signal needs --modes M >= 1");

    const std::string dir = resolve_out_dir(out_flag, have_case ? &def : nullptr);
    fs::create_directories(dir);
    const SpectralBasis basis(modes, period);
    const PeriodicSignal sig = truncate_signal(dense, basis);
    const double err = truncation_error(dense, basis);

    std::vector<double> tp(static_cast<size_t>(basis.time_points));
    std::vector<double> recon_t(512), recon_v(512);
    for (int n = 0; n < basis.time_points; ++n)
        tp[size_t(n)] = basis.sample_time(n);
    for (int s = 0; s < 512; ++s) {
        recon_t[size_t(s)] = period * double(s) / 512.0;
        recon_v[size_t(s)] = sig.reconstruct(recon_t[size_t(s)]);
    }
    const std::string p1 = (fs::path(dir) / "signal_timepoints.csv").string();
    const std::string p2 = (fs::path(dir) / "signal_reconstruction.csv").string();
    write_signal_csv(p1, tp, sig.values);
    write_signal_csv(p2, recon_t, recon_v);

    RunManifest manifest("truncate-signal", origin);
    manifest.set("modes", double(modes));
    manifest.set("time_points", double(basis.time_points));
    manifest.set("period", period);
    manifest.set("truncation_error", err);
    manifest.add_output(p1);
    manifest.add_output(p2);
    const std::string mpath = manifest.write(dir);
    std::printf("truncate-signal: M=%d (N=%d), truncation error %.6g\n", modes,
                basis.time_points, err);
    std::printf("outputs: %s\n", mpath.c_str());
    return kExitOk;
}

int cmd_mesh_gen(const std::string& kind, const std::string& out_path, const std::string& format,
                 double radius, double length, double h, double width, double depth,
                 double inlet_length, double branch_length) {
    Mesh mesh;
    if (kind == "tube")
        mesh = generate_tube(radius, length, h);
    else if (kind == "bifurcation")
        mesh = generate_bifurcation(width, depth, inlet_length, branch_length, h);
    else
        throw ParseError("mesh-gen kind must be tube or bifurcation");
    MeshFormat fmt;
    if (format == "native-text")
        fmt = MeshFormat::NativeText;
    else if (format == "legacy-vtk")
        fmt = MeshFormat::LegacyVtk;
    else
        throw ParseError("mesh-gen format must be native-text or legacy-vtk");
    save_mesh(mesh, out_path, fmt);
    std::printf("mesh-gen: %d nodes, %d elements, %zu patches -> %s\n", mesh.num_nodes(),
                mesh.num_elements(), mesh.patches.size(), out_path.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"harmonic-balance Navier-Stokes solver"};
    app.require_subcommand(1);

    std::string case_path, out_dir, nlist, signal_path;
    std::string kind = "tube", format = "native-text", mesh_out;
    int time_points = 0, threads = 0, steps = 0, cycles = 0, modes = 0;
    double pseudo_dt = 0.0, period = 0.0;
    double radius = 0.3, length = 3.0, h = 0.06, width = 0.4, depth = 0.4;
    double inlet_length = 1.2, branch_length = 1.2;

    auto* run_hb = app.add_subcommand("run-hb", "solve the harmonic-balance system");
    run_hb->add_option("--case", case_path, "case file")->required();
    run_hb->add_option("--time-points", time_points, "override N (odd)");
    run_hb->add_option("--pseudo-dt", pseudo_dt, "override the pseudo-time step");
    run_hb->add_option("--out", out_dir, "output directory");
    run_hb->add_option("--threads", threads, "worker threads");

    auto* run_time = app.add_subcommand("run-time", "run the time-stepping reference solver");
    run_time->add_option("--case", case_path, "case file")->required();
    run_time->add_option("--steps-per-cycle", steps, "override steps per cycle");
    run_time->add_option("--cycles", cycles, "override cycle count");
    run_time->add_option("--out", out_dir, "output directory");
    run_time->add_option("--threads", threads, "worker threads");

    auto* compare = app.add_subcommand("compare", "accuracy/cost table versus the time solver");
    compare->add_option("--case", case_path, "case file")->required();
    compare->add_option("--time-points", nlist, "comma-separated odd N values")->required();
    compare->add_option("--out", out_dir, "output directory");
    compare->add_option("--threads", threads, "worker threads");

    auto* sweep = app.add_subcommand("sweep-scaling", "wall-time scaling over N");
    sweep->add_option("--case", case_path, "case file")->required();
    sweep->add_option("--time-points", nlist, "comma-separated odd N values")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--threads", threads, "worker threads");

    auto* trunc = app.add_subcommand("truncate-signal", "band-limit an inflow signal");
    trunc->add_option("--case", case_path, "case file providing the signal");
    trunc->add_option("--signal", signal_path, "two-column CSV t,value");
    trunc->add_option("--period", period, "signal period (with --signal)");
    trunc->add_option("--modes", modes, "mode count M")->required();
    trunc->add_option("--out", out_dir, "output directory");

    auto* meshgen = app.add_subcommand("mesh-gen", "generate a synthetic mesh");
    meshgen->add_option("--kind", kind, "tube | bifurcation");
    meshgen->add_option("--out", mesh_out, "mesh file path")->required();
    meshgen->add_option("--format", format, "native-text | legacy-vtk");
    meshgen->add_option("--radius", radius, "tube radius (cm)");
    meshgen->add_option("--length", length, "tube length (cm)");
    meshgen->add_option("--target-h", h, "target element size (cm)");
    meshgen->add_option("--width", width, "duct width (cm)");
    meshgen->add_option("--depth", depth, "duct depth (cm)");
    meshgen->add_option("--inlet-length", inlet_length, "parent duct length (cm)");
    meshgen->add_option("--branch-length", branch_length, "branch length (cm)");

    try {
        app.parse(argc, argv);
        if (run_hb->parsed())
            return cmd_run_hb(case_path, out_dir, time_points, pseudo_dt, threads);
        if (run_time->parsed())
            return cmd_run_time(case_path, out_dir, steps, cycles, threads);
        if (compare->parsed())
            return cmd_compare(case_path, out_dir, nlist, threads);
        if (sweep->parsed())
            return cmd_sweep_scaling(case_path, out_dir, nlist, threads);
        if (trunc->parsed())
            return cmd_truncate_signal(case_path, signal_path, period, modes, out_dir);
        if (meshgen->parsed())
            return cmd_mesh_gen(kind, mesh_out, format, radius, length, h, width, depth,
                                inlet_length, branch_length);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "hbflow: parse error: %s\n", e.what());
        return kExitParse;
    } catch (const GeometryError& e) {
        std::fprintf(stderr, "hbflow: geometry error: %s\n", e.what());
        return kExitGeometry;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "hbflow: divergence: %s\n", e.what());
        return kExitDivergence;
    } catch (const StagnationError& e) {
        std::fprintf(stderr, "hbflow: linear solver stagnation: %s\n", e.what());
        return kExitStagnation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "hbflow: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
