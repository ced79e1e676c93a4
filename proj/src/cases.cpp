#include "hbflow/cases.hpp"
#include "hbflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace hbflow {

namespace {

constexpr double kTriShape[3][3] = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct IniEntry {
    std::string value;
    int line = 0;
};

using IniData = std::map<std::string, IniEntry>;  // "section.key" -> value

IniData parse_ini(const std::string& text, const std::string& origin) {
    IniData data;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(origin + ":" + std::to_string(line_no) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty() || key.empty())
            throw ParseError(origin + ":" + std::to_string(line_no) + ": key outside a section");
        data[section + "." + key] = {value, line_no};
    }
    return data;
}

class IniReader {
public:
    IniReader(IniData data, std::string origin)
        : data_(std::move(data)), origin_(std::move(origin)) {}

    bool has(const std::string& key) const { return data_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = data_.find(key);
        return it == data_.end() ? fallback : it->second.value;
    }

    double num(const std::string& key, double fallback) {
        auto it = data_.find(key);
        if (it == data_.end())
            return fallback;
        try {
            size_t pos = 0;
            const double v = std::stod(it->second.value, &pos);
            if (pos != it->second.value.size())
                throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ParseError(origin_ + ":" + std::to_string(it->second.line) +
                             ": bad number for " + key + ": '" + it->second.value + "'");
        }
    }

    int integer(const std::string& key, int fallback) {
        const double v = num(key, double(fallback));
        const int i = int(std::lround(v));
        if (double(i) != v)
            throw ParseError(origin_ + ": " + key + " must be an integer");
        return i;
    }

    bool boolean(const std::string& key, bool fallback) {
        const std::string v = str(key, fallback ? "true" : "false");
        if (v == "true" || v == "on" || v == "1")
            return true;
        if (v == "false" || v == "off" || v == "0")
            return false;
        throw ParseError(origin_ + ": " + key + " must be true or false, got '" + v + "'");
    }

    void fail(const std::string& key, const std::string& what) const {
        auto it = data_.find(key);
        const std::string at =
            it == data_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
        throw ParseError(at + ": " + what);
    }

    const IniData& raw() const { return data_; }

private:
    IniData data_;
    std::string origin_;
};

std::complex<double> bessel_j0(std::complex<double> z) {
    // Power series; adequate for the Womersley-number range of these cases.
    const std::complex<double> q = -z * z / 4.0;
    std::complex<double> term(1.0, 0.0), sum(1.0, 0.0);
    for (int k = 1; k < 80; ++k) {
        term *= q / double(k * k);
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum))
            break;
    }
    return sum;
}

} // namespace

CaseDefinition parse_case(const std::string& text, const std::string& origin) {
    IniReader ini(parse_ini(text, origin), origin);
    CaseDefinition def;

    def.mesh_kind = ini.str("mesh.kind", def.mesh_kind);
    if (def.mesh_kind != "tube" && def.mesh_kind != "bifurcation" && def.mesh_kind != "file")
        ini.fail("mesh.kind", "mesh kind must be tube, bifurcation or file");
    def.tube_radius = ini.num("mesh.radius", def.tube_radius);
    def.tube_length = ini.num("mesh.length", def.tube_length);
    def.bif_width = ini.num("mesh.width", def.bif_width);
    def.bif_depth = ini.num("mesh.depth", def.bif_depth);
    def.bif_inlet_length = ini.num("mesh.inlet_length", def.bif_inlet_length);
    def.bif_branch_length = ini.num("mesh.branch_length", def.bif_branch_length);
    def.mesh_h = ini.num("mesh.h", def.mesh_h);
    def.mesh_path = ini.str("mesh.path", "");
    const std::string fmt = ini.str("mesh.format", "native-text");
    if (fmt == "native-text")
        def.mesh_format = MeshFormat::NativeText;
    else if (fmt == "legacy-vtk")
        def.mesh_format = MeshFormat::LegacyVtk;
    else
        ini.fail("mesh.format", "mesh format must be native-text or legacy-vtk");

    def.rho = ini.num("fluid.rho", def.rho);
    if (ini.has("fluid.mu_mpas"))
        def.mu = ini.num("fluid.mu_mpas", 4.0) * 0.01;  // mPa.s -> poise
    def.mu = ini.num("fluid.mu", def.mu);

    def.period = ini.num("spectral.period", def.period);
    if (ini.has("spectral.time_points")) {
        const int N = ini.integer("spectral.time_points", 0);
        if (N < 1 || N % 2 == 0)
            ini.fail("spectral.time_points",
                     "time_points must be odd (N = 2M-1), got " + std::to_string(N));
        def.modes = (N + 1) / 2;
    }
    def.modes = ini.integer("spectral.modes", def.modes);
    if (def.modes < 1)
        ini.fail("spectral.modes", "modes must be at least 1");

    const std::string kind = ini.str("inflow.kind", "smooth-svc");
    if (kind == "smooth-svc")
        def.inflow_kind = InflowKind::SmoothSvc;
    else if (kind == "multi-harmonic-cerebral")
        def.inflow_kind = InflowKind::MultiHarmonicCerebral;
    else if (kind == "kinked-coronary")
        def.inflow_kind = InflowKind::KinkedCoronary;
    else if (kind == "file")
        def.inflow_kind = InflowKind::File;
    else if (kind == "womersley")
        def.inflow_kind = InflowKind::Womersley;
    else
        ini.fail("inflow.kind", "unknown inflow kind '" + kind + "'");
    def.mean_flow = ini.num("inflow.mean_flow", def.mean_flow);
    const std::string prof = ini.str("inflow.profile", "parabolic-round");
    if (prof == "parabolic-round")
        def.profile = InflowProfile::ParabolicRound;
    else if (prof == "parabolic-rect")
        def.profile = InflowProfile::ParabolicRect;
    else if (prof == "plug")
        def.profile = InflowProfile::Plug;
    else
        ini.fail("inflow.profile", "unknown inflow profile '" + prof + "'");
    def.signal_path = ini.str("inflow.path", "");
    def.womersley_g0 = ini.num("inflow.womersley_g0", 0.0);
    def.womersley_g1 = {ini.num("inflow.womersley_g1_re", 0.0),
                        ini.num("inflow.womersley_g1_im", 0.0)};
    def.womersley_g2 = {ini.num("inflow.womersley_g2_re", 0.0),
                        ini.num("inflow.womersley_g2_im", 0.0)};

    def.outlet_pressure_mmhg = ini.num("outlets.pressure_mmhg", def.outlet_pressure_mmhg);
    def.backflow_beta = ini.num("outlets.backflow_beta", def.backflow_beta);
    if (def.backflow_beta < 0.0 || def.backflow_beta > 1.0)
        ini.fail("outlets.backflow_beta", "backflow_beta must lie in [0, 1]");
    const std::string prefix = "outlets.pressure_mmhg.";
    for (const auto& [key, entry] : ini.raw())
        if (key.rfind(prefix, 0) == 0)
            def.outlet_pressure_overrides[key.substr(prefix.size())] =
                ini.num(key, 0.0);

    const std::string pdt = ini.str("solver-hb.pseudo_dt", "auto");
    def.pseudo_dt = pdt == "auto" ? 0.0 : ini.num("solver-hb.pseudo_dt", 0.0);
    def.newton_tol_orders = ini.num("solver-hb.newton_tol_orders", def.newton_tol_orders);
    def.max_newton_iters = ini.integer("solver-hb.max_newton_iters", def.max_newton_iters);
    def.gmres_tol = ini.num("solver-hb.gmres_tol", def.gmres_tol);
    if (def.gmres_tol <= 0.0 || def.gmres_tol >= 1.0)
        ini.fail("solver-hb.gmres_tol", "gmres_tol must lie in (0, 1)");
    def.gmres_restart = ini.integer("solver-hb.gmres_restart", def.gmres_restart);
    if (def.gmres_restart < 1)
        ini.fail("solver-hb.gmres_restart", "gmres_restart must be at least 1");
    def.gmres_max_iters = ini.integer("solver-hb.gmres_max_iters", def.gmres_max_iters);
    const std::string tm = ini.str("solver-hb.tau_mode", "qp");
    if (tm == "qp")
        def.tau_mode = TauMode::QuadraturePoint;
    else if (tm == "element-mean")
        def.tau_mode = TauMode::ElementMean;
    else
        ini.fail("solver-hb.tau_mode", "tau_mode must be qp or element-mean");
    def.backflow_in_tangent = ini.boolean("solver-hb.backflow_in_tangent", false);

    def.steps_per_cycle = ini.integer("solver-time.steps_per_cycle", def.steps_per_cycle);
    if (def.steps_per_cycle < 50)
        ini.fail("solver-time.steps_per_cycle", "steps_per_cycle must be at least 50");
    def.cycles = ini.integer("solver-time.cycles", def.cycles);
    if (def.cycles < 1)
        ini.fail("solver-time.cycles", "cycles must be at least 1");
    def.rho_inf = ini.num("solver-time.rho_inf", def.rho_inf);
    def.time_newton_tol_orders =
        ini.num("solver-time.newton_tol_orders", def.time_newton_tol_orders);
    def.time_max_newton_iters =
        ini.integer("solver-time.max_newton_iters", def.time_max_newton_iters);

    def.output_dir = ini.str("output.dir", def.output_dir);
    const std::string fields = ini.str("output.fields", "vtk");
    if (fields == "vtk")
        def.write_fields = true;
    else if (fields == "none")
        def.write_fields = false;
    else
        ini.fail("output.fields", "fields must be vtk or none");
    def.threads = ini.integer("output.threads", def.threads);

    if (!(def.period > 0.0))
        ini.fail("spectral.period", "period must be positive");
    FluidProperties{def.rho, def.mu}.validate();
    return def;
}

CaseDefinition load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open case file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str(), path);
}

std::vector<double> synthetic_inflow(InflowKind kind, int samples) {
    std::vector<double> out(static_cast<size_t>(samples));
    const double twopi = 2.0 * std::numbers::pi;
    switch (kind) {
    case InflowKind::SmoothSvc:
        // three dominant harmonics plus a fast-decaying tail
        for (int s = 0; s < samples; ++s) {
            const double x = twopi * double(s) / double(samples);
            out[size_t(s)] = 1.0 + 0.5 * std::sin(x) + 0.25 * std::cos(2 * x) +
                             0.10 * std::sin(3 * x) + 0.012 * std::sin(4 * x) +
                             0.006 * std::cos(5 * x) + 0.003 * std::sin(6 * x) +
                             0.0015 * std::sin(7 * x) + 0.0008 * std::cos(8 * x);
        }
        break;
    case InflowKind::MultiHarmonicCerebral:
        // exactly ten nonzero harmonic coefficients: modes 0..9
        for (int s = 0; s < samples; ++s) {
            const double x = twopi * double(s) / double(samples);
            double v = 1.0;
            double amp = 0.26;
            for (int k = 1; k <= 9; ++k) {
                v += amp * ((k % 2 == 1) ? std::sin(k * x + 0.3 * k) : std::cos(k * x - 0.2 * k));
                amp *= 0.72;
            }
            out[size_t(s)] = v;
        }
        break;
    case InflowKind::KinkedCoronary: {
        // two-phase piecewise-linear profile with slope discontinuities
        const double xs[7] = {0.00, 0.10, 0.35, 0.45, 0.75, 0.90, 1.00};
        const double vs[7] = {0.60, 0.25, 0.30, 1.60, 1.90, 0.90, 0.60};
        double mean = 0.0;
        for (int s = 0; s < samples; ++s) {
            const double x = double(s) / double(samples);
            int seg = 0;
            while (seg < 5 && x >= xs[seg + 1])
                ++seg;
            const double f = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
            out[size_t(s)] = vs[seg] + f * (vs[seg + 1] - vs[seg]);
            mean += out[size_t(s)];
        }
        mean /= double(samples);
        for (auto& v : out)
            v /= mean;
        break;
    }
    case InflowKind::File:
    case InflowKind::Womersley:
        throw ParseError("synthetic_inflow: not a generator kind");
    }
    return out;
}

double WomersleyFlow::alpha(const FluidProperties& props, int k) const {
    return radius * std::sqrt(double(k) * omega / props.nu());
}

double womersley_velocity(const WomersleyFlow& flow, double r, double t,
                          const FluidProperties& props) {
    const double R = flow.radius;
    double u = flow.g0 * (R * R - r * r) / (4.0 * props.mu);
    const std::complex<double> i32 = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
    for (size_t k = 1; k <= flow.harmonics.size(); ++k) {
        const std::complex<double> gk = flow.harmonics[k - 1];
        if (gk == std::complex<double>(0.0, 0.0))
            continue;
        const double ak = flow.alpha(props, int(k));
        const std::complex<double> num = bessel_j0(i32 * ak * (r / R));
        const std::complex<double> den = bessel_j0(i32 * ak);
        const std::complex<double> phase = std::polar(1.0, double(k) * flow.omega * t);
        const std::complex<double> coeff =
            gk / (props.rho * std::complex<double>(0.0, double(k) * flow.omega));
        u += (coeff * (1.0 - num / den) * phase).real();
    }
    return u;
}

double womersley_velocity_dt(const WomersleyFlow& flow, double r, double t,
                             const FluidProperties& props) {
    const double R = flow.radius;
    double du = 0.0;
    const std::complex<double> i32 = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
    for (size_t k = 1; k <= flow.harmonics.size(); ++k) {
        const std::complex<double> gk = flow.harmonics[k - 1];
        if (gk == std::complex<double>(0.0, 0.0))
            continue;
        const double ak = flow.alpha(props, int(k));
        const std::complex<double> num = bessel_j0(i32 * ak * (r / R));
        const std::complex<double> den = bessel_j0(i32 * ak);
        const std::complex<double> phase = std::polar(1.0, double(k) * flow.omega * t);
        du += (gk / props.rho * (1.0 - num / den) * phase).real();
    }
    return du;
}

double relative_error_fields(std::span<const double> f, std::span<const double> ref,
                             std::span<const double> nodal_weights, int comps, int N) {
    const size_t nn = nodal_weights.size();
    double num = 0.0, den = 0.0;
    for (size_t a = 0; a < nn; ++a) {
        const double w = nodal_weights[a];
        for (int n = 0; n < N; ++n) {
            double d2 = 0.0, r2 = 0.0;
            for (int c = 0; c < comps; ++c) {
                const size_t at = (a * size_t(comps) + size_t(c)) * size_t(N) + size_t(n);
                const double d = f[at] - ref[at];
                d2 += d * d;
                r2 += ref[at] * ref[at];
            }
            num += w * std::sqrt(d2);
            den += w * std::sqrt(r2);
        }
    }
    if (den == 0.0)
        throw ParseError("relative error undefined: reference field is identically zero");
    return num / den;
}

double relative_error_signal(std::span<const double> f, std::span<const double> ref) {
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < ref.size(); ++k) {
        num += std::abs(f[k] - ref[k]);
        den += std::abs(ref[k]);
    }
    if (den == 0.0)
        throw ParseError("relative error undefined: reference signal is identically zero");
    return num / den;
}

double patch_flow_instant(const Mesh& mesh, const BoundaryPatch& patch,
                          std::span<const double> u) {
    (void)mesh;
    double q = 0.0;
    for (size_t f = 0; f < patch.facets.size(); ++f) {
        const auto& fac = patch.facets[f];
        const auto& nv = patch.normals[f];
        const double w = patch.facet_areas[f] / 3.0;
        for (int qp = 0; qp < 3; ++qp) {
            double un = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int i = 0; i < 3; ++i)
                    un += kTriShape[qp][a] * u[size_t(fac[size_t(a)] * 3 + i)] * nv[size_t(i)];
            q += w * un;
        }
    }
    return q;
}

std::vector<double> patch_flow_series(const Mesh& mesh, const BoundaryPatch& patch,
                                      const HarmonicState& state) {
    const int N = state.basis.time_points;
    std::vector<double> q(static_cast<size_t>(N), 0.0);
    std::vector<double> u(size_t(mesh.num_nodes()) * 3);
    for (int n = 0; n < N; ++n) {
        for (int a = 0; a < mesh.num_nodes(); ++a)
            for (int i = 0; i < 3; ++i)
                u[size_t(a * 3 + i)] = state.u(a, i)[size_t(n)];
        q[size_t(n)] = patch_flow_instant(mesh, patch, u);
    }
    return q;
}

std::vector<double> state_velocity(const HarmonicState& state) {
    const int N = state.basis.time_points;
    std::vector<double> out(size_t(state.num_nodes) * 3 * size_t(N));
    for (int a = 0; a < state.num_nodes; ++a)
        for (int i = 0; i < 3; ++i) {
            const auto ua = state.u(a, i);
            std::copy(ua.begin(), ua.end(), &out[size_t((a * 3 + i) * N)]);
        }
    return out;
}

std::vector<double> state_pressure(const HarmonicState& state) {
    const int N = state.basis.time_points;
    std::vector<double> out(size_t(state.num_nodes) * size_t(N));
    for (int a = 0; a < state.num_nodes; ++a) {
        const auto pa = state.p(a);
        std::copy(pa.begin(), pa.end(), &out[size_t(a * N)]);
    }
    return out;
}

namespace {

std::vector<double> load_signal_csv(const std::string& path, double period) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open signal file '" + path + "'");
    std::vector<double> ts, vs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double t, v;
        if (!(ss >> t >> v))
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 't,value'");
        if (!ts.empty() && t <= ts.back())
            throw ParseError(path + ":" + std::to_string(line_no) + ": time must increase");
        ts.push_back(t);
        vs.push_back(v);
    }
    if (ts.size() < 2)
        throw ParseError(path + ": signal needs at least two samples");

    // Resample to a uniform dense grid over one period by linear
    // interpolation, wrapping periodically past the last sample.
    const int S = 2048;
    std::vector<double> out(static_cast<size_t>(S));
    const double t0 = ts.front();
    size_t seg = 0;
    for (int s = 0; s < S; ++s) {
        const double t = t0 + period * double(s) / double(S);
        if (t > ts.back()) {
            const double span = t0 + period - ts.back();
            const double f = span > 0.0 ? (t - ts.back()) / span : 0.0;
            out[size_t(s)] = vs.back() + f * (vs.front() - vs.back());
            continue;
        }
        while (seg + 2 < ts.size() && ts[seg + 1] < t)
            ++seg;
        const double f = (t - ts[seg]) / (ts[seg + 1] - ts[seg]);
        out[size_t(s)] = vs[seg] + f * (vs[seg + 1] - vs[seg]);
    }
    return out;
}

struct InletFrame {
    Vec3 centroid{};
    Vec3 direction{};  // inward flow direction (negative mean normal)
    Vec3 e1{}, e2{};   // in-plane axes
};

InletFrame inlet_frame(const Mesh& mesh, const BoundaryPatch& patch) {
    InletFrame fr;
    Vec3 nbar{0, 0, 0}, c{0, 0, 0};
    double area = 0.0;
    for (size_t f = 0; f < patch.facets.size(); ++f) {
        const double a = patch.facet_areas[f];
        for (int i = 0; i < 3; ++i) {
            nbar[size_t(i)] += a * patch.normals[f][size_t(i)];
            for (int v = 0; v < 3; ++v)
                c[size_t(i)] +=
                    a / 3.0 * mesh.nodes[size_t(patch.facets[f][size_t(v)])][size_t(i)];
        }
        area += a;
    }
    double nl = 0.0;
    for (int i = 0; i < 3; ++i) {
        c[size_t(i)] /= area;
        nl += nbar[size_t(i)] * nbar[size_t(i)];
    }
    nl = std::sqrt(nl);
    if (!(nl > 0.0))
        throw GeometryError("inlet patch has a degenerate mean normal");
    for (int i = 0; i < 3; ++i)
        fr.direction[size_t(i)] = -nbar[size_t(i)] / nl;
    fr.centroid = c;
    Vec3 trial = std::abs(fr.direction[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 e1{};
    const double dot =
        trial[0] * fr.direction[0] + trial[1] * fr.direction[1] + trial[2] * fr.direction[2];
    double e1l = 0.0;
    for (int i = 0; i < 3; ++i) {
        e1[size_t(i)] = trial[size_t(i)] - dot * fr.direction[size_t(i)];
        e1l += e1[size_t(i)] * e1[size_t(i)];
    }
    e1l = std::sqrt(e1l);
    for (int i = 0; i < 3; ++i)
        e1[size_t(i)] /= e1l;
    fr.e1 = e1;
    fr.e2 = {fr.direction[1] * e1[2] - fr.direction[2] * e1[1],
             fr.direction[2] * e1[0] - fr.direction[0] * e1[2],
             fr.direction[0] * e1[1] - fr.direction[1] * e1[0]};
    return fr;
}

double node_radius(const Mesh& mesh, const InletFrame& fr, int a) {
    const auto& x = mesh.nodes[size_t(a)];
    double proj = 0.0, r2 = 0.0;
    for (int i = 0; i < 3; ++i)
        proj += (x[size_t(i)] - fr.centroid[size_t(i)]) * fr.direction[size_t(i)];
    for (int i = 0; i < 3; ++i) {
        const double d = (x[size_t(i)] - fr.centroid[size_t(i)]) - proj * fr.direction[size_t(i)];
        r2 += d * d;
    }
    return std::sqrt(r2);
}

} // namespace

void rebuild_spectral(CaseInputs& in, int modes) {
    const CaseDefinition& def = in.def;
    in.basis = SpectralBasis(modes, def.period);
    const int N = in.basis.time_points;
    const Mesh& mesh = in.mesh;
    const auto& inlet = mesh.patches[size_t(in.inlet_patch)];

    in.bcs.dirichlet_g.assign(size_t(mesh.num_nodes()) * 3 * size_t(N), 0.0);
    in.bcs.backflow_beta = def.backflow_beta;
    in.bcs.neumann.clear();
    for (size_t pi = 0; pi < mesh.patches.size(); ++pi) {
        if (mesh.patches[pi].kind != PatchKind::Neumann)
            continue;
        double mmhg = def.outlet_pressure_mmhg;
        const auto it = def.outlet_pressure_overrides.find(mesh.patches[pi].name);
        if (it != def.outlet_pressure_overrides.end())
            mmhg = it->second;
        BoundaryConditionSet::NeumannBC nb;
        nb.patch_index = int(pi);
        // prescribing pressure P means the imposed normal traction is -P
        nb.h.assign(size_t(N), -mmhg * kDynPerMmHg);
        in.bcs.neumann.push_back(std::move(nb));
    }

    const InletFrame fr = inlet_frame(mesh, inlet);
    if (in.womersley) {
        in.inlet_truncation = 0.0;
        for (const auto& f : inlet.facets)
            for (int v = 0; v < 3; ++v) {
                const int a = f[size_t(v)];
                const double r = std::min(node_radius(mesh, fr, a), in.womersley->radius);
                for (int n = 0; n < N; ++n) {
                    const double uz =
                        womersley_velocity(*in.womersley, r, in.basis.sample_time(n), in.props);
                    for (int i = 0; i < 3; ++i)
                        in.bcs.dirichlet_g[size_t((a * 3 + i) * N + n)] =
                            uz * fr.direction[size_t(i)];
                }
            }
        in.element_womersley_beta = element_womersley(in.characteristic_h, N, in.basis.omega,
                                                      in.props.nu());
        return;
    }

    in.inlet_truncation = truncation_error(in.inflow_dense, in.basis);
    const PeriodicSignal q = truncate_signal(in.inflow_dense, in.basis);
    for (const auto& f : inlet.facets)
        for (int v = 0; v < 3; ++v) {
            const int a = f[size_t(v)];
            const double phi = in.inlet_shape[size_t(a)];
            for (int n = 0; n < N; ++n) {
                const double mag = phi * q.values[size_t(n)] / in.inlet_shape_integral;
                for (int i = 0; i < 3; ++i)
                    in.bcs.dirichlet_g[size_t((a * 3 + i) * N + n)] = mag * fr.direction[size_t(i)];
            }
        }
    in.element_womersley_beta =
        element_womersley(in.characteristic_h, N, in.basis.omega, in.props.nu());
}

CaseInputs build_case(const CaseDefinition& def) {
    CaseInputs in;
    in.def = def;
    in.props = FluidProperties{def.rho, def.mu};
    in.props.validate();

    if (def.mesh_kind == "tube")
        in.mesh = generate_tube(def.tube_radius, def.tube_length, def.mesh_h);
    else if (def.mesh_kind == "bifurcation")
        in.mesh = generate_bifurcation(def.bif_width, def.bif_depth, def.bif_inlet_length,
                                       def.bif_branch_length, def.mesh_h);
    else {
        if (def.mesh_path.empty())
            throw ParseError("mesh.kind = file requires mesh.path");
        in.mesh = load_mesh(def.mesh_path, def.mesh_format);
    }

    const Mesh& mesh = in.mesh;
    in.inlet_patch = -1;
    for (size_t pi = 0; pi < mesh.patches.size(); ++pi)
        if (mesh.patches[pi].name == "inlet" && mesh.patches[pi].kind == PatchKind::Dirichlet)
            in.inlet_patch = int(pi);
    if (in.inlet_patch < 0)
        throw ParseError("mesh has no Dirichlet patch named 'inlet'");
    const auto& inlet = mesh.patches[size_t(in.inlet_patch)];
    if (!(inlet.area > 0.0))
        throw GeometryError("inlet patch has zero area");

    in.characteristic_h = characteristic_length(mesh);
    const InletFrame fr = inlet_frame(mesh, inlet);

    if (def.inflow_kind == InflowKind::Womersley) {
        if (def.mesh_kind != "tube")
            throw ParseError("womersley inflow requires a tube mesh");
        WomersleyFlow flow;
        flow.radius = def.tube_radius;
        flow.omega = 2.0 * std::numbers::pi / def.period;
        flow.g0 = def.womersley_g0;
        flow.harmonics = {def.womersley_g1, def.womersley_g2};
        in.womersley = flow;

        std::vector<double> radii(size_t(mesh.num_nodes()), -1.0);
        for (const auto& f : inlet.facets)
            for (int v = 0; v < 3; ++v) {
                const int a = f[size_t(v)];
                radii[size_t(a)] = std::min(node_radius(mesh, fr, a), flow.radius);
            }
        const FluidProperties props = in.props;
        const Vec3 dir = fr.direction;
        in.time_dirichlet = [flow, radii, props, dir](double t, std::vector<double>& g,
                                                      std::vector<double>& gdot) {
            std::fill(g.begin(), g.end(), 0.0);
            std::fill(gdot.begin(), gdot.end(), 0.0);
            for (size_t a = 0; a < radii.size(); ++a) {
                if (radii[a] < 0.0)
                    continue;
                const double u = womersley_velocity(flow, radii[a], t, props);
                const double du = womersley_velocity_dt(flow, radii[a], t, props);
                for (int i = 0; i < 3; ++i) {
                    g[a * 3 + size_t(i)] = u * dir[size_t(i)];
                    gdot[a * 3 + size_t(i)] = du * dir[size_t(i)];
                }
            }
        };
    } else {
        if (def.inflow_kind == InflowKind::File) {
            if (def.signal_path.empty())
                throw ParseError("inflow.kind = file requires inflow.path");
            in.inflow_dense = load_signal_csv(def.signal_path, def.period);
        } else {
            in.inflow_dense = synthetic_inflow(def.inflow_kind);
            for (auto& v : in.inflow_dense)
                v *= def.mean_flow;
        }

        // nodal profile shape, pinned to zero on any non-inlet Dirichlet patch
        in.inlet_shape.assign(size_t(mesh.num_nodes()), 0.0);
        std::vector<char> on_other_dirichlet(size_t(mesh.num_nodes()), 0);
        for (size_t pi = 0; pi < mesh.patches.size(); ++pi) {
            if (int(pi) == in.inlet_patch || mesh.patches[pi].kind != PatchKind::Dirichlet)
                continue;
            for (const auto& f : mesh.patches[pi].facets)
                for (int v = 0; v < 3; ++v)
                    on_other_dirichlet[size_t(f[size_t(v)])] = 1;
        }
        std::vector<int> inlet_nodes;
        for (const auto& f : inlet.facets)
            for (int v = 0; v < 3; ++v)
                inlet_nodes.push_back(f[size_t(v)]);
        std::sort(inlet_nodes.begin(), inlet_nodes.end());
        inlet_nodes.erase(std::unique(inlet_nodes.begin(), inlet_nodes.end()), inlet_nodes.end());

        double rmax = 0.0, amax = 0.0, bmax = 0.0;
        std::vector<std::array<double, 2>> plane(size_t(mesh.num_nodes()), {0.0, 0.0});
        for (int a : inlet_nodes) {
            const auto& x = mesh.nodes[size_t(a)];
            double xi = 0.0, eta = 0.0;
            for (int i = 0; i < 3; ++i) {
                xi += (x[size_t(i)] - fr.centroid[size_t(i)]) * fr.e1[size_t(i)];
                eta += (x[size_t(i)] - fr.centroid[size_t(i)]) * fr.e2[size_t(i)];
            }
            plane[size_t(a)] = {xi, eta};
            rmax = std::max(rmax, std::sqrt(xi * xi + eta * eta));
            amax = std::max(amax, std::abs(xi));
            bmax = std::max(bmax, std::abs(eta));
        }
        for (int a : inlet_nodes) {
            if (on_other_dirichlet[size_t(a)])
                continue;
            const double xi = plane[size_t(a)][0], eta = plane[size_t(a)][1];
            double phi = 1.0;
            switch (def.profile) {
            case InflowProfile::ParabolicRound:
                phi = 1.0 - (xi * xi + eta * eta) / (rmax * rmax);
                break;
            case InflowProfile::ParabolicRect:
                phi = (1.0 - (xi / amax) * (xi / amax)) * (1.0 - (eta / bmax) * (eta / bmax));
                break;
            case InflowProfile::Plug:
                phi = 1.0;
                break;
            }
            in.inlet_shape[size_t(a)] = std::max(phi, 0.0);
        }
        double integral = 0.0;
        for (size_t f = 0; f < inlet.facets.size(); ++f) {
            const auto& fac = inlet.facets[f];
            const double w = inlet.facet_areas[f] / 3.0;
            for (int qp = 0; qp < 3; ++qp) {
                double phi = 0.0;
                for (int v = 0; v < 3; ++v)
                    phi += kTriShape[qp][v] * in.inlet_shape[size_t(fac[size_t(v)])];
                integral += w * phi;
            }
        }
        if (!(integral > 0.0))
            throw GeometryError("inlet profile integrates to zero");
        in.inlet_shape_integral = integral;

        const double period = def.period;
        const auto dense = in.inflow_dense;
        const auto shape = in.inlet_shape;
        const Vec3 dir = fr.direction;
        const double inv_integral = 1.0 / integral;
        in.time_dirichlet = [dense, shape, dir, period, inv_integral](
                                double t, std::vector<double>& g, std::vector<double>& gdot) {
            const int S = int(dense.size());
            double s = std::fmod(t / period, 1.0);
            if (s < 0.0)
                s += 1.0;
            const double x = s * double(S);
            const int i0 = std::min(int(x), S - 1);
            const int i1 = (i0 + 1) % S;
            const double f = x - double(i0);
            const double q = dense[size_t(i0)] + f * (dense[size_t(i1)] - dense[size_t(i0)]);
            const double qdot = (dense[size_t(i1)] - dense[size_t(i0)]) / (period / double(S));
            std::fill(g.begin(), g.end(), 0.0);
            std::fill(gdot.begin(), gdot.end(), 0.0);
            for (size_t a = 0; a < shape.size(); ++a) {
                if (shape[a] == 0.0)
                    continue;
                for (int i = 0; i < 3; ++i) {
                    g[a * 3 + size_t(i)] = shape[a] * q * inv_integral * dir[size_t(i)];
                    gdot[a * 3 + size_t(i)] = shape[a] * qdot * inv_integral * dir[size_t(i)];
                }
            }
        };
    }

    rebuild_spectral(in, def.modes);
    return in;
}

} // namespace hbflow
