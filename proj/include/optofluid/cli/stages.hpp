/* Copyright 2026 The optofluid Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// One function per CLI stage. Each reads every key it needs from the
// Config first, so strictness errors surface before any work is done, then
// runs and registers its files with the Run.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "optofluid/cli/config.hpp"
#include "optofluid/cli/manifest.hpp"
#include "optofluid/elimination.hpp"
#include "optofluid/field_io.hpp"
#include "optofluid/fluid.hpp"
#include "optofluid/geometry/crosscheck.hpp"
#include "optofluid/geometry/horizon.hpp"
#include "optofluid/geometry/kg.hpp"
#include "optofluid/geometry/madelung.hpp"
#include "optofluid/geometry/metric.hpp"
#include "optofluid/lattice.hpp"
#include "optofluid/rdr.hpp"

namespace optofluid::cli {

struct Options {
    std::filesystem::path out = "out";
    unsigned threads = 1;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool force = false;
    std::string sweep;                 // rdr: param:min:max:steps
    std::vector<double> sweep_gamma;   // kernel
    std::size_t snapshot_every = 0;
};

/// Exit status of a stage that ran to completion.
enum class Outcome { ok = 0, gated = 4 };

namespace detail {

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

/// Runs f(i) for i in [0, n) on at most `threads` workers; results keep
/// their index order.
template <class R>
std::vector<R> parallel_map(std::size_t n, unsigned threads, const std::function<R(std::size_t)>& f)
{
    std::vector<R> out(n);
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    std::vector<std::future<void>> jobs;
    for (std::size_t t = 0; t < w; ++t)
        jobs.push_back(std::async(std::launch::async, [&, t] {
            for (std::size_t i = t; i < n; i += w) out[i] = f(i);
        }));
    for (auto& j : jobs) j.get();
    return out;
}

inline ComplexField2D read_grid(Config& cfg)
{
    const std::size_t nx = cfg.count("grid.nx"), ny = cfg.count("grid.ny", 1);
    const double dx = cfg.number("grid.dx", Dim::length);
    const double dy = cfg.number("grid.dy", Dim::length, dx);
    try {
        return ComplexField2D(nx, ny, dx, dy);
    } catch (const PreconditionError& e) {
        throw ConfigError(cfg.line_of("grid.nx"), e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------- rdr

struct RdrInput {
    rdr::OptomechParams p;
    rdr::OperatingPoint op;
};

inline RdrInput read_rdr(Config& cfg)
{
    RdrInput in;
    auto& p = in.p;
    p.omega_i = cfg.number("rdr.omega_i", Dim::frequency);
    p.gamma_i = cfg.number("rdr.gamma_i", Dim::frequency);
    p.kappa_prime = cfg.number("rdr.kappa_prime", Dim::frequency);
    p.kappa = cfg.number("rdr.kappa", Dim::frequency, 0.0);
    p.G0 = cfg.number("rdr.G0", Dim::frequency, 0.0);
    p.eps = cfg.number("rdr.eps", Dim::frequency, 0.0);
    p.Delta = cfg.number("rdr.Delta", Dim::frequency, 0.0);
    if (cfg.has("rdr.n_th") && cfg.has("rdr.temperature"))
        throw ConfigError(cfg.line_of("rdr.temperature"), "give either rdr.n_th or rdr.temperature, not both");
    if (cfg.has("rdr.temperature")) {
        const double T = cfg.number("rdr.temperature", Dim::temperature);
        p.n_th = rdr::thermal_occupancy(p.omega_i * cfg.scale().frequency, T).value;
    } else {
        p.n_th = cfg.number("rdr.n_th", Dim::none, 0.0);
    }
    if (cfg.has("rdr.G") != cfg.has("rdr.Delta_bar"))
        throw ConfigError(cfg.line_of(cfg.has("rdr.G") ? "rdr.G" : "rdr.Delta_bar"),
                          "rdr.G and rdr.Delta_bar must be given together (or both derived from the drive)");
    if (cfg.has("rdr.G")) {
        in.op.G = cplx(cfg.number("rdr.G", Dim::frequency), 0.0);
        in.op.Delta_bar = cfg.number("rdr.Delta_bar", Dim::frequency);
    }
    if (cfg.has("rdr.omega_eval")) in.op.omega_eval = cfg.number("rdr.omega_eval", Dim::frequency);
    if (cfg.has("rdr.n_min")) in.op.n_min = cfg.number("rdr.n_min", Dim::none);
    try {
        p.validate();
    } catch (const DomainError& e) {
        throw ConfigError(0, e.what());
    }
    return in;
}

inline json rdr_json(const rdr::RdrReport& r, const rdr::OptomechParams& p)
{
    json j;
    j["alpha"] = detail::complex_json(r.alpha);
    j["beta"] = detail::complex_json(r.beta);
    j["Delta_bar"] = r.Delta_bar;
    j["G"] = detail::complex_json(r.G);
    j["omega_eval"] = r.omega_eval;
    j["gamma_opt"] = r.gamma_opt;
    j["omega_opt"] = r.omega_opt;
    j["gamma_total"] = r.gamma_total;
    j["omega_m"] = r.omega_m;
    j["n_th"] = p.n_th;
    j["n_min"] = r.n_min;
    j["n_f"] = r.n_f_defined ? json(r.n_f) : json(nullptr);
    j["stable"] = r.stable;
    j["multistable"] = r.multistable;
    j["gamma_over_kappa"] = std::isfinite(r.ratio_gamma_kappa) ? json(r.ratio_gamma_kappa) : json("inf");
    json ev = json::array();
    for (const cplx& e : r.stability.eigenvalues) ev.push_back(detail::complex_json(e));
    j["drift_eigenvalues"] = ev;
    j["omega_m_resolved_sideband"] = r.stability.omega_m_resolved_sideband;
    return j;
}

struct SweepSpec {
    std::string param;
    double lo = 0.0, hi = 0.0;
    std::size_t steps = 0;
};

inline SweepSpec parse_sweep(const std::string& s, const Config& cfg)
{
    SweepSpec sw;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto c = s.find(':', start);
        parts.push_back(s.substr(start, c == std::string::npos ? std::string::npos : c - start));
        if (c == std::string::npos) break;
        start = c + 1;
    }
    if (parts.size() != 4) throw ConfigError(0, "--sweep expects param:min:max:steps, got '" + s + "'");
    sw.param = parts[0];
    static const char* allowed[] = {"omega", "G", "Delta_bar", "kappa_prime", "gamma_i", "G0", "eps", "Delta"};
    if (std::none_of(std::begin(allowed), std::end(allowed), [&](const char* a) { return sw.param == a; }))
        throw ConfigError(0, "--sweep: unknown parameter '" + sw.param + "'");
    const auto lo = detail::parse_number(parts[1]), hi = detail::parse_number(parts[2]);
    const auto n = detail::parse_number(parts[3]);
    if (!lo || !hi || !n || *n < 2 || *n != std::floor(*n)) throw ConfigError(0, "--sweep: bad range in '" + s + "'");
    const bool si_mode = cfg.units() == Units::si;
    sw.lo = si_mode ? cfg.scale().to_natural(*lo, Dim::frequency) : *lo;
    sw.hi = si_mode ? cfg.scale().to_natural(*hi, Dim::frequency) : *hi;
    sw.steps = static_cast<std::size_t>(*n);
    return sw;
}

inline Outcome run_rdr(Config& cfg, Run& run, const Options& opt)
{
    const RdrInput in = read_rdr(cfg);
    std::optional<SweepSpec> sweep;
    if (!opt.sweep.empty()) sweep = parse_sweep(opt.sweep, cfg);
    if (sweep && (sweep->param == "G" || sweep->param == "Delta_bar") && !in.op.G)
        throw ConfigError(0, "--sweep " + sweep->param + " needs rdr.G and rdr.Delta_bar in the config");
    cfg.require_all_used();

    const rdr::RdrReport r = rdr::analyze(in.p, in.op);
    run.write_json("rdr.json", rdr_json(r, in.p));
    auto& d = run.derived();
    d["gamma_total"] = r.gamma_total;
    d["omega_m"] = r.omega_m;
    d["n_f"] = r.n_f_defined ? json(r.n_f) : json(nullptr);
    d["gamma_over_kappa"] = std::isfinite(r.ratio_gamma_kappa) ? json(r.ratio_gamma_kappa) : json("inf");

    if (sweep) {
        const SweepSpec sw = *sweep;
        auto row = [&](std::size_t i) {
            const double v = sw.lo + (sw.hi - sw.lo) * static_cast<double>(i) / static_cast<double>(sw.steps - 1);
            rdr::OptomechParams p = in.p;
            rdr::OperatingPoint op = in.op;
            if (sw.param == "omega") op.omega_eval = v;
            else if (sw.param == "G") op.G = cplx(v, 0.0);
            else if (sw.param == "Delta_bar") op.Delta_bar = v;
            else if (sw.param == "kappa_prime") p.kappa_prime = v;
            else if (sw.param == "gamma_i") p.gamma_i = v;
            else if (sw.param == "G0") p.G0 = v;
            else if (sw.param == "eps") p.eps = v;
            else p.Delta = v;
            const rdr::RdrReport q = rdr::analyze(p, op);
            return std::vector<double>{v, q.omega_eval, q.gamma_opt, q.omega_opt,
                                       q.n_f_defined ? q.n_f : std::numeric_limits<double>::quiet_NaN(),
                                       q.stable ? 1.0 : 0.0};
        };
        const auto rows = detail::parallel_map<std::vector<double>>(sw.steps, opt.threads, row);
        Csv csv({sw.param, "omega", "gamma_opt", "omega_opt", "n_f", "stable"});
        for (const auto& rw : rows) csv.row(rw);
        run.write_text("rdr_sweep.csv", csv.str());
    }

    if (!r.stable) {
        run.stage_status("rdr", "gated", "operating point unstable (max Re eigenvalue " +
                                             std::to_string(r.stability.max_real_part) + ")");
        return Outcome::gated;
    }
    run.stage_status("rdr", "ok");
    return Outcome::ok;
}

// ---------------------------------------------------------------- kernel

inline Outcome run_kernel(Config& cfg, Run& run, const Options& opt)
{
    elimination::KernelParams k;
    k.omega_m = cfg.number("kernel.omega_m", Dim::frequency);
    k.gamma = cfg.number("kernel.gamma", Dim::frequency);
    k.g = cfg.number("kernel.g", Dim::frequency);
    const double n_photon = cfg.number("kernel.n_photon", Dim::none, 1.0);
    const double t_final = cfg.number("kernel.t_final", Dim::time, 100.0 / std::abs(k.omega_m));
    elimination::EliminationOptions eo;
    eo.dt = cfg.number("kernel.dt", Dim::time, 0.0);
    eo.Delta = cfg.number("kernel.Delta", Dim::frequency, 0.0);
    const double t_max = cfg.number("kernel.t_max", Dim::time, 40.0 / k.gamma);
    const std::size_t t_points = cfg.count("kernel.t_points", 201);
    std::vector<double> gammas = opt.sweep_gamma;
    if (gammas.empty()) gammas = cfg.numbers("kernel.sweep_gamma", Dim::frequency, std::vector<double>{});
    else if (cfg.units() == Units::si)
        for (double& g : gammas) g = cfg.scale().to_natural(g, Dim::frequency);
    if (t_points < 2) throw ConfigError(cfg.line_of("kernel.t_points"), "kernel.t_points must be >= 2");
    if (!(k.gamma > 0.0)) throw ConfigError(cfg.line_of("kernel.gamma"), "kernel.gamma must be > 0");
    cfg.require_all_used();

    const double G = elimination::kerr_coupling(k);   // gates omega_m <= 0
    Csv tcsv({"t", "T"});
    for (std::size_t i = 0; i < t_points; ++i) {
        const double t = t_max * static_cast<double>(i) / static_cast<double>(t_points - 1);
        tcsv.row({t, elimination::memory_kernel(t, k)});
    }
    run.write_text("kernel_t.csv", tcsv.str());

    const auto main = elimination::validate_elimination(k, n_photon, t_final, eo);
    json j;
    j["T_inf"] = elimination::memory_kernel_limit(k);
    j["G"] = G;
    j["err_norm"] = main.err_norm;
    j["final_phase_full"] = main.final_phase_full;
    j["final_phase_eliminated"] = main.final_phase_eliminated;
    j["max_norm_step_drift"] = main.max_norm_step_drift;
    run.write_json("kernel.json", j);
    run.derived()["G"] = G;
    run.derived()["err_norm"] = main.err_norm;

    if (!gammas.empty()) {
        auto row = [&](std::size_t i) {
            elimination::KernelParams q = k;
            q.gamma = gammas[i];
            const auto r = elimination::validate_elimination(q, n_photon, std::max(t_final, 6.0 / q.gamma), eo);
            return std::vector<double>{q.gamma, r.err_norm, r.final_phase_full, r.final_phase_eliminated};
        };
        const auto rows = detail::parallel_map<std::vector<double>>(gammas.size(), opt.threads, row);
        Csv csv({"gamma", "err_norm", "final_phase_full", "final_phase_eliminated"});
        for (const auto& r : rows) csv.row(r);
        run.write_text("kernel_sweep.csv", csv.str());
    }
    run.stage_status("kernel", "ok");
    return Outcome::ok;
}

// ---------------------------------------------------------------- lattice

inline Outcome run_lattice(Config& cfg, Run& run, const Options& opt)
{
    lattice::LatticeParams p;
    p.Nx = cfg.count("lattice.Nx");
    p.Ny = cfg.count("lattice.Ny");
    p.h = cfg.number("lattice.h", Dim::length);
    p.omega_c = cfg.number("lattice.omega_c", Dim::frequency, 0.0);
    p.omega_m = cfg.number("lattice.omega_m", Dim::frequency, 1.0);
    p.gamma = cfg.number("lattice.gamma", Dim::frequency, 0.0);
    p.kappa = cfg.number("lattice.kappa", Dim::frequency, 0.0);
    p.g_prime = cfg.number("lattice.g_prime", Dim::frequency, 0.0);
    p.J = cfg.number("lattice.J", Dim::frequency);
    p.convention = cfg.choice("lattice.convention", {"literal", "half"}, "literal") == "half"
                       ? lattice::DampingConvention::half
                       : lattice::DampingConvention::literal;
    const double dt = cfg.number("lattice.dt", Dim::time);
    const std::size_t steps = cfg.count("lattice.steps");
    const std::string init = cfg.choice("lattice.initial", {"uniform", "bloch", "gaussian"}, "gaussian");
    const double amp = cfg.number("lattice.amplitude", Dim::none, 1.0);
    const double kh = cfg.number("lattice.kh", Dim::none, init == "uniform" ? 0.0 : 0.1);
    const double sigma = init == "gaussian" ? cfg.number("lattice.sigma", Dim::length) : 0.0;
    const double t_compare = cfg.number("lattice.t_compare", Dim::time, 20.0 / std::abs(p.J));
    const std::vector<double> kh_list = cfg.numbers("lattice.kh_list", Dim::none, std::vector<double>{0.05, 0.1, 0.2, 0.4});
    const std::size_t every = opt.snapshot_every ? opt.snapshot_every : cfg.count("io.snapshot_every", 0);
    try {
        p.validate();
    } catch (const Error& e) {
        throw ConfigError(0, e.what());
    }
    if (p.J == 0.0) throw ConfigError(cfg.line_of("lattice.J"), "lattice.J must be nonzero");
    cfg.require_all_used();

    ComplexField2D grid(p.Nx, p.Ny, p.h, p.h);
    const double k = std::round(kh * static_cast<double>(p.Nx) / (2.0 * pi)) * 2.0 * pi / (static_cast<double>(p.Nx) * p.h);
    grid.fill_with([&](double x, double y) {
        if (init == "uniform") return cplx(amp);
        if (init == "bloch") return std::polar(amp, k * x);
        return amp * std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)) * std::polar(1.0, k * x);
    });
    lattice::LatticeState s = lattice::lattice_from_field(grid);
    auto photons = [](const lattice::LatticeState& st) {
        double n = 0.0;
        for (const cplx& z : st.a) n += std::norm(z);
        return n;
    };
    const double n0 = photons(s);
    auto snapshot = [&](const std::string& name) {
        ComplexField2D f = ComplexField2D::like(grid);
        f.storage() = s.a;
        run.write_field(name, f, {{"t", s.t}, {"field", "a"}});
    };
    snapshot("lattice_initial.pfld");
    std::size_t done = 0;
    while (done < steps) {
        const std::size_t chunk = every ? std::min(every, steps - done) : steps - done;
        s = lattice::evolve_lattice(std::move(s), p, dt, chunk, {opt.force});
        done += chunk;
        if (every && done < steps) {
            char name[64];
            std::snprintf(name, sizeof name, "lattice_%06zu.pfld", done);
            snapshot(name);
        }
    }
    snapshot("lattice_final.pfld");

    // Continuum comparison on Bloch waves, wavenumbers snapped to the lattice.
    lattice::LatticeParams q = p;
    q.g_prime = 0.0;
    q.kappa = 0.0;
    const double dtc = std::min(dt, 0.05 / std::max(std::abs(p.omega_c) + 4.0 * std::abs(p.J), std::abs(p.omega_m)));
    const double tc = dtc * std::max(1.0, std::round(t_compare / dtc));
    std::vector<double> modes;
    for (double want : kh_list) modes.push_back(std::max(1.0, std::round(want * static_cast<double>(p.Nx) / (2.0 * pi))));
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
    Csv csv({"kh", "field_error", "density_error"});
    for (double j : modes) {
        const double khs = 2.0 * pi * j / static_cast<double>(p.Nx);
        ComplexField2D f = ComplexField2D::like(grid);
        f.fill_with([&](double x, double) { return std::polar(1.0, khs / p.h * x); });
        const auto e = lattice::continuum_error(lattice::lattice_from_field(f), f, q, tc, dtc);
        csv.row({khs, e.field_error, e.density_error});
    }
    run.write_text("lattice_continuum.csv", csv.str());

    const auto cp = lattice::continuum_params(p.J, p.h, p.omega_c);
    json j;
    j["continuum"] = {{"m", cp.m}, {"V_tilde", cp.V_tilde}, {"negative_mass", cp.negative_mass}};
    j["kerr_coupling"] = p.gamma > 0.0 && p.omega_m > 0.0 ? json(lattice::array_kerr_coupling(p)) : json(nullptr);
    j["photons_initial"] = n0;
    j["photons_final"] = photons(s);
    j["t_final"] = s.t;
    j["t_compare"] = tc;
    run.write_json("lattice.json", j);
    run.derived()["m"] = cp.m;
    run.stage_status("lattice", "ok");
    return Outcome::ok;
}

// ---------------------------------------------------------------- nlse

struct NlseInput {
    fluid::FluidParams p;
    ComplexField2D psi;
};

inline NlseInput read_nlse_initial(Config& cfg, const std::string& sec, const Options& opt)
{
    NlseInput in;
    ComplexField2D grid = detail::read_grid(cfg);
    in.p.m = cfg.number(sec + ".m", Dim::mass);
    in.p.G = cfg.number(sec + ".G", Dim::coupling);
    in.p.V_offset = cfg.number(sec + ".V_offset", Dim::frequency, 0.0);
    const std::string trap = cfg.choice(sec + ".trap", {"none", "harmonic"}, "none");
    if (trap == "harmonic") {
        const double w = cfg.number(sec + ".trap_omega", Dim::frequency);
        in.p.V = RealField2D::like(grid);
        in.p.V.fill_with([&](double x, double y) { return 0.5 * in.p.m * w * w * (x * x + y * y); });
    }
    try {
        in.p.validate();
    } catch (const DomainError& e) {
        throw ConfigError(0, e.what());
    }
    const std::string init = cfg.choice(sec + ".initial", {"uniform", "gaussian", "ground_state", "file"}, "uniform");
    if (init == "file") {
        in.psi = read_field(cfg.text(sec + ".file"));
        if (!in.psi.same_grid(grid)) throw ConfigError(cfg.line_of(sec + ".file"), "field file grid differs from [grid]");
    } else if (init == "uniform") {
        const double n = cfg.number(sec + ".density", Dim::density);
        const double v = cfg.number(sec + ".flow", Dim::velocity, 0.0);
        in.psi = geometry::uniform_flow_state(grid, n, v, in.p.m);
    } else if (init == "gaussian") {
        const double N = cfg.number(sec + ".n_total", Dim::none);
        const double s = cfg.number(sec + ".sigma", Dim::length);
        in.psi = grid;
        in.psi.fill_with([&](double x, double y) { return cplx(std::exp(-(x * x + y * y) / (4.0 * s * s))); });
        const double scale = std::sqrt(N / norm(in.psi));
        for (cplx& z : in.psi.values()) z *= scale;
    } else {
        const double N = cfg.number(sec + ".n_total", Dim::none);
        in.psi = fluid::ground_state(in.p, N, grid).psi;
    }
    const double noise = cfg.number(sec + ".noise", Dim::none, 0.0);
    if (noise > 0.0) {
        std::mt19937_64 rng(opt.seed);
        std::normal_distribution<double> d;
        for (cplx& z : in.psi.values()) z *= 1.0 + noise * cplx(d(rng), d(rng));
    }
    return in;
}

inline Outcome run_nlse(Config& cfg, Run& run, const Options& opt)
{
    // Read the plain keys first so a typo is reported before a long
    // ground-state solve.
    const double dt = cfg.number("nlse.dt", Dim::time);
    const std::size_t steps = cfg.count("nlse.steps");
    const std::size_t every = opt.snapshot_every ? opt.snapshot_every : cfg.count("io.snapshot_every", 0);
    NlseInput in = read_nlse_initial(cfg, "nlse", opt);
    cfg.require_all_used();

    const auto& p = in.p;
    const double N0 = norm(in.psi), E0 = fluid::energy(in.psi, p);
    run.write_field("nlse_initial.pfld", in.psi, {{"t", 0.0}, {"m", p.m}, {"G", p.G}});
    ComplexField2D psi = in.psi;
    double phase = 0.0;
    std::size_t done = 0;
    while (done < steps) {
        const std::size_t chunk = every ? std::min(every, steps - done) : steps - done;
        const auto r = fluid::evolve(psi, p, dt, chunk, opt.force);
        psi = r.psi;
        phase += r.global_phase;
        done += chunk;
        if (every && done < steps) {
            char name[64];
            std::snprintf(name, sizeof name, "nlse_%06zu.pfld", done);
            run.write_field(name, psi, {{"t", dt * static_cast<double>(done)}, {"global_phase", phase}});
        }
    }
    run.write_field("nlse_final.pfld", psi, {{"t", dt * static_cast<double>(steps)}, {"global_phase", phase}});

    const double nmax = fluid::detail::max_density(psi);
    const double c2 = fluid::excitation_speed_squared(nmax, p);
    json j;
    j["norm_initial"] = N0;
    j["norm_final"] = norm(psi);
    j["energy_initial"] = E0;
    j["energy_final"] = fluid::energy(psi, p);
    j["chemical_potential"] = fluid::chemical_potential(psi, p);
    j["global_phase"] = phase;
    j["c2_at_peak"] = c2;
    run.write_json("nlse.json", j);
    auto& d = run.derived();
    d["m"] = p.m;
    d["G"] = p.G;
    d["c_ex"] = c2 > 0.0 ? json(std::sqrt(c2)) : json(nullptr);
    d["xi"] = c2 > 0.0 ? json(1.0 / (std::abs(p.m) * std::sqrt(c2))) : json(nullptr);
    run.stage_status("nlse", "ok");
    return Outcome::ok;
}

// ---------------------------------------------------------------- metric

/// Background for the metric and kg stages: a field file or an analytic
/// profile.
inline geometry::HydroFields read_background(Config& cfg, std::optional<ComplexField2D>* psi_out = nullptr)
{
    const std::string kind = cfg.choice("metric.background", {"file", "uniform_flow", "sink", "tanh"}, "file");
    fluid::FluidParams p;
    p.m = cfg.number("metric.m", Dim::mass);
    if (kind == "file") {
        p.G = cfg.number("metric.G", Dim::coupling);
        const ComplexField2D psi = read_field(cfg.text("metric.file"));
        if (psi_out) *psi_out = psi;
        try {
            return geometry::hydro_fields(psi, p);
        } catch (const DomainError& e) {
            throw ConfigError(0, e.what());
        }
    }
    ComplexField2D grid = detail::read_grid(cfg);
    const RealField2D rg = RealField2D::like(grid);
    auto zero = [](double, double) { return 0.0; };
    if (kind == "uniform_flow") {
        p.G = cfg.number("metric.G", Dim::coupling);
        const double n = cfg.number("metric.density", Dim::density);
        const double v = cfg.number("metric.flow", Dim::velocity);
        try {
            return geometry::hydro_fields(geometry::uniform_flow_state(grid, n, v, p.m), p);
        } catch (const DomainError& e) {
            throw ConfigError(0, e.what());
        }
    }
    if (kind == "sink") {
        // |v0| = D / r towards the origin, uniform c; G fixed by c.
        const double D = cfg.number("metric.D", Dim::circulation);
        const double c = cfg.number("metric.c", Dim::velocity);
        const double n = cfg.number("metric.density", Dim::density, 1.0);
        const double h = std::min(grid.dx(), grid.dy());
        auto v = [=](double x, double y, bool xcomp) {
            const double r = std::hypot(x, y);
            if (r == 0.0) return xcomp ? -D / h : 0.0;
            return -D / std::max(r, h) * (xcomp ? x : y) / r;
        };
        return geometry::hydro_from_profiles(
            rg, [=](double, double) { return n; }, [=](double x, double y) { return v(x, y, true); },
            [=](double x, double y) { return v(x, y, false); }, p.m, c * c * p.m / n);
    }
    // tanh density step, flux conserved: n v = flux.
    p.G = cfg.number("metric.G", Dim::coupling);
    const double n0 = cfg.number("metric.n0", Dim::density);
    const double a = cfg.number("metric.contrast", Dim::none);
    const double w = cfg.number("metric.width", Dim::length);
    const double flux = cfg.number("metric.flux", Dim::flux);
    if (!(std::abs(a) < 1.0)) throw ConfigError(cfg.line_of("metric.contrast"), "metric.contrast must lie in (-1, 1)");
    auto n = [=](double x, double) { return n0 * (1.0 + a * std::tanh(x / w)); };
    return geometry::hydro_from_profiles(
        rg, n, [=](double x, double y) { return flux / n(x, y); }, zero, p.m, p.G);
}

inline json polylines_json(const std::vector<geometry::Polyline>& hz)
{
    json a = json::array();
    for (const auto& pl : hz) {
        json pts = json::array();
        for (const auto& q : pl.points) pts.push_back({q[0], q[1]});
        a.push_back({{"closed", pl.closed}, {"points", pts}});
    }
    return a;
}

inline void write_metric_fields(Run& run, const geometry::MetricField& M)
{
    auto sig = RealField2D::like(M.c2);
    for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = static_cast<double>(M.signature[i]);
    run.write_field("metric_conformal.pfld", M.conformal, {{"field", "conformal factor n/(|m| |c|)"}});
    run.write_field("metric_c2.pfld", M.c2, {{"field", "c^2"}});
    run.write_field("metric_vx.pfld", M.vx, {{"field", "v0 x"}});
    run.write_field("metric_vy.pfld", M.vy, {{"field", "v0 y"}});
    run.write_field("metric_sqrt_minus_g.pfld", M.sqrt_minus_g, {{"field", "sqrt(-g), NaN off Lorentzian points"}});
    run.write_field("metric_signature.pfld", sig, {{"field", "0 lorentzian, 1 euclidean, 2 degenerate"}});
}

inline json signature_counts(const geometry::MetricField& M)
{
    using geometry::Signature;
    return {{"lorentzian", M.count(Signature::Lorentzian)},
            {"euclidean", M.count(Signature::Euclidean)},
            {"degenerate", M.count(Signature::Degenerate)}};
}

inline Outcome run_metric(Config& cfg, Run& run, const Options&)
{
    std::optional<ComplexField2D> psi;
    const geometry::HydroFields hf = read_background(cfg, &psi);
    cfg.require_all_used();
    const geometry::MetricField M = geometry::build_metric(hf);
    write_metric_fields(run, M);
    json j;
    j["m"] = hf.m;
    j["G"] = hf.G;
    j["signature_counts"] = signature_counts(M);
    j["vortices"] = json::array();
    if (psi)
        for (const auto& v : geometry::madelung(*psi).vortices)
            j["vortices"].push_back({{"x", v.x}, {"y", v.y}, {"charge", v.charge}});
    std::string skip;
    bool euclid = false;
    for (std::size_t i = 0; i < hf.c2.size(); ++i)
        if (hf.valid[i] && !(hf.c2[i] > 0.0)) euclid = true;
    if (euclid) {
        skip = "c^2 <= 0 on valid points (Euclidean signature): horizon analysis disabled";
        j["horizons"] = nullptr;
        j["horizon_skipped"] = skip;
    } else {
        const auto hz = geometry::find_horizon(hf);
        j["horizons"] = polylines_json(hz);
        run.write_json("horizons.json", polylines_json(hz));
    }
    run.write_json("metric.json", j);
    run.derived()["signature"] = signature_counts(M);
    if (euclid) {
        run.stage_status("metric", "gated", skip);
        return Outcome::gated;
    }
    run.stage_status("metric", "ok");
    return Outcome::ok;
}

// ---------------------------------------------------------------- kg

inline Outcome run_kg(Config& cfg, Run& run, const Options& opt)
{
    const geometry::HydroFields hf = read_background(cfg);
    const std::string init = cfg.choice("kg.initial", {"pulse", "mode", "file"}, "pulse");
    const double amp = cfg.number("kg.amplitude", Dim::none, 1.0);
    double x0 = 0.0, sigma = 1.0, k = 0.0;
    std::string direction = "upstream", file, file_dot;
    if (init == "pulse") {
        x0 = cfg.number("kg.x0", Dim::length, 0.0);
        sigma = cfg.number("kg.sigma", Dim::length);
        direction = cfg.choice("kg.direction", {"upstream", "downstream", "static"}, "upstream");
    } else if (init == "mode") {
        k = cfg.number("kg.k", Dim::wavenumber);
    } else {
        file = cfg.text("kg.file");
        file_dot = cfg.text("kg.file_dot", "");
    }
    const double cfl_fraction = cfg.number("kg.cfl_fraction", Dim::none, 0.5);
    const std::size_t steps = cfg.count("kg.steps");
    const std::size_t every = cfg.count("kg.sample_every", std::max<std::size_t>(1, steps / 200));
    std::optional<double> dt_cfg;
    if (cfg.has("kg.dt")) dt_cfg = cfg.number("kg.dt", Dim::time);
    const bool crosscheck = cfg.flag("kg.crosscheck", false);
    const double k_xi = crosscheck ? cfg.number("kg.k_xi", Dim::none, 0.1) : 0.0;
    const bool uniform_bg = cfg.choice("metric.background", {"file", "uniform_flow", "sink", "tanh"}, "file") == "uniform_flow";
    if (crosscheck && !uniform_bg)
        throw ConfigError(cfg.line_of("kg.crosscheck"), "kg.crosscheck needs metric.background = uniform_flow");
    const double density = crosscheck ? cfg.number("metric.density", Dim::density) : 0.0;
    cfg.require_all_used();

    const geometry::MetricField M = geometry::build_metric(hf);
    run.derived()["signature"] = signature_counts(M);
    const RealField2D& g = M.c2;
    auto th = RealField2D::like(g), tt = RealField2D::like(g);
    if (init == "pulse") {
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const double x = g.x(i), e = amp * std::exp(-std::pow((x - x0) / sigma, 2));
                const double c = std::sqrt(std::max(M.c2(i, j), 0.0));
                const double s = direction == "upstream" ? M.vx(i, j) - c : direction == "downstream" ? M.vx(i, j) + c : 0.0;
                th(i, j) = e;
                tt(i, j) = s * 2.0 * (x - x0) / (sigma * sigma) * e;   // theta_t = -s theta_x
            }
    } else if (init == "mode") {
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const double w = std::sqrt(std::max(M.c2(i, j), 0.0)) * k + k * M.vx(i, j);
                th(i, j) = amp * std::cos(k * g.x(i));
                tt(i, j) = amp * w * std::sin(k * g.x(i));
            }
    } else {
        const ComplexField2D a = read_field(file);
        if (!a.same_grid(ComplexField2D::like(g))) throw ConfigError(cfg.line_of("kg.file"), "kg.file grid differs from the background");
        for (std::size_t i = 0; i < a.size(); ++i) th[i] = a[i].real();
        if (!file_dot.empty()) {
            const ComplexField2D b = read_field(file_dot);
            if (!b.same_grid(a)) throw ConfigError(cfg.line_of("kg.file_dot"), "kg.file_dot grid differs");
            for (std::size_t i = 0; i < b.size(); ++i) tt[i] = b[i].real();
        }
    }

    geometry::KgOptions ko;
    ko.force = opt.force;
    const double dt = dt_cfg ? *dt_cfg : cfl_fraction * geometry::kg_cfl_limit(M);
    geometry::KgSolver s(M, th, tt, dt, ko);   // gates non-Lorentzian backgrounds
    Csv csv({"t", "energy", "x_center", "y_center", "theta_rms"});
    auto sample = [&] {
        const auto e = s.energy_density();
        double sx = 0.0, sy = 0.0, se = 0.0, r2 = 0.0;
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const std::size_t q = j * g.nx() + i;
                sx += g.x(i) * e[q];
                sy += g.y(j) * e[q];
                se += e[q];
                r2 += s.theta()[q] * s.theta()[q];
            }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        csv.row({s.time(), s.energy(), se > 0.0 ? sx / se : nan, se > 0.0 ? sy / se : nan,
                 std::sqrt(r2 / static_cast<double>(g.size()))});
    };
    for (std::size_t n = 1; n <= steps; ++n) {
        s.step();
        if (n % every == 0 || n == steps) sample();
    }
    for (double v : s.theta())
        if (!std::isfinite(v)) throw NumericalError("kg_evolve: non-finite field");
    run.write_text("kg_series.csv", csv.str());
    auto out = RealField2D::like(g), out_dot = RealField2D::like(g);
    out.storage() = s.theta();
    out_dot.storage() = s.theta_dot();
    run.write_field("kg_theta.pfld", out, {{"t", s.time()}});
    run.write_field("kg_theta_dot.pfld", out_dot, {{"t", s.time()}});
    json j{{"dt", dt}, {"steps", steps}, {"t_final", s.time()}, {"energy_final", steps ? s.energy() : 0.0}};

    if (crosscheck) {
        geometry::UniformBackground bg;
        bg.n = density;
        bg.v = hf.vx[0];
        bg.params.m = hf.m;
        bg.params.G = hf.G;
        const ComplexField2D grid = ComplexField2D::like(g);
        const double xi = 1.0 / (std::abs(hf.m) * std::sqrt(density * hf.G / hf.m));
        const double kk = std::max(1.0, std::round(k_xi / xi * grid.lx() / (2.0 * pi))) * 2.0 * pi / grid.lx();
        const double w = std::sqrt(density * hf.G / hf.m) * kk + kk * geometry::quantized_flow(bg.v, hf.m, grid.lx());
        const auto rep = geometry::crosscheck_kg_vs_nlse(grid, bg, {kk, 1e-3 * amp}, 2.0 * pi / std::abs(w));
        Csv cc({"t", "deviation"});
        for (std::size_t q = 0; q < rep.t.size(); ++q) cc.row({rep.t[q], rep.deviation_at[q]});
        run.write_text("kg_crosscheck.csv", cc.str());
        j["crosscheck"] = {{"k_xi", rep.k_xi}, {"deviation", rep.deviation}, {"omega_kg", rep.omega_kg},
                           {"omega_bogoliubov", rep.omega_bogoliubov}, {"flow", rep.flow}};
        run.derived()["crosscheck_deviation"] = rep.deviation;
    }
    run.write_json("kg.json", j);
    run.stage_status("kg", "ok");
    return Outcome::ok;
}

// ---------------------------------------------------------------- pipeline

inline Outcome run_pipeline(Config& cfg, Run& run, const Options& opt)
{
    const RdrInput rin = read_rdr(cfg);
    const double g = cfg.number("pipeline.g", Dim::frequency);
    const std::string source = cfg.choice("pipeline.source", {"microcavity", "array", "direct"}, "microcavity");
    double m = 0.0;
    std::string mass_note;
    if (source == "microcavity") {
        elimination::MicrocavityGeometry geo;
        geo.q = static_cast<int>(cfg.integer("microcavity.q", 1));
        geo.l0 = cfg.scale().to_si(cfg.number("microcavity.l0", Dim::length), Dim::length);
        geo.R = cfg.scale().to_si(cfg.number("microcavity.R", Dim::length), Dim::length);
        const auto d = elimination::microcavity_params(geo);
        m = cfg.scale().to_natural(d.m, Dim::mass);
        mass_note = "microcavity photon mass";
    } else if (source == "array") {
        const double J = cfg.number("lattice.J", Dim::frequency);
        const double h = cfg.number("lattice.h", Dim::length);
        const double wc = cfg.number("lattice.omega_c", Dim::frequency, 0.0);
        m = lattice::continuum_params(J, h, wc).m;
        mass_note = "array band mass";
    } else {
        m = cfg.number("pipeline.m", Dim::mass);
        mass_note = "given";
    }
    std::optional<double> forced_G;
    if (cfg.has("pipeline.force_G")) forced_G = cfg.number("pipeline.force_G", Dim::coupling);
    const double density = cfg.number("pipeline.density", Dim::density);
    const double flow = cfg.number("pipeline.flow", Dim::velocity, 0.0);
    const double k_xi = cfg.number("pipeline.k_xi", Dim::none, 0.1);
    const double periods = cfg.number("pipeline.periods", Dim::none, 1.0);
    const ComplexField2D grid = detail::read_grid(cfg);
    cfg.require_all_used();
    auto& d = run.derived();

    // rdr
    const rdr::RdrReport r = rdr::analyze(rin.p, rin.op);
    run.write_json("rdr.json", rdr_json(r, rin.p));
    d["gamma_total"] = r.gamma_total;
    d["omega_m"] = r.omega_m;
    d["n_f"] = r.n_f_defined ? json(r.n_f) : json(nullptr);
    d["gamma_over_kappa"] = std::isfinite(r.ratio_gamma_kappa) ? json(r.ratio_gamma_kappa) : json("inf");
    if (!r.stable) {
        run.stage_status("rdr", "gated", "operating point unstable");
        for (const char* s : {"kernel", "nlse", "metric", "horizon", "kg"}) run.stage_status(s, "skipped", "rdr gated");
        return Outcome::gated;
    }
    run.stage_status("rdr", "ok");

    // kernel: the renormalized mechanics is the reservoir.
    const elimination::KernelParams kp{r.omega_m, r.gamma_total, g};
    const double G_kernel = elimination::kerr_coupling(kp);
    const double G = forced_G.value_or(G_kernel);
    d["G_kernel"] = G_kernel;
    d["G"] = G;
    d["m"] = m;
    d["mass_source"] = mass_note;
    run.write_json("kernel.json", {{"omega_m", kp.omega_m}, {"gamma", kp.gamma}, {"g", g},
                                   {"T_inf", elimination::memory_kernel_limit(kp)}, {"G", G_kernel},
                                   {"G_used", G}, {"forced", forced_G.has_value()}});
    run.stage_status("kernel", "ok");

    // nlse background: uniform density with imposed (quantized) flow.
    fluid::FluidParams fp;
    fp.m = m;
    fp.G = G;
    const ComplexField2D psi = geometry::uniform_flow_state(grid, density, flow, m);
    run.write_field("nlse_background.pfld", psi, {{"m", m}, {"G", G}, {"density", density},
                                                 {"flow", geometry::quantized_flow(flow, m, grid.lx())}});
    const double c2 = fluid::excitation_speed_squared(density, fp);
    d["c2"] = c2;
    d["c_ex"] = c2 > 0.0 ? json(std::sqrt(c2)) : json(nullptr);
    d["xi"] = c2 > 0.0 ? json(1.0 / (std::abs(m) * std::sqrt(c2))) : json(nullptr);
    run.stage_status("nlse", "ok");

    // metric
    const geometry::HydroFields hf = geometry::hydro_fields(psi, fp);
    const geometry::MetricField M = geometry::build_metric(hf);
    write_metric_fields(run, M);
    d["signature"] = signature_counts(M);
    if (!M.all_lorentzian()) {
        char gm[32];
        std::snprintf(gm, sizeof gm, "%.6g", G * m);
        const std::string why = std::string("metric is ") +
                                (M.count(geometry::Signature::Euclidean) == M.c2.size() ? "Euclidean everywhere" : "not Lorentzian everywhere") +
                                " (G m = " + gm + " < 0)";
        run.write_json("metric.json", {{"signature_counts", signature_counts(M)}, {"note", why}});
        run.stage_status("metric", "ok", why);
        run.stage_status("horizon", "skipped", "Euclidean signature");
        run.stage_status("kg", "skipped", "Klein-Gordon propagation needs a Lorentzian metric");
        return Outcome::gated;
    }
    run.write_json("metric.json", {{"signature_counts", signature_counts(M)}});
    run.stage_status("metric", "ok");

    const auto hz = geometry::find_horizon(hf);
    run.write_json("horizons.json", polylines_json(hz));
    d["horizons"] = hz.size();
    run.stage_status("horizon", "ok");

    // kg crosscheck on the same background.
    geometry::UniformBackground bg{density, flow, fp};
    const double xi = 1.0 / (std::abs(m) * std::sqrt(c2));
    const double k = std::max(1.0, std::round(k_xi / xi * grid.lx() / (2.0 * pi))) * 2.0 * pi / grid.lx();
    const double w = std::sqrt(c2) * k + k * geometry::quantized_flow(flow, m, grid.lx());
    const auto rep = geometry::crosscheck_kg_vs_nlse(grid, bg, {k, 1e-3}, periods * 2.0 * pi / std::abs(w));
    Csv cc({"t", "deviation"});
    for (std::size_t q = 0; q < rep.t.size(); ++q) cc.row({rep.t[q], rep.deviation_at[q]});
    run.write_text("kg_crosscheck.csv", cc.str());
    d["crosscheck"] = {{"k_xi", rep.k_xi}, {"deviation", rep.deviation}, {"omega_kg", rep.omega_kg},
                       {"omega_bogoliubov", rep.omega_bogoliubov}};
    run.stage_status("kg", "ok");
    (void)opt;
    return Outcome::ok;
}

}  // namespace optofluid::cli
