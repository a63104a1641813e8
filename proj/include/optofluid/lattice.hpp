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

// Mean-field dynamics of a square array of optomechanical cells with
// nearest-neighbour photon hopping, and its continuum limit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "optofluid/elimination.hpp"
#include "optofluid/error.hpp"
#include "optofluid/field.hpp"
#include "optofluid/fluid.hpp"

namespace optofluid::lattice {

/// How the damping rates enter the equations of motion: `literal` uses
/// -(i w + kappa), `half` uses -(i w + kappa/2).
enum class DampingConvention { literal, half };

struct LatticeParams {
    std::size_t Nx = 16, Ny = 16;
    double h = 1.0;
    double omega_c = 0.0;
    double omega_m = 1.0;
    double gamma = 0.0;
    double kappa = 0.0;
    double g_prime = 0.0;
    double J = 0.0;
    DampingConvention convention = DampingConvention::literal;

    void validate() const
    {
        if (Nx < 4 || Ny < 4) throw DomainError("LatticeParams: Nx, Ny must be >= 4");
        if (!(h > 0.0)) throw DomainError("LatticeParams: h must be > 0");
        for (double v : {omega_c, omega_m, gamma, kappa, g_prime, J})
            if (!std::isfinite(v)) throw DomainError("LatticeParams: non-finite parameter");
    }

    double damping_factor() const noexcept { return convention == DampingConvention::literal ? 1.0 : 0.5; }
    double kappa_eff() const noexcept { return damping_factor() * kappa; }
    double gamma_eff() const noexcept { return damping_factor() * gamma; }
};

struct LatticeState {
    std::size_t Nx = 0, Ny = 0;
    std::vector<cplx> a, b;
    double t = 0.0;

    LatticeState() = default;
    LatticeState(std::size_t nx, std::size_t ny) : Nx(nx), Ny(ny), a(nx * ny), b(nx * ny) {}

    cplx& at(std::vector<cplx>& f, std::size_t i, std::size_t j) { return f[j * Nx + i]; }
    std::size_t size() const noexcept { return Nx * Ny; }
};

inline double lattice_dispersion(double ki, double kj, double omega_c, double J)
{
    return omega_c + 2.0 * J * (std::cos(ki) + std::cos(kj));
}

struct StepOptions {
    bool force = false;
};

namespace detail {

inline void lattice_rhs(const LatticeParams& p, const std::vector<cplx>& a, const std::vector<cplx>& b,
                        std::vector<cplx>& da, std::vector<cplx>& db)
{
    const std::size_t Nx = p.Nx, Ny = p.Ny;
    const cplx ia(p.kappa_eff(), p.omega_c), ib(p.gamma_eff(), p.omega_m);
    const cplx I(0.0, 1.0);
    for (std::size_t j = 0; j < Ny; ++j) {
        const std::size_t jm = (j + Ny - 1) % Ny, jp = (j + 1) % Ny;
        for (std::size_t i = 0; i < Nx; ++i) {
            const std::size_t im = (i + Nx - 1) % Nx, ip = (i + 1) % Nx;
            const std::size_t s = j * Nx + i;
            const cplx hop = a[j * Nx + im] + a[j * Nx + ip] + a[jp * Nx + i] + a[jm * Nx + i];
            da[s] = -ia * a[s] + I * p.g_prime * (2.0 * b[s].real()) * a[s] - I * p.J * hop;
            db[s] = -ib * b[s] + I * p.g_prime * std::norm(a[s]);
        }
    }
}

}  // namespace detail

/// Stability heuristic used by step_lattice.
inline double lattice_stiffness(const LatticeParams& p, double dt)
{
    return dt * std::max(std::abs(p.omega_c) + 4.0 * std::abs(p.J), std::abs(p.omega_m));
}

/// One RK4 step of
///   da/dt = -(i w_c + k) a + i g' (b + b*) a - i J (sum of four neighbours)
///   db/dt = -(i w_m + g) b + i g' |a|^2
/// on a periodic lattice, with (k, g) = (kappa, gamma) or half of them.
inline LatticeState step_lattice(const LatticeState& s, const LatticeParams& p, double dt, const StepOptions& opt = {})
{
    p.validate();
    if (s.Nx != p.Nx || s.Ny != p.Ny || s.a.size() != p.Nx * p.Ny || s.b.size() != p.Nx * p.Ny)
        throw PreconditionError("step_lattice: state shape does not match parameters");
    if (lattice_stiffness(p, dt) > 0.1 && !opt.force)
        throw PreconditionError("step_lattice: dt * max(|w_c| + 4|J|, w_m) = " + std::to_string(lattice_stiffness(p, dt)) +
                                " > 0.1");
    const std::size_t N = s.size();
    std::vector<cplx> ka[4], kb[4];
    for (int q = 0; q < 4; ++q) ka[q].resize(N), kb[q].resize(N);
    std::vector<cplx> ta(N), tb(N);
    detail::lattice_rhs(p, s.a, s.b, ka[0], kb[0]);
    const double c[3] = {0.5 * dt, 0.5 * dt, dt};
    for (int q = 0; q < 3; ++q) {
        for (std::size_t i = 0; i < N; ++i) {
            ta[i] = s.a[i] + c[q] * ka[q][i];
            tb[i] = s.b[i] + c[q] * kb[q][i];
        }
        detail::lattice_rhs(p, ta, tb, ka[q + 1], kb[q + 1]);
    }
    LatticeState out = s;
    for (std::size_t i = 0; i < N; ++i) {
        out.a[i] += dt / 6.0 * (ka[0][i] + 2.0 * ka[1][i] + 2.0 * ka[2][i] + ka[3][i]);
        out.b[i] += dt / 6.0 * (kb[0][i] + 2.0 * kb[1][i] + 2.0 * kb[2][i] + kb[3][i]);
    }
    out.t = s.t + dt;
    return out;
}

/// Repeated step_lattice with a finiteness check after every step.
inline LatticeState evolve_lattice(LatticeState s, const LatticeParams& p, double dt, std::size_t steps,
                                   const StepOptions& opt = {})
{
    for (std::size_t n = 0; n < steps; ++n) {
        s = step_lattice(s, p, dt, opt);
        for (std::size_t i = 0; i < s.size(); ++i)
            if (!std::isfinite(s.a[i].real()) || !std::isfinite(s.a[i].imag()) || !std::isfinite(s.b[i].real()) ||
                !std::isfinite(s.b[i].imag()))
                throw NumericalError("step_lattice: non-finite value at step " + std::to_string(n + 1));
    }
    return s;
}

struct ContinuumParams {
    double m;
    double V_tilde;
    bool negative_mass;
};

/// Expanding the band to second order about k = 0 gives
/// w ~ w_c + 4J - J h^2 k^2, i.e. m = -hbar / (2 J h^2) and V = hbar (w_c + 4J).
inline ContinuumParams continuum_params(double J, double h, double omega_c, double hbar = 1.0)
{
    if (J == 0.0) throw DomainError("continuum_params: J = 0 leaves no kinetic term");
    if (!(h > 0.0)) throw DomainError("continuum_params: h must be > 0");
    const double m = -hbar / (2.0 * J * h * h);
    return {m, hbar * (omega_c + 4.0 * J), m < 0.0};
}

/// Kerr coupling of the eliminated array. Under the literal convention the
/// phonon amplitude relaxes at gamma, i.e. at energy rate 2 gamma.
inline double array_kerr_coupling(const LatticeParams& p)
{
    elimination::KernelParams k{p.omega_m, 2.0 * p.gamma_eff(), p.g_prime};
    return elimination::kerr_coupling(k);
}

inline LatticeState lattice_from_field(const ComplexField2D& f)
{
    LatticeState s(f.nx(), f.ny());
    for (std::size_t i = 0; i < f.size(); ++i) s.a[i] = f[i];
    return s;
}

struct ContinuumError {
    double field_error = 0.0;     // relative L2 of the complex fields
    double density_error = 0.0;   // relative L2 of |field|^2
    double max_kh = 0.0;          // largest |k| h carrying spectral weight
    double rms_kh = 0.0;
};

/// Largest and rms |k| h of the spectral content of a lattice field.
inline std::pair<double, double> spectral_kh(const ComplexField2D& f)
{
    Spectral spec(f);
    std::vector<cplx> hat(f.size());
    spec.fft().forward(f.values(), hat);
    double peak = 0.0, tot = 0.0, mom = 0.0, kmax = 0.0;
    for (const cplx& z : hat) peak = std::max(peak, std::norm(z));
    for (std::size_t j = 0; j < f.ny(); ++j)
        for (std::size_t i = 0; i < f.nx(); ++i) {
            const double w = std::norm(hat[j * f.nx() + i]);
            const double k2 = spec.k2(i, j);
            tot += w;
            mom += w * k2;
            if (w > 1e-12 * peak) kmax = std::max(kmax, std::sqrt(k2));
        }
    const double h = f.dx();
    return {kmax * h, tot > 0.0 ? std::sqrt(mom / tot) * h : 0.0};
}

/// Evolves the lattice (RK4, dt) and the continuum NLSE (split-step) from the
/// same sampled field for time t_final and compares them. The lattice must
/// start with b = 0 and a equal to the NLSE samples; the continuum side uses
/// the eliminated Kerr coupling and the same optical damping.
inline ContinuumError continuum_error(const LatticeState& lattice, const ComplexField2D& nlse_field,
                                      const LatticeParams& p, double t_final, double dt)
{
    p.validate();
    if (lattice.Nx != nlse_field.nx() || lattice.Ny != nlse_field.ny() || nlse_field.dx() != p.h ||
        nlse_field.dy() != p.h || lattice.Nx != p.Nx || lattice.Ny != p.Ny)
        throw PreconditionError("continuum_error: incompatible grids (need Nx x Ny sites with spacing h)");
    for (std::size_t i = 0; i < lattice.size(); ++i)
        if (std::abs(lattice.a[i] - nlse_field[i]) > 1e-12 * (1.0 + std::abs(nlse_field[i])))
            throw PreconditionError("continuum_error: lattice must be initialised from the sampled NLSE field");
    if (!(t_final > 0.0) || !(dt > 0.0)) throw PreconditionError("continuum_error: t_final and dt must be > 0");

    const auto steps = static_cast<std::size_t>(std::llround(t_final / dt));
    if (steps == 0 || std::abs(static_cast<double>(steps) * dt - t_final) > 1e-9 * t_final)
        throw PreconditionError("continuum_error: t_final must be a multiple of dt");

    const LatticeState lat = evolve_lattice(lattice, p, dt, steps);

    const ContinuumParams cp = continuum_params(p.J, p.h, p.omega_c);
    fluid::FluidParams fp;
    fp.m = cp.m;
    fp.G = p.g_prime == 0.0 ? 0.0 : array_kerr_coupling(p);
    fp.V_offset = cp.V_tilde;
    const fluid::EvolveResult cont = fluid::evolve(nlse_field, fp, dt, steps, true);
    const cplx carrier = std::polar(std::exp(-p.kappa_eff() * t_final), cont.global_phase);

    ContinuumError e;
    double num = 0.0, den = 0.0, nnum = 0.0, nden = 0.0;
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const cplx c = cont.psi[i] * carrier;
        num += std::norm(lat.a[i] - c);
        den += std::norm(c);
        nnum += std::pow(std::norm(lat.a[i]) - std::norm(c), 2);
        nden += std::pow(std::norm(c), 2);
    }
    e.field_error = std::sqrt(num / den);
    e.density_error = std::sqrt(nnum / nden);
    std::tie(e.max_kh, e.rms_kh) = spectral_kh(nlse_field);
    return e;
}

}  // namespace optofluid::lattice
