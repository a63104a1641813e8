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

// Two-dimensional photon fluid, hbar = 1:
//
//   i dPsi/dt = [-(1/2m) lap + V(r) + G |Psi|^2] Psi
//
// plus its linearization around a stationary background. The mass may be
// negative (array model); the Kerr coupling G carries either sign.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/field.hpp"

namespace optofluid::fluid {

struct FluidParams {
    double m = 1.0;
    double G = 0.0;
    RealField2D V;          // trap; an empty field means V = 0
    double V_offset = 0.0;  // constant part of the potential, e.g. m c^2 or w_c + 4J

    bool has_trap() const noexcept { return !V.empty(); }

    void validate() const
    {
        if (!std::isfinite(m) || m == 0.0) throw DomainError("FluidParams: m must be finite and nonzero");
        if (!std::isfinite(G)) throw DomainError("FluidParams: G must be finite");
        if (!std::isfinite(V_offset)) throw DomainError("FluidParams: V_offset must be finite");
        for (double v : V.values())
            if (!std::isfinite(v)) throw DomainError("FluidParams: V must be finite everywhere");
    }

    /// Minimum of the trap; removed from the integrated potential together
    /// with V_offset and accounted for as a global phase.
    double trap_floor() const
    {
        if (!has_trap()) return 0.0;
        return *std::min_element(V.storage().begin(), V.storage().end());
    }
};

namespace detail {

inline double max_density(const ComplexField2D& psi)
{
    double n = 0.0;
    for (const cplx& z : psi.values()) n = std::max(n, std::norm(z));
    return n;
}

inline void check_finite(const ComplexField2D& psi, const char* who, std::size_t step)
{
    for (const cplx& z : psi.values())
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw NumericalError(std::string(who) + ": non-finite value at step " + std::to_string(step));
}

}  // namespace detail

/// Strang split-step propagator: half potential/nonlinear kick, exact
/// kinetic drift in Fourier space, half kick.
class SplitStep {
public:
    SplitStep(const ComplexField2D& grid, const FluidParams& p, double dt)
        : p_(p), dt_(dt), spec_(grid), buf_(grid.size()), kin_(grid.size())
    {
        p_.validate();
        if (p_.has_trap()) require_same_grid(grid, p_.V, "SplitStep");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("SplitStep: dt must be > 0");
        offset_ = p_.V_offset + p_.trap_floor();
        const std::size_t nx = grid.nx();
        for (std::size_t j = 0; j < grid.ny(); ++j)
            for (std::size_t i = 0; i < nx; ++i)
                kin_[j * nx + i] = std::polar(1.0, -spec_.k2(i, j) / (2.0 * p_.m) * dt);
        vres_.assign(grid.size(), 0.0);
        if (p_.has_trap())
            for (std::size_t i = 0; i < grid.size(); ++i) vres_[i] = p_.V[i] - p_.trap_floor();
        vres_max_ = vres_.empty() ? 0.0 : *std::max_element(vres_.begin(), vres_.end());
    }

    double dt() const noexcept { return dt_; }
    double removed_offset() const noexcept { return offset_; }

    /// dt * max(|V| + |G| n_max, k_max^2 / 2|m|); the propagator is
    /// trusted when this is <= 0.1.
    double stiffness(const ComplexField2D& psi) const
    {
        const double pot = vres_max_ + std::abs(p_.G) * detail::max_density(psi);
        const double kin = spec_.k2_max() / (2.0 * std::abs(p_.m));
        return dt_ * std::max(pot, kin);
    }

    void step(ComplexField2D& psi)
    {
        kick(psi, 0.5 * dt_);
        spec_.fft().forward(psi.values(), buf_);
        for (std::size_t i = 0; i < buf_.size(); ++i) buf_[i] *= kin_[i];
        spec_.fft().inverse(buf_, psi.values());
        kick(psi, 0.5 * dt_);
    }

private:
    void kick(ComplexField2D& psi, double tau) const
    {
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double w = vres_[i] + p_.G * std::norm(psi[i]);
            psi[i] *= std::polar(1.0, -w * tau);
        }
    }

    FluidParams p_;
    double dt_;
    double offset_ = 0.0;
    Spectral spec_;
    std::vector<cplx> buf_, kin_;
    std::vector<double> vres_;
    double vres_max_ = 0.0;
};

struct EvolveResult {
    ComplexField2D psi;
    double global_phase = 0.0;    // -offset * t, not applied to psi
    double removed_offset = 0.0;
};

/// Real-time evolution. The constant part of V is not integrated; the
/// physical field is psi * exp(i global_phase).
inline EvolveResult evolve(const ComplexField2D& psi, const FluidParams& p, double dt, std::size_t steps,
                           bool force = false)
{
    SplitStep s(psi, p, dt);
    if (s.stiffness(psi) > 0.1 && !force)
        throw PreconditionError("evolve: dt too large (dt * max(|V| + |G| n, k_max^2/2|m|) = " +
                                std::to_string(s.stiffness(psi)) + " > 0.1); reduce dt or force");
    EvolveResult r{psi, 0.0, s.removed_offset()};
    for (std::size_t i = 0; i < steps; ++i) s.step(r.psi);
    detail::check_finite(r.psi, "evolve", steps);
    r.global_phase = -s.removed_offset() * dt * static_cast<double>(steps);
    return r;
}

struct EnergyParts {
    double kinetic = 0.0, potential = 0.0, interaction = 0.0;
    double total() const noexcept { return kinetic + potential + interaction; }
};

/// Gross-Pitaevskii energy functional, kinetic part evaluated spectrally.
inline EnergyParts energy_parts(const ComplexField2D& psi, const FluidParams& p)
{
    if (p.has_trap()) require_same_grid(psi, p.V, "energy");
    Spectral spec(psi);
    std::vector<cplx> hat(psi.size());
    spec.fft().forward(psi.values(), hat);
    const std::size_t nx = psi.nx();
    const double N = static_cast<double>(psi.size());
    EnergyParts e;
    for (std::size_t j = 0; j < psi.ny(); ++j)
        for (std::size_t i = 0; i < nx; ++i) e.kinetic += spec.k2(i, j) * std::norm(hat[j * nx + i]);
    e.kinetic *= psi.cell_area() / (N * 2.0 * p.m);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double n = std::norm(psi[i]);
        e.potential += ((p.has_trap() ? p.V[i] : 0.0) + p.V_offset) * n;
        e.interaction += 0.5 * p.G * n * n;
    }
    e.potential *= psi.cell_area();
    e.interaction *= psi.cell_area();
    return e;
}

inline double energy(const ComplexField2D& psi, const FluidParams& p) { return energy_parts(psi, p).total(); }

/// mu = (E_kin + E_pot + 2 E_int) / N.
inline double chemical_potential(const ComplexField2D& psi, const FluidParams& p)
{
    const EnergyParts e = energy_parts(psi, p);
    return (e.kinetic + e.potential + 2.0 * e.interaction) / norm(psi);
}

struct GroundStateOptions {
    double dt0 = 0.05;
    int levels = 4;           // dt ladder dt0, dt0/4, ...
    double tol = 1e-10;       // relative energy change per step
    double residual_tol = 1e-9;   // final level: |dPsi| / (dt |Psi| |E/N|)
    std::size_t max_steps_per_level = 200000;
};

struct GroundStateResult {
    ComplexField2D psi;
    double energy_per_particle = 0.0;
    double chemical_potential = 0.0;
    std::size_t iterations = 0;
};

/// Imaginary-time relaxation with norm restoration. For m < 0 the
/// extremal state of interest is the ground state of -H, so the flow runs
/// on -H. The effective interaction is attractive when G m < 0; collapse
/// below two grid cells is reported as a physics gate.
inline GroundStateResult ground_state(const FluidParams& p, double n_total, const ComplexField2D& grid,
                                      const GroundStateOptions& opt = {})
{
    p.validate();
    if (!(n_total > 0.0)) throw DomainError("ground_state: n_total must be > 0");
    if (p.has_trap()) require_same_grid(grid, p.V, "ground_state");

    const double sgn = p.m > 0.0 ? 1.0 : -1.0;
    const double m_eff = std::abs(p.m);
    const double G_eff = sgn * p.G;
    std::vector<double> vres(grid.size(), 0.0);
    if (p.has_trap()) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid.size(); ++i) lo = std::min(lo, sgn * p.V[i]);
        for (std::size_t i = 0; i < grid.size(); ++i) vres[i] = sgn * p.V[i] - lo;
    }

    Spectral spec(grid);
    auto psi = ComplexField2D::like(grid);
    const double w = 0.25 * std::min(grid.lx(), grid.ly());
    psi.fill_with([&](double x, double y) { return cplx(std::exp(-(x * x + y * y) / (2.0 * w * w)) + 0.05, 0.0); });
    auto renorm = [&](ComplexField2D& f) {
        const double s = std::sqrt(n_total / norm(f));
        for (cplx& z : f.values()) z *= s;
    };
    renorm(psi);

    FluidParams q;
    q.m = m_eff;
    q.G = G_eff;
    if (p.has_trap()) {
        q.V = RealField2D::like(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) q.V[i] = vres[i];
    }

    auto rms_width = [&](const ComplexField2D& f) {
        // periodic-safe: second moment about the density peak
        std::size_t ipk = 0;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (std::norm(f[i]) > std::norm(f[ipk])) ipk = i;
        const std::size_t px = ipk % f.nx(), py = ipk / f.nx();
        double s = 0.0, tot = 0.0;
        for (std::size_t j = 0; j < f.ny(); ++j)
            for (std::size_t i = 0; i < f.nx(); ++i) {
                auto wrap = [](double d, double L) { return d - L * std::round(d / L); };
                const double dx = wrap(f.x(i) - f.x(px), f.lx()), dy = wrap(f.y(j) - f.y(py), f.ly());
                const double n = std::norm(f(i, j));
                s += n * (dx * dx + dy * dy);
                tot += n;
            }
        return std::sqrt(s / tot);
    };

    std::vector<cplx> hat(grid.size()), kin(grid.size()), prev;
    GroundStateResult res;
    double dt = opt.dt0;
    double e_prev = energy(psi, q);
    const double min_width = 2.0 * std::min(grid.dx(), grid.dy());
    for (int level = 0; level < opt.levels; ++level, dt *= 0.25) {
        for (std::size_t j = 0; j < grid.ny(); ++j)
            for (std::size_t i = 0; i < grid.nx(); ++i)
                kin[j * grid.nx() + i] = std::exp(-spec.k2(i, j) / (2.0 * m_eff) * dt);
        const bool last = level + 1 == opt.levels;
        bool converged = false;
        for (std::size_t it = 0; it < opt.max_steps_per_level; ++it) {
            if (last) prev = psi.storage();
            for (std::size_t i = 0; i < psi.size(); ++i)
                psi[i] *= std::exp(-0.5 * dt * (vres[i] + G_eff * std::norm(psi[i])));
            spec.fft().forward(psi.values(), hat);
            for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= kin[i];
            spec.fft().inverse(hat, psi.values());
            for (std::size_t i = 0; i < psi.size(); ++i)
                psi[i] *= std::exp(-0.5 * dt * (vres[i] + G_eff * std::norm(psi[i])));
            renorm(psi);
            ++res.iterations;
            const bool finite = std::isfinite(psi[0].real()) && std::isfinite(norm(psi));
            if (G_eff < 0.0 && (!finite || rms_width(psi) < min_width))
                throw PhysicsGateError("ground_state: no stable ground state (attractive collapse below grid resolution)");
            if (!finite) throw NumericalError("ground_state: non-finite field");
            const double e = energy(psi, q);
            bool done = std::abs(e - e_prev) <= opt.tol * std::abs(e);
            if (done && last) {
                double d = 0.0, a = 0.0;
                for (std::size_t i = 0; i < psi.size(); ++i) {
                    d += std::norm(psi[i] - prev[i]);
                    a += std::norm(psi[i]);
                }
                const double scale = std::max(std::abs(e) / n_total, 1e-300);
                done = std::sqrt(d / a) / dt <= opt.residual_tol * scale;
            }
            e_prev = e;
            if (done) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw NumericalError("ground_state: no convergence at dt = " + std::to_string(dt) +
                                 " (last relative energy change above tolerance)");
    }
    // Energies are reported for the original H.
    res.psi = psi;
    res.energy_per_particle = energy(res.psi, p) / n_total;
    res.chemical_potential = chemical_potential(res.psi, p);
    return res;
}

/// Bogoliubov frequency omega(k) = sqrt(eps_k (eps_k + 2 n G)), eps_k = k^2/2m,
/// equal to c k sqrt(1 + k^2 xi^2 / 4) with c^2 = nG/m, xi = 1/(m c). When
/// nG/m < 0 at small k the result is purely imaginary (growth rate).
inline cplx bogoliubov_dispersion(double k, double n, const FluidParams& p)
{
    const double eps = k * k / (2.0 * p.m);
    return std::sqrt(cplx(eps * (eps + 2.0 * n * p.G), 0.0));
}

inline double excitation_speed_squared(double n, const FluidParams& p) { return n * p.G / p.m; }

/// Linearized fluctuation field phi = dPsi / Psi0, so that
/// Re phi = dn / (2 n) and Im phi = dtheta:
///
///   i dphi/dt = -(1/2m)[lap phi + 2 (grad Psi0 / Psi0) . grad phi] + n G (phi + phi*)
class BogoliubovStepper {
public:
    BogoliubovStepper(const ComplexField2D& psi0, const FluidParams& p, double floor_fraction = 1e-10)
        : p_(p), spec_(psi0), n_(psi0.size()), ux_(psi0.size()), uy_(psi0.size()), lap_(psi0.size()),
          gx_(psi0.size()), gy_(psi0.size())
    {
        p_.validate();
        const double nmax = detail::max_density(psi0);
        for (std::size_t i = 0; i < psi0.size(); ++i) {
            n_[i] = std::norm(psi0[i]);
            if (!(n_[i] > floor_fraction * nmax))
                throw PreconditionError("linearized_step: |Psi0| below threshold at index " + std::to_string(i) +
                                        "; mask vortex cores and nodes (see geometry::madelung)");
        }
        spec_.gradient(psi0.values(), ux_, uy_);
        for (std::size_t i = 0; i < psi0.size(); ++i) {
            ux_[i] /= psi0[i];
            uy_[i] /= psi0[i];
        }
        double kmax = spec_.k2_max() / (2.0 * std::abs(p_.m));
        omega_max_ = kmax + 2.0 * std::abs(p_.G) * nmax + std::sqrt(spec_.k2_max()) / std::abs(p_.m) * max_abs(ux_, uy_);
    }

    /// Upper bound on the spectral radius of the generator.
    double omega_max() const noexcept { return omega_max_; }

    void rhs(std::span<const cplx> phi, std::span<cplx> out)
    {
        spec_.laplacian(phi, lap_);
        spec_.gradient(phi, gx_, gy_);
        const double a = 1.0 / (2.0 * p_.m);
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const cplx h = -a * (lap_[i] + 2.0 * (ux_[i] * gx_[i] + uy_[i] * gy_[i])) +
                           n_[i] * p_.G * 2.0 * phi[i].real();
            out[i] = cplx(0.0, -1.0) * h;
        }
    }

    void step(ComplexField2D& phi, double dt)
    {
        if (dt * omega_max_ > 2.5)
            throw PreconditionError("linearized_step: dt * omega_max = " + std::to_string(dt * omega_max_) +
                                    " exceeds the RK4 stability bound");
        const std::size_t N = phi.size();
        k1_.resize(N), k2_.resize(N), k3_.resize(N), k4_.resize(N), tmp_.resize(N);
        rhs(phi.values(), k1_);
        for (std::size_t i = 0; i < N; ++i) tmp_[i] = phi[i] + 0.5 * dt * k1_[i];
        rhs(tmp_, k2_);
        for (std::size_t i = 0; i < N; ++i) tmp_[i] = phi[i] + 0.5 * dt * k2_[i];
        rhs(tmp_, k3_);
        for (std::size_t i = 0; i < N; ++i) tmp_[i] = phi[i] + dt * k3_[i];
        rhs(tmp_, k4_);
        for (std::size_t i = 0; i < N; ++i) phi[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    static double max_abs(const std::vector<cplx>& a, const std::vector<cplx>& b)
    {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]) + std::abs(b[i]));
        return m;
    }

    FluidParams p_;
    Spectral spec_;
    std::vector<double> n_;
    std::vector<cplx> ux_, uy_, lap_, gx_, gy_;
    std::vector<cplx> k1_, k2_, k3_, k4_, tmp_;
    double omega_max_ = 0.0;
};

inline ComplexField2D linearized_step(const ComplexField2D& dphi, const ComplexField2D& psi0, const FluidParams& p,
                                      double dt)
{
    require_same_grid(dphi, psi0, "linearized_step");
    BogoliubovStepper s(psi0, p);
    ComplexField2D out = dphi;
    s.step(out, dt);
    return out;
}

struct DispersionPoint {
    double k = 0.0;
    cplx omega;             // imaginary part > 0 means exponential growth
    bool resolved = false;
    std::string diagnostic;
};

struct DispersionOptions {
    double amplitude = 1e-3;
    double periods = 8.0;       // run length in units of the predicted period
    double max_time = 0.0;      // 0: no cap beyond `periods`
    double dt = 0.0;            // 0: chosen from the stepper's stability bound
};

namespace detail {

/// |sum_n w_n s_n e^{i omega t_n}| with a Hann window.
inline double windowed_power(const std::vector<double>& t, const std::vector<cplx>& s, double omega)
{
    const double T = t.back() - t.front();
    cplx acc{};
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * pi * (t[i] - t.front()) / T);
        acc += w * s[i] * std::polar(1.0, omega * t[i]);
    }
    return std::abs(acc);
}

inline double golden_max(auto&& f, double a, double b, double tol)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d, d = c, fd = fc;
            c = b - r * (b - a), fc = f(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + r * (b - a), fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Seeds phi = A cos(k x) on a uniform (possibly flowing) background, evolves
/// the linearized equation and reads the positive-frequency peak of the
/// projection onto exp(i k x). Unstable modes are reported through the
/// fitted growth rate as a purely imaginary omega.
inline std::vector<DispersionPoint> measure_dispersion(const ComplexField2D& psi0, const FluidParams& p,
                                                       const std::vector<double>& k_list,
                                                       const DispersionOptions& opt = {})
{
    const double n0 = std::norm(psi0[0]);
    for (const cplx& z : psi0.values())
        if (std::abs(std::norm(z) - n0) > 1e-8 * n0)
            throw PreconditionError("measure_dispersion: background density must be uniform");

    BogoliubovStepper stepper(psi0, p);
    std::vector<DispersionPoint> out;
    for (double k : k_list) {
        DispersionPoint pt;
        pt.k = k;
        const double j = k * psi0.lx() / (2.0 * pi);
        if (!(k > 0.0) || std::abs(j - std::round(j)) > 1e-9) {
            pt.diagnostic = "k is not a positive multiple of 2 pi / Lx";
            out.push_back(pt);
            continue;
        }
        // Largest natural frequency scale of this mode, used for the run length.
        const double eps = k * k / (2.0 * std::abs(p.m));
        const double scale = std::sqrt(std::abs(eps * (eps + 2.0 * n0 * std::abs(p.G)))) + eps;
        double T = opt.periods * 2.0 * pi / scale;
        if (opt.max_time > 0.0) T = std::min(T, opt.max_time);
        double dt = opt.dt > 0.0 ? opt.dt : std::min(2.0 / stepper.omega_max(), T / 400.0);
        const auto steps = static_cast<std::size_t>(std::ceil(T / dt));
        dt = T / static_cast<double>(steps);

        ComplexField2D phi = ComplexField2D::like(psi0);
        phi.fill_with([&](double x, double) { return cplx(opt.amplitude * std::cos(k * x), 0.0); });
        std::vector<cplx> basis(phi.size());
        for (std::size_t jy = 0; jy < phi.ny(); ++jy)
            for (std::size_t ix = 0; ix < phi.nx(); ++ix)
                basis[jy * phi.nx() + ix] = std::polar(1.0 / static_cast<double>(phi.size()), -k * phi.x(ix));
        auto project = [&]() {
            cplx s{};
            for (std::size_t i = 0; i < phi.size(); ++i) s += basis[i] * phi[i];
            return s;
        };

        std::vector<double> ts{0.0};
        std::vector<cplx> ss{project()};
        for (std::size_t i = 1; i <= steps; ++i) {
            stepper.step(phi, dt);
            ts.push_back(dt * static_cast<double>(i));
            ss.push_back(project());
        }

        // Exponential growth: compare the late-time log-amplitude slope.
        const std::size_t h = ss.size() / 2;
        const double a0 = std::abs(ss[h]), a1 = std::abs(ss.back());
        const double growth = std::log(a1 / a0) / (ts.back() - ts[h]);
        if (std::abs(ss.back()) > 20.0 * std::abs(ss.front())) {
            pt.omega = cplx(0.0, growth);
            pt.resolved = true;
            pt.diagnostic = "exponential growth (modulational instability)";
            out.push_back(pt);
            continue;
        }

        // Coarse peak from a zero-padded windowed transform, refined below.
        const double domega = 2.0 * pi / T;
        std::size_t npad = 1;
        while (npad < 4 * ss.size()) npad *= 2;
        std::vector<cplx> buf(npad), spec(npad);
        for (std::size_t i = 0; i < ss.size(); ++i)
            buf[i] = (0.5 - 0.5 * std::cos(2.0 * pi * ts[i] / T)) * ss[i];
        Fft2D(npad, 1).inverse(buf, spec);
        double best = 0.0, best_w = 0.0;
        for (std::size_t i = 1; i < npad / 2; ++i)
            if (std::abs(spec[i]) > best) best = std::abs(spec[i]), best_w = 2.0 * pi * static_cast<double>(i) / (static_cast<double>(npad) * dt);
        if (best_w <= 0.5 * domega) {
            pt.diagnostic = "unresolved peak: run too short for this k";
            out.push_back(pt);
            continue;
        }
        const double w = detail::golden_max([&](double x) { return detail::windowed_power(ts, ss, x); },
                                            best_w - 0.5 * domega, best_w + 0.5 * domega, 1e-10 * best_w);
        pt.omega = cplx(w, 0.0);
        pt.resolved = true;
        out.push_back(pt);
    }
    return out;
}

}  // namespace optofluid::fluid
