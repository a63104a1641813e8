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

// Adiabatic elimination of a strongly damped mechanical mode, leaving an
// effective Kerr interaction for the photon field. Natural units, hbar = 1,
// unless a function says otherwise.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "optofluid/constants.hpp"
#include "optofluid/error.hpp"

namespace optofluid::elimination {

using cplx = std::complex<double>;

/// gamma is the energy damping rate: the mechanical amplitude decays as
/// exp(-gamma t / 2).
struct KernelParams {
    double omega_m = 1.0;
    double gamma = 1.0;
    double g = 0.0;
};

struct MicrocavityGeometry {
    int q = 1;          // longitudinal mode number
    double l0 = 1e-6;   // mirror spacing, m
    double R = 1.0;     // mirror radius of curvature, m
};

struct MicrocavityDerived {
    double m;      // effective photon mass, kg
    double Omega;  // trap frequency, rad/s
    double g0;     // single-photon optomechanical coupling, rad/s per m
};

inline MicrocavityDerived microcavity_params(const MicrocavityGeometry& geom)
{
    if (geom.q < 1) throw DomainError("microcavity_params: q must be >= 1");
    if (!(geom.l0 > 0.0) || !(geom.R > 0.0)) throw DomainError("microcavity_params: l0 and R must be > 0");
    const double qpi = geom.q * pi;
    return {si::hbar * qpi / (si::c * geom.l0), si::c * std::sqrt(2.0 / (geom.l0 * geom.R)), qpi * si::c / (geom.l0 * geom.l0)};
}

/// T(t) = int_0^t exp(-gamma s/2) sin(omega_m s) ds.
///
/// Substituting s = t - t' shows this equals the retarded form
/// -int_0^t exp(-gamma (t - t')/2) sin(omega_m (t' - t)) dt'.
inline double memory_kernel(double t, const KernelParams& k)
{
    if (t < 0.0) throw DomainError("memory_kernel: t must be >= 0");
    // Im[(exp(z t) - 1) / z], z = i omega_m - gamma/2
    const cplx z(-0.5 * k.gamma, k.omega_m);
    if (std::abs(z) == 0.0) return 0.0;
    return ((std::exp(z * t) - 1.0) / z).imag();
}

/// T(infinity) = omega_m / (gamma^2/4 + omega_m^2). Requires gamma > 0 for
/// the limit to exist; gamma = 0 returns the formula value.
inline double memory_kernel_limit(const KernelParams& k)
{
    return k.omega_m / (0.25 * k.gamma * k.gamma + k.omega_m * k.omega_m);
}

/// Effective Kerr coupling -2 hbar g^2 T(infinity).
inline double kerr_coupling(const KernelParams& k, double hbar = 1.0)
{
    if (k.gamma < 0.0) throw DomainError("kerr_coupling: gamma must be >= 0");
    if (!(k.omega_m > 0.0))
        throw PhysicsGateError("kerr_coupling: omega_m <= 0, mechanics unstable and elimination invalid");
    return -2.0 * hbar * k.g * k.g * memory_kernel_limit(k);
}

struct EliminationOptions {
    double Delta = 0.0;     // optical detuning, removed from the compared phase
    double dt = 0.0;        // 0 selects min(0.02/omega_m, 0.1/gamma)
    double norm_drift_limit = 1e-8;
    std::size_t samples = 2000;
};

struct EliminationResult {
    double err_norm = 0.0;               // relative L2 phase error on [5/gamma, t_final]
    double final_phase_full = 0.0;       // nonlinear phase at t_final (Delta t removed)
    double final_phase_eliminated = 0.0;
    double max_norm_step_drift = 0.0;    // largest per-step relative change of |Psi|^2
    std::vector<double> t, phase_full, phase_eliminated;
};

namespace detail {

struct TwoMode {
    cplx psi, b;
};

inline TwoMode operator+(const TwoMode& a, const TwoMode& b) { return {a.psi + b.psi, a.b + b.b}; }
inline TwoMode operator*(double s, const TwoMode& a) { return {s * a.psi, s * a.b}; }

}  // namespace detail

/// Zero-dimensional check of the elimination: integrates the full
/// photon-phonon pair and the eliminated Kerr equation from the same initial
/// state and compares the accumulated phase.
inline EliminationResult validate_elimination(const KernelParams& k, double n_photon, double t_final,
                                              const EliminationOptions& opt = {})
{
    if (!(k.gamma > 0.0)) throw DomainError("validate_elimination: gamma must be > 0");
    if (!(k.omega_m > 0.0)) throw PhysicsGateError("validate_elimination: omega_m must be > 0");
    if (!(t_final > 5.0 / k.gamma)) throw DomainError("validate_elimination: t_final must exceed 5/gamma");
    if (n_photon < 0.0) throw DomainError("validate_elimination: n_photon must be >= 0");

    const double dt_max = std::min(0.02 / k.omega_m, 0.1 / k.gamma);
    const double dt_req = opt.dt > 0.0 ? opt.dt : dt_max;
    const auto steps = static_cast<std::size_t>(std::ceil(t_final / dt_req));
    const double dt = t_final / static_cast<double>(steps);

    const double g = k.g;
    const cplx mech(k.omega_m, -0.5 * k.gamma);
    auto rhs = [&](const detail::TwoMode& y) -> detail::TwoMode {
        const double x = 2.0 * y.b.real();
        return {cplx(0.0, -1.0) * (opt.Delta - g * x) * y.psi, cplx(0.0, -1.0) * mech * y.b + cplx(0.0, g * std::norm(y.psi))};
    };

    const double kerr_rate = 2.0 * g * g * memory_kernel_limit(k) * n_photon;
    const double t_start = 5.0 / k.gamma;
    const std::size_t stride = std::max<std::size_t>(1, steps / std::max<std::size_t>(1, opt.samples));

    EliminationResult res;
    detail::TwoMode y{cplx(std::sqrt(n_photon), 0.0), cplx{}};
    double phase = 0.0;
    for (std::size_t i = 1; i <= steps; ++i) {
        const auto k1 = rhs(y);
        const auto k2 = rhs(y + (0.5 * dt) * k1);
        const auto k3 = rhs(y + (0.5 * dt) * k2);
        const auto k4 = rhs(y + dt * k3);
        const detail::TwoMode next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (n_photon > 0.0) {
            const double drift = std::abs(std::norm(next.psi) - std::norm(y.psi)) / std::norm(y.psi);
            res.max_norm_step_drift = std::max(res.max_norm_step_drift, drift);
            if (!std::isfinite(drift) || std::abs(std::norm(next.psi) / n_photon - 1.0) > opt.norm_drift_limit)
                throw NumericalError("validate_elimination: |Psi|^2 drift beyond threshold; reduce dt");
            phase += std::arg(next.psi / y.psi);
        }
        y = next;
        const double t = dt * static_cast<double>(i);
        if (t >= t_start && (i % stride == 0 || i == steps)) {
            res.t.push_back(t);
            res.phase_full.push_back(phase + opt.Delta * t);
            res.phase_eliminated.push_back(kerr_rate * t);
        }
    }

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < res.t.size(); ++i) {
        const double d = res.phase_full[i] - res.phase_eliminated[i];
        num += d * d;
        den += res.phase_eliminated[i] * res.phase_eliminated[i];
    }
    res.err_norm = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    res.final_phase_full = phase + opt.Delta * t_final;
    res.final_phase_eliminated = kerr_rate * t_final;
    return res;
}

}  // namespace optofluid::elimination
