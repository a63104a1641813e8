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

// Reversed-dissipation-regime engineering: a high-Q mechanical mode is
// sideband-cooled by a lossy ancillary cavity mode, which renormalizes its
// damping and frequency.
//
// Conventions: all rates are angular frequencies in one common unit (usually
// omega_i = 1). The ancillary cavity field decays at kappa'/2 and the
// mechanical amplitude at gamma_i/2, matching the linearized Langevin pair
//   dc/dt = (i Dbar - kappa'/2) c - i G (d + d*)
//   dd/dt = -(i omega_i + gamma_i/2) d - i (G c* + G* c).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "optofluid/constants.hpp"
#include "optofluid/error.hpp"

namespace optofluid::rdr {

using cplx = std::complex<double>;

struct OptomechParams {
    double omega_i = 1.0;      // intrinsic mechanical frequency
    double gamma_i = 1e-5;     // intrinsic mechanical damping
    double kappa_prime = 0.2;  // ancillary cavity linewidth
    double kappa = 0.0;        // primary cavity linewidth
    double G0 = 0.0;           // single-photon coupling
    double eps = 0.0;          // drive rate
    double Delta = 0.0;        // bare laser detuning
    double n_th = 0.0;         // bath occupancy (dimensionless mode)

    void validate() const
    {
        if (!(omega_i > 0.0)) throw DomainError("omega_i must be > 0");
        if (!(gamma_i >= 0.0)) throw DomainError("gamma_i must be >= 0");
        if (!(kappa_prime > 0.0)) throw DomainError("kappa_prime must be > 0");
        if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
        if (!(n_th >= 0.0)) throw DomainError("n_th must be >= 0");
    }
};

struct SteadyBranch {
    cplx alpha;
    cplx beta;
    double Delta_bar = 0.0;
};

struct SteadyState {
    std::vector<SteadyBranch> branches;  // every physical root, ascending |alpha|^2
    std::size_t selected = 0;            // branch connected to eps -> 0
    bool multistable = false;

    const SteadyBranch& branch() const { return branches.at(selected); }
};

namespace detail {

// Real roots of a3 x^3 + a2 x^2 + a1 x + a0 (a3 != 0), ascending, each
// polished by two Newton steps.
inline std::vector<double> cubic_real_roots(double a3, double a2, double a1, double a0)
{
    const double b = a2 / a3, c = a1 / a3, d = a0 / a3;
    const double q = (3.0 * c - b * b) / 9.0;
    const double r = (9.0 * b * c - 27.0 * d - 2.0 * b * b * b) / 54.0;
    const double disc = q * q * q + r * r;
    std::vector<double> roots;
    if (disc > 0.0) {
        const double s = std::cbrt(r + std::sqrt(disc));
        const double t = std::cbrt(r - std::sqrt(disc));
        roots.push_back(-b / 3.0 + s + t);
    } else {
        const double theta = std::acos(std::clamp(r / std::sqrt(-q * q * q), -1.0, 1.0));
        const double m = 2.0 * std::sqrt(-q);
        for (int k = 0; k < 3; ++k) roots.push_back(-b / 3.0 + m * std::cos((theta + 2.0 * pi * k) / 3.0));
    }
    for (double& x : roots) {
        for (int it = 0; it < 2; ++it) {
            const double f = ((x + b) * x + c) * x + d;
            const double df = (3.0 * x + 2.0 * b) * x + c;
            if (df != 0.0) x -= f / df;
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

inline SteadyBranch branch_from_occupation(const OptomechParams& p, double x)
{
    // Re(beta) = -G0 x omega_i / (omega_i^2 + gamma_i^2/4)
    const double shift = 2.0 * p.G0 * p.G0 * p.omega_i / (p.omega_i * p.omega_i + 0.25 * p.gamma_i * p.gamma_i);
    SteadyBranch s;
    s.Delta_bar = p.Delta + shift * x;
    s.alpha = cplx(0.0, -p.eps) / cplx(0.5 * p.kappa_prime, -s.Delta_bar);
    s.beta = -p.G0 * std::norm(s.alpha) / cplx(p.omega_i, -0.5 * p.gamma_i);
    return s;
}

inline std::vector<double> occupation_roots(const OptomechParams& p, double eps)
{
    // x = |alpha|^2 solves x [(Delta + K x)^2 + kappa'^2/4] = eps^2.
    const double K = 2.0 * p.G0 * p.G0 * p.omega_i / (p.omega_i * p.omega_i + 0.25 * p.gamma_i * p.gamma_i);
    const double lin = p.Delta * p.Delta + 0.25 * p.kappa_prime * p.kappa_prime;
    const double rhs = eps * eps;
    std::vector<double> out;
    if (K == 0.0) {
        out.push_back(rhs / lin);
        return out;
    }
    for (double x : cubic_real_roots(K * K, 2.0 * p.Delta * K, lin, -rhs))
        if (x >= 0.0) out.push_back(x);
    // Coalescing roots at a fold show up twice; keep one.
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
              out.end());
    return out;
}

}  // namespace detail

/// Self-consistent mean fields of the driven ancillary cavity and the mirror.
/// All physical branches of the cubic in |alpha|^2 are returned; `selected`
/// follows the branch continuously from eps = 0 by continuation in eps.
/// The static shift is Delta_bar = Delta - G0 (beta + beta*), the sign the
/// Hamiltonian coupling G0 a^dag a (b + b^dag) produces for the drift.
inline SteadyState steady_state(const OptomechParams& p)
{
    p.validate();
    SteadyState out;
    if (p.eps == 0.0) {
        out.branches.push_back({cplx{}, cplx{}, p.Delta});
        return out;
    }
    const auto roots = detail::occupation_roots(p, p.eps);
    if (roots.empty()) throw NumericalError("steady_state: cubic has no non-negative root");
    for (double x : roots) out.branches.push_back(detail::branch_from_occupation(p, x));
    out.multistable = roots.size() >= 2;
    if (!out.multistable) return out;

    constexpr int ramp = 400;
    double x_prev = 0.0;
    for (int j = 1; j <= ramp; ++j) {
        const auto r = detail::occupation_roots(p, p.eps * j / ramp);
        x_prev = *std::min_element(r.begin(), r.end(), [&](double a, double b) {
            return std::abs(a - x_prev) < std::abs(b - x_prev);
        });
    }
    out.selected = static_cast<std::size_t>(
        std::min_element(roots.begin(), roots.end(),
                         [&](double a, double b) { return std::abs(a - x_prev) < std::abs(b - x_prev); }) -
        roots.begin());
    return out;
}

/// chi[omega] = 1 / (-i (omega + Dbar) + kappa'/2)
inline cplx optical_susceptibility(double omega, double Delta_bar, double kappa_prime)
{
    if (!(kappa_prime > 0.0)) throw DomainError("optical_susceptibility: kappa_prime must be > 0");
    return 1.0 / cplx(0.5 * kappa_prime, -(omega + Delta_bar));
}

/// Sigma[omega] = -i |G|^2 (chi[omega] - conj(chi[-omega]))
inline cplx self_energy(double omega, cplx G, double Delta_bar, double kappa_prime)
{
    const cplx diff = optical_susceptibility(omega, Delta_bar, kappa_prime) -
                      std::conj(optical_susceptibility(-omega, Delta_bar, kappa_prime));
    return cplx(0.0, -std::norm(G)) * diff;
}

inline double gamma_opt(double omega, cplx G, double Delta_bar, double kappa_prime, double omega_i)
{
    if (omega == 0.0) throw DomainError("gamma_opt: omega must be nonzero");
    const double k2 = 0.25 * kappa_prime * kappa_prime;
    const double plus = Delta_bar + omega, minus = Delta_bar - omega;
    return std::norm(G) * omega_i / omega * (kappa_prime / (k2 + plus * plus) - kappa_prime / (k2 + minus * minus));
}

inline double omega_opt(double omega, cplx G, double Delta_bar, double kappa_prime, double omega_i)
{
    if (omega == 0.0) throw DomainError("omega_opt: omega must be nonzero");
    const double k2 = 0.25 * kappa_prime * kappa_prime;
    const double plus = Delta_bar + omega, minus = Delta_bar - omega;
    return std::norm(G) * omega_i / omega * (plus / (k2 + plus * plus) + minus / (k2 + minus * minus));
}

struct Occupancy {
    double value = 0.0;
    bool limit = false;  // T = 0 evaluated as its limit
};

/// Bose occupation 1/(exp(hbar omega / k_B T) - 1); omega in rad/s, T in K.
inline Occupancy thermal_occupancy(double omega, double T)
{
    if (!(omega > 0.0)) throw DomainError("thermal_occupancy: omega must be > 0");
    if (T < 0.0) throw DomainError("thermal_occupancy: T must be >= 0");
    if (T == 0.0) return {0.0, true};
    return {1.0 / std::expm1(si::hbar * omega / (si::k_B * T)), false};
}

/// Resolved-sideband cooling floor (kappa' / 4 omega_i)^2.
inline double minimum_phonon_number(double kappa_prime, double omega_i)
{
    const double r = kappa_prime / (4.0 * omega_i);
    return r * r;
}

inline double final_phonon_number(double gamma_opt_value, double gamma_i, double n_min, double n_th)
{
    const double total = gamma_opt_value + gamma_i;
    if (!(total > 0.0)) throw PhysicsGateError("final_phonon_number: total damping <= 0 (mechanics unstable)");
    return (gamma_opt_value * n_min + gamma_i * n_th) / total;
}

struct Stability {
    bool stable = false;                      // every drift eigenvalue has Re < 0
    std::array<cplx, 4> eigenvalues{};
    double max_real_part = 0.0;
    double omega_m_resolved_sideband = 0.0;   // omega_i - |G|^2 / (2 omega_i)
    bool softening_unstable = false;          // omega_m_resolved_sideband < 0
};

/// Real 4x4 drift matrix of (Re c, Im c, Re d, Im d).
inline Eigen::Matrix4d drift_matrix(const OptomechParams& p, cplx G, double Delta_bar)
{
    const double k = 0.5 * p.kappa_prime, g = 0.5 * p.gamma_i;
    const double gr = G.real(), gi = G.imag();
    Eigen::Matrix4d A;
    A << -k, -Delta_bar, 2.0 * gi, 0.0,
         Delta_bar, -k, -2.0 * gr, 0.0,
         0.0, 0.0, -g, p.omega_i,
         -2.0 * gr, -2.0 * gi, -p.omega_i, -g;
    return A;
}

inline Stability stability_check(const OptomechParams& p, cplx G, double Delta_bar)
{
    Stability s;
    Eigen::EigenSolver<Eigen::Matrix4d> es(drift_matrix(p, G, Delta_bar), false);
    s.max_real_part = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        s.eigenvalues[i] = es.eigenvalues()[i];
        s.max_real_part = std::max(s.max_real_part, s.eigenvalues[i].real());
    }
    s.stable = s.max_real_part < 0.0;
    s.omega_m_resolved_sideband = p.omega_i - std::norm(G) / (2.0 * p.omega_i);
    s.softening_unstable = s.omega_m_resolved_sideband < 0.0;
    return s;
}

struct RdrReport {
    cplx alpha;
    cplx beta;
    double Delta_bar = 0.0;
    cplx G;
    double omega_eval = 0.0;
    double gamma_opt = 0.0;
    double omega_opt = 0.0;
    double gamma_total = 0.0;
    double omega_m = 0.0;
    double n_min = 0.0;
    double n_f = 0.0;
    bool n_f_defined = false;  // false when total damping <= 0
    bool stable = false;
    bool multistable = false;
    double ratio_gamma_kappa = 0.0;  // gamma_total / kappa (infinite if kappa = 0)
    Stability stability;
};

/// Either the linearized coupling G and effective detuning are supplied
/// directly, or they are derived from the drive (G0, eps, Delta) via the
/// steady state.
struct OperatingPoint {
    std::optional<cplx> G;
    std::optional<double> Delta_bar;
    std::optional<double> n_min;
    std::optional<double> omega_eval;
};

inline RdrReport analyze(const OptomechParams& p, const OperatingPoint& op = {})
{
    p.validate();
    RdrReport r;
    if (op.G && op.Delta_bar) {
        r.G = *op.G;
        r.Delta_bar = *op.Delta_bar;
        if (p.G0 != 0.0) {
            r.alpha = r.G / p.G0;
            r.beta = -p.G0 * std::norm(r.alpha) / cplx(p.omega_i, -0.5 * p.gamma_i);
        }
    } else {
        const SteadyState ss = steady_state(p);
        r.alpha = ss.branch().alpha;
        r.beta = ss.branch().beta;
        r.Delta_bar = op.Delta_bar.value_or(ss.branch().Delta_bar);
        r.G = op.G.value_or(p.G0 * r.alpha);
        r.multistable = ss.multistable;
    }
    r.omega_eval = op.omega_eval.value_or(p.omega_i);
    r.gamma_opt = gamma_opt(r.omega_eval, r.G, r.Delta_bar, p.kappa_prime, p.omega_i);
    r.omega_opt = omega_opt(r.omega_eval, r.G, r.Delta_bar, p.kappa_prime, p.omega_i);
    r.gamma_total = r.gamma_opt + p.gamma_i;
    r.omega_m = r.omega_opt + p.omega_i;
    r.n_min = op.n_min.value_or(minimum_phonon_number(p.kappa_prime, p.omega_i));
    if (r.gamma_total > 0.0) {
        r.n_f = final_phonon_number(r.gamma_opt, p.gamma_i, r.n_min, p.n_th);
        r.n_f_defined = true;
    }
    r.stability = stability_check(p, r.G, r.Delta_bar);
    r.stable = r.stability.stable && !r.stability.softening_unstable && r.gamma_total > 0.0;
    r.ratio_gamma_kappa = p.kappa > 0.0 ? r.gamma_total / p.kappa : std::numeric_limits<double>::infinity();
    return r;
}

}  // namespace optofluid::rdr
