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

#include <cmath>
#include <string>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/field.hpp"
#include "optofluid/fluid.hpp"
#include "optofluid/geometry/hydro.hpp"
#include "optofluid/geometry/kg.hpp"
#include "optofluid/geometry/madelung.hpp"
#include "optofluid/geometry/metric.hpp"

namespace optofluid::geometry {

/// Uniform background n0 with flow v along x on a periodic box. The flow is
/// rounded to the nearest value 2 pi j / (m Lx) compatible with periodicity.
struct UniformBackground {
    double n = 1.0;
    double v = 0.0;
    fluid::FluidParams params;
};

inline double quantized_flow(double v, double m, double Lx)
{
    const double q = 2.0 * pi / (m * Lx);
    return q * std::round(v / q);
}

inline ComplexField2D uniform_flow_state(const ComplexField2D& grid, double n, double v, double m)
{
    const double vq = quantized_flow(v, m, grid.lx());
    auto psi = ComplexField2D::like(grid);
    psi.fill_with([&](double x, double) { return std::polar(std::sqrt(n), m * vq * x); });
    return psi;
}

struct PhaseSeed {
    double k = 0.0;          // along x, commensurate with the box
    double amplitude = 0.0;
};

struct CrosscheckOptions {
    double max_k_xi = 0.3;
    std::size_t samples = 16;
    double kg_cfl_fraction = 0.25;   // dt as a fraction of the CFL limit
};

struct CrosscheckReport {
    double deviation = 0.0;      // windowed relative L2 of dtheta
    double k_xi = 0.0;
    double omega_kg = 0.0;       // c k + k v
    double omega_bogoliubov = 0.0;
    double flow = 0.0;           // quantized v actually used
    std::vector<double> t;
    std::vector<double> deviation_at;   // per-sample relative L2
};

/// Evolves dtheta = A cos(k x), dtheta_t = A w sin(k x) with w = c k + k v
/// (the co-flowing phonon) by the Klein-Gordon solver on the extracted metric
/// and by the linearized NLSE, projecting the latter through Madelung
/// (dtheta = Im phi), and compares the two on `samples` instants in (0, t_final].
inline CrosscheckReport crosscheck_kg_vs_nlse(const ComplexField2D& grid, const UniformBackground& bg,
                                              const PhaseSeed& seed, double t_final,
                                              const CrosscheckOptions& opt = {})
{
    const fluid::FluidParams& p = bg.params;
    p.validate();
    if (!(bg.n > 0.0)) throw DomainError("crosscheck_kg_vs_nlse: background density must be > 0");
    const double c2 = bg.n * p.G / p.m;
    if (!(c2 > 0.0)) throw PhysicsGateError("crosscheck_kg_vs_nlse: G m <= 0, no Lorentzian metric");
    const double c = std::sqrt(c2);
    const double xi = 1.0 / (std::abs(p.m) * c);

    CrosscheckReport rep;
    rep.k_xi = std::abs(seed.k) * xi;
    if (rep.k_xi > opt.max_k_xi * (1.0 + 1e-12))
        throw PreconditionError("crosscheck_kg_vs_nlse: seed outside the hydrodynamic window, k xi = " +
                                std::to_string(rep.k_xi) + " > " + std::to_string(opt.max_k_xi));
    const double j = seed.k * grid.lx() / (2.0 * pi);
    if (std::abs(j - std::round(j)) > 1e-9)
        throw PreconditionError("crosscheck_kg_vs_nlse: k must be a multiple of 2 pi / Lx");

    const ComplexField2D psi0 = uniform_flow_state(grid, bg.n, bg.v, p.m);
    rep.flow = quantized_flow(bg.v, p.m, grid.lx());
    const double k = seed.k;
    rep.omega_kg = c * k + k * rep.flow;
    rep.omega_bogoliubov = fluid::bogoliubov_dispersion(k, bg.n, p).real() + k * rep.flow;

    const HydroFields hf = hydro_fields(psi0, p);
    const MetricField M = build_metric(hf);

    auto th0 = RealField2D::like(grid), tht0 = RealField2D::like(grid);
    th0.fill_with([&](double x, double) { return seed.amplitude * std::cos(k * x); });
    tht0.fill_with([&](double x, double) { return seed.amplitude * rep.omega_kg * std::sin(k * x); });
    const RealField2D dn0 = estimate_density_fluctuation(tht0, th0, hf);

    ComplexField2D phi = ComplexField2D::like(grid);
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = cplx(dn0[i] / (2.0 * hf.n[i]), th0[i]);

    fluid::BogoliubovStepper bog(psi0, p);
    const double dts = t_final / static_cast<double>(opt.samples);
    const auto nb = static_cast<std::size_t>(std::ceil(dts / (2.0 / bog.omega_max())));
    const double dtb = dts / static_cast<double>(nb);
    const auto nk = static_cast<std::size_t>(std::ceil(dts / (opt.kg_cfl_fraction * kg_cfl_limit(M))));
    const double dtk = dts / static_cast<double>(nk);
    KgSolver kg(M, th0, tht0, dtk);

    double num = 0.0, den = 0.0;
    for (std::size_t s = 1; s <= opt.samples; ++s) {
        for (std::size_t q = 0; q < nb; ++q) bog.step(phi, dtb);
        for (std::size_t q = 0; q < nk; ++q) kg.step();
        const std::vector<double>& th = kg.theta();
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < th.size(); ++i) {
            const double d = th[i] - phi[i].imag();
            a += d * d;
            b += phi[i].imag() * phi[i].imag();
        }
        num += a;
        den += b;
        rep.t.push_back(dts * static_cast<double>(s));
        rep.deviation_at.push_back(b > 0.0 ? std::sqrt(a / b) : std::sqrt(a));
    }
    rep.deviation = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return rep;
}

}  // namespace optofluid::geometry
