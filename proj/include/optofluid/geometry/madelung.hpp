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
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/field.hpp"
#include "optofluid/fluid.hpp"

namespace optofluid::geometry {

using Mask = Field2D<std::uint8_t>;

struct Vortex {
    double x = 0.0, y = 0.0;   // plaquette centre
    int charge = 0;
};

struct MadelungResult {
    RealField2D n;
    RealField2D theta;   // unwrapped phase, least-squares sense
    Mask valid;          // 0 inside vortex cores and below the density floor
    std::vector<Vortex> vortices;
};

struct MadelungOptions {
    double floor_fraction = 1e-6;   // |psi|^2 below this fraction of the maximum is masked
    double core_radius = 0.0;       // masked disk radius around residues; 0 means two grid cells
};

namespace detail {

inline double wrap_angle(double a) { return a - 2.0 * pi * std::round(a / (2.0 * pi)); }

}  // namespace detail

/// Phase differences are wrapped to (-pi, pi]; the linear ramp carried by a
/// periodic winding is taken from their mean, the periodic remainder from a
/// spectral Poisson solve with the forward-difference Laplacian. The additive
/// constant is fixed so that theta agrees with arg(psi) at the densest point.
inline MadelungResult madelung(const ComplexField2D& psi, const MadelungOptions& opt = {})
{
    const std::size_t nx = psi.nx(), ny = psi.ny();
    const double dx = psi.dx(), dy = psi.dy();
    MadelungResult r{RealField2D::like(psi), RealField2D::like(psi), Mask::like(psi, 1), {}};

    double nmax = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        r.n[i] = std::norm(psi[i]);
        nmax = std::max(nmax, r.n[i]);
    }
    for (std::size_t i = 0; i < psi.size(); ++i)
        if (!(r.n[i] > opt.floor_fraction * nmax)) r.valid[i] = 0;

    auto phase = [&](std::size_t i, std::size_t j) { return std::arg(psi(i % nx, j % ny)); };
    std::vector<double> gx(psi.size()), gy(psi.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            gx[j * nx + i] = detail::wrap_angle(phase(i + 1, j) - phase(i, j));
            gy[j * nx + i] = detail::wrap_angle(phase(i, j + 1) - phase(i, j));
            mx += gx[j * nx + i];
            my += gy[j * nx + i];
        }
    // Each row sums to 2 pi times its winding number.
    const double kx = mx / static_cast<double>(psi.size()) / dx;
    const double ky = my / static_cast<double>(psi.size()) / dy;

    // Residues.
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double c = gx[j * nx + i] + gy[j * nx + (i + 1) % nx] - gx[((j + 1) % ny) * nx + i] - gy[j * nx + i];
            const int q = static_cast<int>(std::lround(c / (2.0 * pi)));
            if (q != 0) r.vortices.push_back({psi.x(i) + 0.5 * dx, psi.y(j) + 0.5 * dy, q});
        }
    const double rc = opt.core_radius > 0.0 ? opt.core_radius : 2.0 * std::max(dx, dy);
    for (const Vortex& v : r.vortices)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                const double ddx = detail::wrap_angle((psi.x(i) - v.x) * 2.0 * pi / psi.lx()) * psi.lx() / (2.0 * pi);
                const double ddy = detail::wrap_angle((psi.y(j) - v.y) * 2.0 * pi / psi.ly()) * psi.ly() / (2.0 * pi);
                if (ddx * ddx + ddy * ddy <= rc * rc) r.valid(i, j) = 0;
            }

    // Poisson solve for the periodic remainder: L u = div(g - k h) with the
    // backward-difference divergence, L the 5-point Laplacian.
    std::vector<cplx> rhs(psi.size()), hat(psi.size());
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t im = (i + nx - 1) % nx, jm = (j + ny - 1) % ny;
            const double rx = (gx[j * nx + i] - gx[j * nx + im]) / (dx * dx);
            const double ry = (gy[j * nx + i] - gy[jm * nx + i]) / (dy * dy);
            rhs[j * nx + i] = rx + ry;
        }
    Fft2D fft(nx, ny);
    fft.forward(rhs, hat);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double lx = (2.0 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(nx)) - 2.0) / (dx * dx);
            const double ly = (2.0 * std::cos(2.0 * pi * static_cast<double>(j) / static_cast<double>(ny)) - 2.0) / (dy * dy);
            const double L = lx + ly;
            hat[j * nx + i] = L != 0.0 ? hat[j * nx + i] / L : cplx{};
        }
    fft.inverse(hat, rhs);

    std::size_t ref = 0;
    for (std::size_t i = 0; i < psi.size(); ++i)
        if (r.valid[i] && r.n[i] > r.n[ref]) ref = i;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) r.theta(i, j) = kx * psi.x(i) + ky * psi.y(j) + rhs[j * nx + i].real();
    const double shift = detail::wrap_angle(std::arg(psi[ref]) - r.theta[ref]);
    for (double& t : r.theta.values()) t += shift;
    return r;
}

/// Background fluid quantities (hbar = 1): v0 = grad(theta)/m,
/// c^2 = n G / m, xi = 1 / (|m| |c|).
struct HydroFields {
    RealField2D n, theta, vx, vy, c2, xi;
    Mask valid;
    double m = 1.0;
    double G = 0.0;
    bool has_theta = true;

    const RealField2D& grid() const noexcept { return n; }
};

namespace detail {

inline void fill_sound(HydroFields& f)
{
    for (std::size_t i = 0; i < f.n.size(); ++i) {
        f.c2[i] = f.n[i] * f.G / f.m;
        const double c = std::sqrt(std::abs(f.c2[i]));
        f.xi[i] = c > 0.0 ? 1.0 / (std::abs(f.m) * c) : std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

/// v0 from wrapped central differences of the phase, exact for plane waves
/// with |k| dx < pi/2 and insensitive to 2 pi jumps.
inline HydroFields hydro_fields(const ComplexField2D& psi, const fluid::FluidParams& p, const MadelungOptions& opt = {})
{
    p.validate();
    MadelungResult mr = madelung(psi, opt);
    HydroFields f{mr.n, mr.theta, RealField2D::like(psi), RealField2D::like(psi), RealField2D::like(psi),
                  RealField2D::like(psi), mr.valid, p.m, p.G, true};
    const std::size_t nx = psi.nx(), ny = psi.ny();
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const cplx ex = psi((i + 1) % nx, j) * std::conj(psi((i + nx - 1) % nx, j));
            const cplx ey = psi(i, (j + 1) % ny) * std::conj(psi(i, (j + ny - 1) % ny));
            f.vx(i, j) = nx > 2 ? std::arg(ex) / (2.0 * psi.dx() * p.m) : 0.0;
            f.vy(i, j) = ny > 2 ? std::arg(ey) / (2.0 * psi.dy() * p.m) : 0.0;
        }
    detail::fill_sound(f);
    return f;
}

/// Analytic background from density and velocity profiles. The phase is not
/// reconstructed (has_theta = false).
inline HydroFields hydro_from_profiles(const RealField2D& grid, const std::function<double(double, double)>& n,
                                       const std::function<double(double, double)>& vx,
                                       const std::function<double(double, double)>& vy, double m, double G)
{
    if (m == 0.0 || !std::isfinite(m)) throw DomainError("hydro_from_profiles: m must be finite and nonzero");
    HydroFields f{RealField2D::like(grid), RealField2D::like(grid), RealField2D::like(grid), RealField2D::like(grid),
                  RealField2D::like(grid), RealField2D::like(grid), Mask::like(grid, 1), m, G, false};
    f.n.fill_with(n);
    f.vx.fill_with(vx);
    f.vy.fill_with(vy);
    for (std::size_t i = 0; i < f.n.size(); ++i)
        if (!(f.n[i] >= 0.0)) throw DomainError("hydro_from_profiles: density must be >= 0");
    detail::fill_sound(f);
    return f;
}

}  // namespace optofluid::geometry
