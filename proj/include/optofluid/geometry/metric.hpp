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

// Acoustic metric in 2+1 dimensions, coordinates (t, x, y):
//
//   ds^2 = Omega [-(c^2 - v.v) dt^2 - 2 v.dr dt + dr.dr],  Omega = n / (|m| |c|)
//
// and the flux-form d'Alembertian built from it.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/field.hpp"
#include "optofluid/geometry/madelung.hpp"

namespace optofluid::geometry {

enum class Signature : std::uint8_t { Lorentzian = 0, Euclidean = 1, Degenerate = 2 };

inline const char* to_string(Signature s)
{
    switch (s) {
    case Signature::Lorentzian: return "lorentzian";
    case Signature::Euclidean: return "euclidean";
    default: return "degenerate";
    }
}

using Mat3 = std::array<double, 9>;   // row-major

struct MetricPoint {
    double Omega = 0.0, c2 = 0.0, vx = 0.0, vy = 0.0;
    Signature signature = Signature::Degenerate;
    Mat3 g{}, g_inv{};
    double det = 0.0;
    double sqrt_minus_g = std::numeric_limits<double>::quiet_NaN();
};

/// Point-wise metric. Degenerate when n = 0 or |c^2| <= tol.
inline MetricPoint metric_point(double n, double c2, double vx, double vy, double m, double tol = 1e-14)
{
    MetricPoint p;
    p.c2 = c2, p.vx = vx, p.vy = vy;
    if (!(n > 0.0) || !(std::abs(c2) > tol) || !std::isfinite(c2)) return p;
    p.signature = c2 > 0.0 ? Signature::Lorentzian : Signature::Euclidean;
    const double W = n / (std::abs(m) * std::sqrt(std::abs(c2)));
    p.Omega = W;
    const double v2 = vx * vx + vy * vy;
    p.g = {-W * (c2 - v2), -W * vx, -W * vy,
           -W * vx,        W,       0.0,
           -W * vy,        0.0,     W};
    const double s = 1.0 / (W * c2);
    p.g_inv = {-s,      -s * vx,              -s * vy,
               -s * vx, s * (c2 - vx * vx),   -s * vx * vy,
               -s * vy, -s * vx * vy,         s * (c2 - vy * vy)};
    p.det = -W * W * W * c2;
    if (p.signature == Signature::Lorentzian) p.sqrt_minus_g = std::sqrt(W * W * W * c2);
    return p;
}

/// ds^2 = Omega [-c^2 dt^2 + |dr - v dt|^2].
inline double line_element(const MetricPoint& p, double dt, double dx, double dy)
{
    const double ux = dx - p.vx * dt, uy = dy - p.vy * dt;
    return p.Omega * (-p.c2 * dt * dt + ux * ux + uy * uy);
}

struct MetricField {
    RealField2D conformal, c2, vx, vy, det, sqrt_minus_g;
    Field2D<std::uint8_t> signature;
    std::vector<Mat3> g, g_inv;
    double m = 1.0;

    Signature sig(std::size_t i) const noexcept { return static_cast<Signature>(signature[i]); }
    MetricPoint point(std::size_t i) const
    {
        MetricPoint p;
        p.Omega = conformal[i], p.c2 = c2[i], p.vx = vx[i], p.vy = vy[i];
        p.signature = sig(i), p.g = g[i], p.g_inv = g_inv[i], p.det = det[i], p.sqrt_minus_g = sqrt_minus_g[i];
        return p;
    }
    std::size_t count(Signature s) const
    {
        std::size_t c = 0;
        for (std::size_t i = 0; i < signature.size(); ++i) c += sig(i) == s;
        return c;
    }
    bool all_lorentzian() const { return count(Signature::Lorentzian) == signature.size(); }
};

inline MetricField build_metric(const HydroFields& f, double degenerate_tol = 1e-14)
{
    const RealField2D& grid = f.n;
    MetricField M{RealField2D::like(grid), RealField2D::like(grid), RealField2D::like(grid), RealField2D::like(grid),
                  RealField2D::like(grid), RealField2D::like(grid), Field2D<std::uint8_t>::like(grid),
                  std::vector<Mat3>(grid.size()), std::vector<Mat3>(grid.size()), f.m};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        MetricPoint p = metric_point(f.valid[i] ? f.n[i] : 0.0, f.c2[i], f.vx[i], f.vy[i], f.m, degenerate_tol);
        M.conformal[i] = p.Omega;
        M.c2[i] = f.c2[i];
        M.vx[i] = f.vx[i];
        M.vy[i] = f.vy[i];
        M.det[i] = p.det;
        M.sqrt_minus_g[i] = p.sqrt_minus_g;
        M.signature[i] = static_cast<std::uint8_t>(p.signature);
        M.g[i] = p.g;
        M.g_inv[i] = p.g_inv;
    }
    return M;
}

/// Spatial part of the flux-form wave operator on a periodic grid. With
/// F = sqrt(-g) g^{mu nu} (time independent),
///
///   sqrt(-g) box(theta) = -a theta_tt + M theta_t + K theta
///
/// where a = -F^{00} > 0, M u = F^{0i} D_i u + D_i (F^{0i} u) is skew and
/// K u = D_i (F^{ij} D_j u) is symmetric. D is the centred difference.
class WaveOperator {
public:
    explicit WaveOperator(const MetricField& M)
        : nx_(M.c2.nx()), ny_(M.c2.ny()), dx_(M.c2.dx()), dy_(M.c2.dy()), a_(M.c2.size()), f0x_(a_.size()),
          f0y_(a_.size()), fxx_(a_.size()), fxy_(a_.size()), fyy_(a_.size()), ok_(a_.size(), 0), t1_(a_.size()),
          t2_(a_.size()), t3_(a_.size())
    {
        for (std::size_t i = 0; i < a_.size(); ++i) {
            if (M.sig(i) != Signature::Lorentzian) continue;
            ok_[i] = 1;
            const double s = M.sqrt_minus_g[i];
            const Mat3& gi = M.g_inv[i];
            a_[i] = -s * gi[0];
            f0x_[i] = s * gi[1];
            f0y_[i] = s * gi[2];
            fxx_[i] = s * gi[4];
            fxy_[i] = s * gi[5];
            fyy_[i] = s * gi[8];
        }
        use_x_ = nx_ > 2, use_y_ = ny_ > 2;
        // Output at a point is valid when the whole stencil (radius 2) is Lorentzian.
        stencil_ok_.assign(a_.size(), 1);
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i)
                for (int dj = -2; dj <= 2; ++dj)
                    for (int di = -2; di <= 2; ++di)
                        if (!ok_[idx(i, j, di, dj)]) stencil_ok_[j * nx_ + i] = 0;
    }

    std::size_t size() const noexcept { return a_.size(); }
    double a(std::size_t i) const noexcept { return a_[i]; }
    bool point_ok(std::size_t i) const noexcept { return ok_[i]; }
    bool stencil_ok(std::size_t i) const noexcept { return stencil_ok_[i]; }
    bool all_ok() const noexcept
    {
        for (auto v : ok_)
            if (!v) return false;
        return true;
    }

    void apply_M(const std::vector<double>& u, std::vector<double>& out)
    {
        for (std::size_t k = 0; k < u.size(); ++k) {
            t1_[k] = f0x_[k] * u[k];
            t2_[k] = f0y_[k] * u[k];
        }
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) {
                const std::size_t k = j * nx_ + i;
                out[k] = f0x_[k] * Dx(u, i, j) + f0y_[k] * Dy(u, i, j) + Dx(t1_, i, j) + Dy(t2_, i, j);
            }
    }

    void apply_K(const std::vector<double>& u, std::vector<double>& out)
    {
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) {
                const std::size_t k = j * nx_ + i;
                const double ux = Dx(u, i, j), uy = Dy(u, i, j);
                t1_[k] = fxx_[k] * ux + fxy_[k] * uy;
                t2_[k] = fxy_[k] * ux + fyy_[k] * uy;
            }
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) out[j * nx_ + i] = Dx(t1_, i, j) + Dy(t2_, i, j);
    }

    double Dx(const std::vector<double>& u, std::size_t i, std::size_t j) const
    {
        if (!use_x_) return 0.0;
        return (u[idx(i, j, 1, 0)] - u[idx(i, j, -1, 0)]) / (2.0 * dx_);
    }
    double Dy(const std::vector<double>& u, std::size_t i, std::size_t j) const
    {
        if (!use_y_) return 0.0;
        return (u[idx(i, j, 0, 1)] - u[idx(i, j, 0, -1)]) / (2.0 * dy_);
    }

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    bool uses_x() const noexcept { return use_x_; }
    bool uses_y() const noexcept { return use_y_; }

private:
    std::size_t idx(std::size_t i, std::size_t j, int di, int dj) const
    {
        const auto wi = static_cast<std::size_t>((static_cast<long>(i) + di + 4 * static_cast<long>(nx_)) % static_cast<long>(nx_));
        const auto wj = static_cast<std::size_t>((static_cast<long>(j) + dj + 4 * static_cast<long>(ny_)) % static_cast<long>(ny_));
        return wj * nx_ + wi;
    }

    std::size_t nx_, ny_;
    double dx_, dy_;
    std::vector<double> a_, f0x_, f0y_, fxx_, fxy_, fyy_;
    std::vector<std::uint8_t> ok_, stencil_ok_;
    std::vector<double> t1_, t2_, t3_;
    bool use_x_ = true, use_y_ = true;
};

struct DalembertianResult {
    RealField2D value;   // NaN where masked
    Mask valid;
};

/// box(theta) = (1/sqrt(-g)) d_mu (sqrt(-g) g^{mu nu} d_nu theta) for a static
/// metric, given theta and its first two time derivatives at one instant.
inline DalembertianResult dalembertian(const RealField2D& theta, const RealField2D& theta_t,
                                       const RealField2D& theta_tt, const MetricField& M)
{
    require_same_grid(theta, M.c2, "dalembertian");
    require_same_grid(theta_t, M.c2, "dalembertian");
    require_same_grid(theta_tt, M.c2, "dalembertian");
    WaveOperator W(M);
    std::vector<double> mt(theta.size()), kt(theta.size());
    W.apply_M(theta_t.storage(), mt);
    W.apply_K(theta.storage(), kt);
    DalembertianResult r{RealField2D::like(theta, std::numeric_limits<double>::quiet_NaN()), Mask::like(theta, 0)};
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!W.stencil_ok(i)) continue;
        r.value[i] = (-W.a(i) * theta_tt[i] + mt[i] + kt[i]) / M.sqrt_minus_g[i];
        r.valid[i] = 1;
    }
    return r;
}

}  // namespace optofluid::geometry
