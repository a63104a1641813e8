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

// Linear density/phase fluctuations on a stationary background (hbar = 1):
//
//   d(dn)/dt     = -div(v0 dn + (n/m) grad dtheta)
//   d(dtheta)/dt = -v0 . grad dtheta - G dn + (1 / 4 m n) div[n grad(dn/n)]
//
// using m c^2 / n = G and (m c^2 / 4 n) xi^2 = 1 / (4 m n).

#include <cmath>
#include <string>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/field.hpp"
#include "optofluid/geometry/madelung.hpp"

namespace optofluid::geometry {

struct HydroState {
    RealField2D dn, dtheta;
};

class HydroStepper {
public:
    explicit HydroStepper(const HydroFields& f, bool quantum_pressure = true)
        : f_(f), qp_(quantum_pressure), spec_(f.n)
    {
        for (std::size_t i = 0; i < f.valid.size(); ++i)
            if (!f.valid[i]) throw PreconditionError("hydro_linear_step: background has masked points");
        for (std::size_t i = 0; i < f.n.size(); ++i)
            if (!(f.n[i] > 0.0)) throw PreconditionError("hydro_linear_step: background density must be > 0");
        const std::size_t N = f.n.size();
        a_.resize(N), b_.resize(N), c_.resize(N), d_.resize(N), e_.resize(N);
    }

    void rhs(const HydroState& s, HydroState& out)
    {
        const std::size_t N = f_.n.size();
        const double m = f_.m;
        spec_.gradient(s.dtheta.values(), a_, b_);   // grad dtheta
        for (std::size_t i = 0; i < N; ++i) {
            c_[i] = f_.vx[i] * s.dn[i] + f_.n[i] / m * a_[i];
            d_[i] = f_.vy[i] * s.dn[i] + f_.n[i] / m * b_[i];
        }
        divergence(c_, d_, out.dn.storage());
        for (std::size_t i = 0; i < N; ++i) out.dn[i] = -out.dn[i];
        for (std::size_t i = 0; i < N; ++i)
            out.dtheta[i] = -(f_.vx[i] * a_[i] + f_.vy[i] * b_[i]) - f_.G * s.dn[i];
        if (qp_) {
            for (std::size_t i = 0; i < N; ++i) e_[i] = s.dn[i] / f_.n[i];
            spec_.gradient(e_, a_, b_);
            for (std::size_t i = 0; i < N; ++i) {
                c_[i] = f_.n[i] * a_[i];
                d_[i] = f_.n[i] * b_[i];
            }
            divergence(c_, d_, e_);
            for (std::size_t i = 0; i < N; ++i) out.dtheta[i] += e_[i] / (4.0 * m * f_.n[i]);
        }
    }

    void step(HydroState& s, double dt)
    {
        auto make = [&] { return HydroState{RealField2D::like(f_.n), RealField2D::like(f_.n)}; };
        HydroState k1 = make(), k2 = make(), k3 = make(), k4 = make(), tmp = make();
        const std::size_t N = f_.n.size();
        auto axpy = [&](const HydroState& k, double h) {
            for (std::size_t i = 0; i < N; ++i) {
                tmp.dn[i] = s.dn[i] + h * k.dn[i];
                tmp.dtheta[i] = s.dtheta[i] + h * k.dtheta[i];
            }
        };
        rhs(s, k1);
        axpy(k1, 0.5 * dt);
        rhs(tmp, k2);
        axpy(k2, 0.5 * dt);
        rhs(tmp, k3);
        axpy(k3, dt);
        rhs(tmp, k4);
        for (std::size_t i = 0; i < N; ++i) {
            s.dn[i] += dt / 6.0 * (k1.dn[i] + 2.0 * k2.dn[i] + 2.0 * k3.dn[i] + k4.dn[i]);
            s.dtheta[i] += dt / 6.0 * (k1.dtheta[i] + 2.0 * k2.dtheta[i] + 2.0 * k3.dtheta[i] + k4.dtheta[i]);
        }
    }

private:
    void divergence(const std::vector<double>& fx, const std::vector<double>& fy, std::vector<double>& out)
    {
        const std::size_t N = fx.size();
        std::vector<double> gx(N), gy(N), tx(N), ty(N);
        spec_.gradient(fx, gx, ty);
        spec_.gradient(fy, tx, gy);
        for (std::size_t i = 0; i < N; ++i) out[i] = gx[i] + gy[i];
    }

    const HydroFields& f_;
    bool qp_;
    Spectral spec_;
    std::vector<double> a_, b_, c_, d_, e_;
};

inline HydroState hydro_linear_step(const HydroState& s, const HydroFields& f, double dt, bool quantum_pressure = true)
{
    require_same_grid(s.dn, f.n, "hydro_linear_step");
    HydroStepper st(f, quantum_pressure);
    HydroState out = s;
    st.step(out, dt);
    return out;
}

/// dn = -(n / m c^2) (v0 . grad dtheta + d(dtheta)/dt).
inline RealField2D estimate_density_fluctuation(const RealField2D& dtheta_t, const RealField2D& dtheta,
                                                const HydroFields& f)
{
    require_same_grid(dtheta, f.n, "estimate_density_fluctuation");
    require_same_grid(dtheta_t, f.n, "estimate_density_fluctuation");
    for (double c2 : f.c2.values())
        if (!(c2 > 0.0)) throw DomainError("estimate_density_fluctuation: c^2 <= 0, no hydrodynamic regime");
    Spectral spec(f.n);
    std::vector<double> gx(f.n.size()), gy(f.n.size());
    spec.gradient(dtheta.values(), gx, gy);
    auto dn = RealField2D::like(f.n);
    for (std::size_t i = 0; i < dn.size(); ++i)
        dn[i] = -f.n[i] / (f.m * f.c2[i]) * (f.vx[i] * gx[i] + f.vy[i] * gy[i] + dtheta_t[i]);
    return dn;
}

}  // namespace optofluid::geometry
