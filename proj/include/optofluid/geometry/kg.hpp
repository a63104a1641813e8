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

// Klein-Gordon equation box(theta) = 0 on a static acoustic metric.
//
// Three-level scheme
//   a (u+ - 2u + u-) / dt^2 = M (u+ - u-) / (2 dt) + K u
// with M skew and K symmetric, which conserves
//   E = 1/2 <a (u+ - u)/dt, (u+ - u)/dt> - 1/2 <u+, K u>.
// The M term is implicit; it is resolved by fixed-point iteration, which
// contracts under the CFL bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/geometry/metric.hpp"

namespace optofluid::geometry {

/// dt_max = 0.5 min(dx, dy) / max(c + |v0|), over the resolved directions.
inline double kg_cfl_limit(const MetricField& M)
{
    double h = std::numeric_limits<double>::infinity();
    if (M.c2.nx() > 2) h = std::min(h, M.c2.dx());
    if (M.c2.ny() > 2) h = std::min(h, M.c2.dy());
    double s = 0.0;
    for (std::size_t i = 0; i < M.c2.size(); ++i)
        if (M.sig(i) == Signature::Lorentzian)
            s = std::max(s, std::sqrt(M.c2[i]) + std::hypot(M.vx[i], M.vy[i]));
    return s > 0.0 ? 0.5 * h / s : std::numeric_limits<double>::infinity();
}

struct KgOptions {
    bool force = false;
    double fp_tol = 1e-14;
    int fp_max_iter = 200;
};

class KgSolver {
public:
    KgSolver(const MetricField& M, const RealField2D& theta0, const RealField2D& theta_dot0, double dt,
             const KgOptions& opt = {})
        : M_(M), W_(M), dt_(dt), opt_(opt), N_(theta0.size()), prev_(N_), cur_(N_), next_(N_), mt_(N_), kt_(N_),
          tmp_(N_)
    {
        require_same_grid(theta0, M.c2, "kg_evolve");
        require_same_grid(theta_dot0, M.c2, "kg_evolve");
        if (!W_.all_ok())
            throw PhysicsGateError("kg_evolve: metric is not Lorentzian everywhere (" +
                                   std::to_string(M.count(Signature::Euclidean)) + " Euclidean, " +
                                   std::to_string(M.count(Signature::Degenerate)) + " degenerate points)");
        if (!(dt > 0.0)) throw PreconditionError("kg_evolve: dt must be > 0");
        const double lim = kg_cfl_limit(M);
        if (dt > lim && !opt.force)
            throw PreconditionError("kg_evolve: CFL violated, dt = " + std::to_string(dt) + " > " + std::to_string(lim));

        // Second-order Taylor start: u(-dt) = u - dt u_t + dt^2/2 u_tt.
        cur_ = theta0.storage();
        W_.apply_M(theta_dot0.storage(), mt_);
        W_.apply_K(cur_, kt_);
        for (std::size_t i = 0; i < N_; ++i) {
            const double utt = (mt_[i] + kt_[i]) / W_.a(i);
            prev_[i] = cur_[i] - dt * theta_dot0[i] + 0.5 * dt * dt * utt;
        }
    }

    double time() const noexcept { return t_; }
    double dt() const noexcept { return dt_; }
    const std::vector<double>& theta() const noexcept { return cur_; }

    /// Centred time derivative at the current level (costs one trial step).
    std::vector<double> theta_dot()
    {
        std::vector<double> nx = advance_trial();
        std::vector<double> d(N_);
        for (std::size_t i = 0; i < N_; ++i) d[i] = (nx[i] - prev_[i]) / (2.0 * dt_);
        return d;
    }

    void step()
    {
        next_ = advance_trial();
        prev_.swap(cur_);
        cur_.swap(next_);
        t_ += dt_;
    }

    /// Conserved discrete energy between the previous and current level.
    double energy()
    {
        W_.apply_K(prev_, kt_);
        double e = 0.0;
        for (std::size_t i = 0; i < N_; ++i) {
            const double d = (cur_[i] - prev_[i]) / dt_;
            e += 0.5 * W_.a(i) * d * d - 0.5 * cur_[i] * kt_[i];
        }
        return e * M_.c2.cell_area();
    }

    /// Comoving energy density 1/2 a [(u_t + v.grad u)^2 + c^2 |grad u|^2],
    /// non-negative on Lorentzian backgrounds even where |v| > c.
    std::vector<double> energy_density()
    {
        const std::vector<double> ut = theta_dot();
        std::vector<double> e(N_);
        const std::size_t nx = W_.nx();
        for (std::size_t j = 0; j < W_.ny(); ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                const std::size_t k = j * nx + i;
                const double ux = W_.Dx(cur_, i, j), uy = W_.Dy(cur_, i, j);
                const double adv = ut[k] + M_.vx[k] * ux + M_.vy[k] * uy;
                e[k] = 0.5 * W_.a(k) * (adv * adv + M_.c2[k] * (ux * ux + uy * uy));
            }
        return e;
    }

private:
    std::vector<double> advance_trial()
    {
        W_.apply_K(cur_, kt_);
        std::vector<double> base(N_), up(N_);
        for (std::size_t i = 0; i < N_; ++i) {
            base[i] = 2.0 * cur_[i] - prev_[i] + dt_ * dt_ / W_.a(i) * kt_[i];
            up[i] = base[i];
        }
        for (int it = 0; it < opt_.fp_max_iter; ++it) {
            for (std::size_t i = 0; i < N_; ++i) tmp_[i] = up[i] - prev_[i];
            W_.apply_M(tmp_, mt_);
            double diff = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < N_; ++i) {
                const double v = base[i] + 0.5 * dt_ / W_.a(i) * mt_[i];
                diff = std::max(diff, std::abs(v - up[i]));
                scale = std::max(scale, std::abs(v));
                up[i] = v;
            }
            if (diff <= opt_.fp_tol * std::max(scale, 1e-300)) return up;
        }
        throw NumericalError("kg_evolve: implicit mixed-term iteration did not converge (reduce dt)");
    }

    const MetricField& M_;
    WaveOperator W_;
    double dt_;
    KgOptions opt_;
    std::size_t N_;
    std::vector<double> prev_, cur_, next_, mt_, kt_, tmp_;
    double t_ = 0.0;
};

struct KgResult {
    RealField2D theta, theta_dot;
    double energy_initial = 0.0, energy_final = 0.0;
};

inline KgResult kg_evolve(const RealField2D& theta0, const RealField2D& theta_dot0, const MetricField& M, double dt,
                          std::size_t steps, const KgOptions& opt = {})
{
    KgSolver s(M, theta0, theta_dot0, dt, opt);
    KgResult r{RealField2D::like(theta0), RealField2D::like(theta0), 0.0, 0.0};
    // Energy is defined between two levels, so it is sampled after the first step.
    for (std::size_t n = 0; n < steps; ++n) {
        s.step();
        if (n == 0) r.energy_initial = s.energy();
    }
    r.energy_final = steps ? s.energy() : 0.0;
    r.theta.storage() = s.theta();
    r.theta_dot.storage() = steps ? s.theta_dot() : theta_dot0.storage();
    if (!steps) r.theta = theta0;
    for (double v : r.theta.values())
        if (!std::isfinite(v)) throw NumericalError("kg_evolve: non-finite field");
    return r;
}

}  // namespace optofluid::geometry
