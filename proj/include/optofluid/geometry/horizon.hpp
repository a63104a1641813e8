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

// Sonic horizons as zero contours of F = |v0|^2 - c^2, extracted by
// marching squares over the cells of the (non-wrapping) sample grid.
// Every polyline is oriented with the superexcitonic side (F > 0) on its
// left.

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/geometry/madelung.hpp"

namespace optofluid::geometry {

struct Polyline {
    std::vector<std::array<double, 2>> points;
    bool closed = false;
};

namespace detail {

struct Segment {
    std::int64_t e0, e1;                // edge ids
    std::array<double, 2> p0, p1;
};

}  // namespace detail

/// Zero contours of an arbitrary sampled field (positive side on the left).
inline std::vector<Polyline> zero_contours(const RealField2D& F)
{
    const std::size_t nx = F.nx(), ny = F.ny();
    if (nx < 2 || ny < 2) return {};
    // Horizontal edge (i,j)-(i+1,j): 2*(j*nx+i); vertical edge (i,j)-(i,j+1): 2*(j*nx+i)+1.
    auto hid = [&](std::size_t i, std::size_t j) { return static_cast<std::int64_t>(2 * (j * nx + i)); };
    auto vid = [&](std::size_t i, std::size_t j) { return static_cast<std::int64_t>(2 * (j * nx + i) + 1); };
    auto pos = [&](std::size_t i, std::size_t j) { return std::array<double, 2>{F.x(i), F.y(j)}; };
    auto positive = [&](std::size_t i, std::size_t j) { return F(i, j) > 0.0; };
    auto cross = [&](std::size_t i0, std::size_t j0, std::size_t i1, std::size_t j1) {
        const double a = F(i0, j0), b = F(i1, j1);
        const double t = a / (a - b);
        const auto p = pos(i0, j0), q = pos(i1, j1);
        return std::array<double, 2>{p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
    };

    std::vector<detail::Segment> segs;
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            // Corners counter-clockwise: 0 (i,j), 1 (i+1,j), 2 (i+1,j+1), 3 (i,j+1).
            const std::size_t ci[4] = {i, i + 1, i + 1, i};
            const std::size_t cj[4] = {j, j, j + 1, j + 1};
            const std::int64_t eid[4] = {hid(i, j), vid(i + 1, j), hid(i, j + 1), vid(i, j)};
            bool s[4];
            for (int c = 0; c < 4; ++c) s[c] = positive(ci[c], cj[c]);
            std::vector<int> cut;
            for (int e = 0; e < 4; ++e)
                if (s[e] != s[(e + 1) % 4]) cut.push_back(e);
            if (cut.empty()) continue;
            auto point_on = [&](int e) { return cross(ci[e], cj[e], ci[(e + 1) % 4], cj[(e + 1) % 4]); };
            std::vector<std::pair<int, int>> pairs;
            if (cut.size() == 2) {
                pairs.push_back({cut[0], cut[1]});
            } else {
                // Saddle: decide by the cell-centre average.
                const double centre = 0.25 * (F(i, j) + F(i + 1, j) + F(i + 1, j + 1) + F(i, j + 1));
                const bool pc = centre > 0.0;
                // Corners of the same sign as the centre are joined through the middle.
                if (s[0] == pc) pairs = {{0, 1}, {2, 3}};
                else pairs = {{3, 0}, {1, 2}};
            }
            for (auto [ea, eb] : pairs) {
                detail::Segment sg{eid[ea], eid[eb], point_on(ea), point_on(eb)};
                // The positive corner of edge ea must lie to the left of p0 -> p1.
                const int pc = s[ea] ? ea : (ea + 1) % 4;
                const auto c = pos(ci[pc], cj[pc]);
                const double d0 = sg.p1[0] - sg.p0[0], d1 = sg.p1[1] - sg.p0[1];
                const double cr = d0 * (c[1] - sg.p0[1]) - d1 * (c[0] - sg.p0[0]);
                if (cr < 0.0) {
                    std::swap(sg.e0, sg.e1);
                    std::swap(sg.p0, sg.p1);
                }
                segs.push_back(sg);
            }
        }

    std::unordered_map<std::int64_t, std::size_t> by_start, by_end;
    for (std::size_t k = 0; k < segs.size(); ++k) {
        by_start[segs[k].e0] = k;
        by_end[segs[k].e1] = k;
    }
    std::vector<char> used(segs.size(), 0);
    std::vector<Polyline> out;
    auto trace = [&](std::size_t k0) {
        Polyline pl;
        pl.points.push_back(segs[k0].p0);
        std::size_t k = k0;
        while (true) {
            used[k] = 1;
            pl.points.push_back(segs[k].p1);
            auto it = by_start.find(segs[k].e1);
            if (it == by_start.end()) break;
            if (it->second == k0) {
                pl.closed = true;
                pl.points.back() = pl.points.front();
                break;
            }
            if (used[it->second]) break;
            k = it->second;
        }
        out.push_back(std::move(pl));
    };
    for (std::size_t k = 0; k < segs.size(); ++k)
        if (!used[k] && !by_end.count(segs[k].e0)) trace(k);
    for (std::size_t k = 0; k < segs.size(); ++k)
        if (!used[k]) trace(k);
    return out;
}

inline RealField2D horizon_function(const HydroFields& f)
{
    auto F = RealField2D::like(f.n);
    for (std::size_t i = 0; i < F.size(); ++i) F[i] = f.vx[i] * f.vx[i] + f.vy[i] * f.vy[i] - f.c2[i];
    return F;
}

/// Horizons |v0| = c. Requires c^2 > 0 on every valid point.
inline std::vector<Polyline> find_horizon(const HydroFields& f)
{
    for (std::size_t i = 0; i < f.c2.size(); ++i)
        if (f.valid[i] && !(f.c2[i] > 0.0))
            throw DomainError("find_horizon: c^2 <= 0 in the analysis region (no acoustic horizon defined)");
    return zero_contours(horizon_function(f));
}

}  // namespace optofluid::geometry
