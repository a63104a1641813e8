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

// Fixed-step classical Runge-Kutta on any state type supporting
// `state + state` and `double * state`.

namespace optofluid {

template <class State, class Rhs>
State rk4_step(const State& y, double t, double dt, Rhs&& rhs)
{
    const State k1 = rhs(t, y);
    const State k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1);
    const State k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2);
    const State k4 = rhs(t + dt, y + dt * k3);
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace optofluid
