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

// Uniform periodic 2D grids and the FFT-based spectral operators on them.
//
// Layout: x is the fast index, data[iy * nx + ix]. Grid coordinates are
// centered, x_i = (i - nx/2) dx, so the domain is [-Lx/2, Lx/2).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "optofluid/constants.hpp"
#include "optofluid/error.hpp"

namespace optofluid {

using cplx = std::complex<double>;

enum class UnitTag : std::uint32_t { natural = 0, si = 1 };

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

template <class T>
class Field2D {
public:
    using value_type = T;

    Field2D() = default;

    Field2D(std::size_t nx, std::size_t ny, double dx, double dy, UnitTag unit = UnitTag::natural, T fill = T{})
        : nx_(nx), ny_(ny), dx_(dx), dy_(dy), unit_(unit), data_(nx * ny, fill)
    {
        if (!is_power_of_two(nx) || !is_power_of_two(ny))
            throw PreconditionError("Field2D: nx and ny must be powers of two");
        if (!(dx > 0.0) || !(dy > 0.0)) throw PreconditionError("Field2D: spacings must be > 0");
    }

    /// Same grid, new fill.
    template <class U>
    static Field2D like(const Field2D<U>& other, T fill = T{})
    {
        return Field2D(other.nx(), other.ny(), other.dx(), other.dy(), other.unit(), fill);
    }

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    double dx() const noexcept { return dx_; }
    double dy() const noexcept { return dy_; }
    double lx() const noexcept { return dx_ * static_cast<double>(nx_); }
    double ly() const noexcept { return dy_ * static_cast<double>(ny_); }
    double cell_area() const noexcept { return dx_ * dy_; }
    UnitTag unit() const noexcept { return unit_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double x(std::size_t ix) const noexcept { return (static_cast<double>(ix) - static_cast<double>(nx_ / 2)) * dx_; }
    double y(std::size_t iy) const noexcept { return (static_cast<double>(iy) - static_cast<double>(ny_ / 2)) * dy_; }

    T& operator()(std::size_t ix, std::size_t iy) noexcept { return data_[iy * nx_ + ix]; }
    const T& operator()(std::size_t ix, std::size_t iy) const noexcept { return data_[iy * nx_ + ix]; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    template <class U>
    bool same_grid(const Field2D<U>& o) const noexcept
    {
        return nx_ == o.nx() && ny_ == o.ny() && dx_ == o.dx() && dy_ == o.dy();
    }

    /// Samples f(x, y) at every grid point.
    template <class F>
    void fill_with(F&& f)
    {
        for (std::size_t iy = 0; iy < ny_; ++iy)
            for (std::size_t ix = 0; ix < nx_; ++ix) (*this)(ix, iy) = f(x(ix), y(iy));
    }

private:
    std::size_t nx_ = 0, ny_ = 0;
    double dx_ = 1.0, dy_ = 1.0;
    UnitTag unit_ = UnitTag::natural;
    std::vector<T> data_;
};

using ComplexField2D = Field2D<cplx>;
using RealField2D = Field2D<double>;

template <class T, class U>
void require_same_grid(const Field2D<T>& a, const Field2D<U>& b, const char* who)
{
    if (!a.same_grid(b)) throw PreconditionError(std::string(who) + ": incompatible grids");
}

/// Integral of |psi|^2 over the domain.
inline double norm(const ComplexField2D& psi)
{
    double s = 0.0;
    for (const cplx& z : psi.values()) s += std::norm(z);
    return s * psi.cell_area();
}

inline RealField2D density(const ComplexField2D& psi)
{
    auto n = RealField2D::like(psi);
    for (std::size_t i = 0; i < psi.size(); ++i) n[i] = std::norm(psi[i]);
    return n;
}

/// Relative L2 distance ||a - b|| / ||b||.
template <class T>
double relative_l2(const Field2D<T>& a, const Field2D<T>& b)
{
    require_same_grid(a, b, "relative_l2");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Thin RAII wrapper over an FFTW 2D complex plan pair. Plans are created
/// with FFTW_ESTIMATE so transforms are reproducible run to run. Not safe to
/// construct concurrently from several threads (FFTW planner restriction).
class Fft2D {
public:
    Fft2D(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny)
    {
        std::vector<cplx> a(nx * ny), b(nx * ny);
        auto* in = reinterpret_cast<fftw_complex*>(a.data());
        auto* out = reinterpret_cast<fftw_complex*>(b.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fwd_.reset(fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), in, out, FFTW_FORWARD, flags));
        bwd_.reset(fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), in, out, FFTW_BACKWARD, flags));
        if (!fwd_ || !bwd_) throw NumericalError("Fft2D: FFTW planning failed");
    }

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }

    void forward(std::span<const cplx> in, std::span<cplx> out) const { run(fwd_.get(), in, out); }

    /// Normalized inverse: inverse(forward(x)) == x.
    void inverse(std::span<const cplx> in, std::span<cplx> out) const
    {
        run(bwd_.get(), in, out);
        const double s = 1.0 / static_cast<double>(nx_ * ny_);
        for (cplx& z : out) z *= s;
    }

private:
    struct PlanDeleter {
        void operator()(fftw_plan_s* p) const noexcept { fftw_destroy_plan(p); }
    };

    void run(fftw_plan_s* plan, std::span<const cplx> in, std::span<cplx> out) const
    {
        if (in.size() != nx_ * ny_ || out.size() != nx_ * ny_) throw PreconditionError("Fft2D: size mismatch");
        // FFTW's new-array execute does not modify `in` for out-of-place plans.
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                         reinterpret_cast<fftw_complex*>(out.data()));
    }

    std::size_t nx_, ny_;
    std::unique_ptr<fftw_plan_s, PlanDeleter> fwd_, bwd_;
};

/// Spectral derivatives on a periodic grid. First derivatives drop the
/// Nyquist mode; the Laplacian keeps it.
class Spectral {
public:
    template <class T>
    explicit Spectral(const Field2D<T>& grid)
        : nx_(grid.nx()), ny_(grid.ny()), fft_(grid.nx(), grid.ny()), kx_(grid.nx()), ky_(grid.ny()),
          kx_d_(grid.nx()), ky_d_(grid.ny()), buf_(grid.nx() * grid.ny()), buf2_(grid.nx() * grid.ny())
    {
        fill_k(kx_, kx_d_, grid.nx(), grid.lx());
        fill_k(ky_, ky_d_, grid.ny(), grid.ly());
    }

    const Fft2D& fft() const noexcept { return fft_; }
    double kx(std::size_t i) const noexcept { return kx_[i]; }
    double ky(std::size_t j) const noexcept { return ky_[j]; }
    double k2(std::size_t i, std::size_t j) const noexcept { return kx_[i] * kx_[i] + ky_[j] * ky_[j]; }
    double k2_max() const noexcept
    {
        double a = 0.0, b = 0.0;
        for (double k : kx_) a = std::max(a, k * k);
        for (double k : ky_) b = std::max(b, k * k);
        return a + b;
    }

    void laplacian(std::span<const cplx> f, std::span<cplx> out)
    {
        fft_.forward(f, buf_);
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) buf_[j * nx_ + i] *= -k2(i, j);
        fft_.inverse(buf_, out);
    }

    void gradient(std::span<const cplx> f, std::span<cplx> gx, std::span<cplx> gy)
    {
        fft_.forward(f, buf_);
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) buf2_[j * nx_ + i] = cplx(0.0, ky_d_[j]) * buf_[j * nx_ + i];
        fft_.inverse(buf2_, gy);
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) buf_[j * nx_ + i] *= cplx(0.0, kx_d_[i]);
        fft_.inverse(buf_, gx);
    }

    /// Real-field convenience wrappers.
    void gradient(std::span<const double> f, std::span<double> gx, std::span<double> gy)
    {
        std::vector<cplx> c(f.begin(), f.end()), cx(f.size()), cy(f.size());
        gradient(c, cx, cy);
        for (std::size_t i = 0; i < f.size(); ++i) {
            gx[i] = cx[i].real();
            gy[i] = cy[i].real();
        }
    }

    void laplacian(std::span<const double> f, std::span<double> out)
    {
        std::vector<cplx> c(f.begin(), f.end()), r(f.size());
        laplacian(c, r);
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = r[i].real();
    }

private:
    static void fill_k(std::vector<double>& k, std::vector<double>& kd, std::size_t n, double L)
    {
        const double dk = 2.0 * pi / L;
        for (std::size_t i = 0; i < n; ++i) {
            const long s = i < (n + 1) / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
            k[i] = dk * static_cast<double>(s);
            kd[i] = (n % 2 == 0 && i == n / 2) ? 0.0 : k[i];
        }
    }

    std::size_t nx_, ny_;
    Fft2D fft_;
    std::vector<double> kx_, ky_, kx_d_, ky_d_;
    std::vector<cplx> buf_, buf2_;
};

}  // namespace optofluid
