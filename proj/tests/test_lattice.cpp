// Copyright 2026 The optofluid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "optofluid/constants.hpp"
#include "optofluid/lattice.hpp"

namespace {

using namespace optofluid;
using namespace optofluid::lattice;

LatticeParams free_lattice(std::size_t N, double omega_c, double J)
{
    LatticeParams p;
    p.Nx = p.Ny = N;
    p.omega_c = omega_c;
    p.J = J;
    return p;
}

LatticeState bloch(std::size_t N, double ki, double kj)
{
    LatticeState s(N, N);
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < N; ++i) s.a[j * N + i] = std::polar(1.0, ki * i + kj * j);
    return s;
}

double total_photons(const LatticeState& s)
{
    double n = 0.0;
    for (const cplx& z : s.a) n += std::norm(z);
    return n;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    Eigen::MatrixXd A(x.size(), 2);
    Eigen::VectorXd b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        A(static_cast<Eigen::Index>(i), 0) = std::log(x[i]);
        A(static_cast<Eigen::Index>(i), 1) = 1.0;
        b[static_cast<Eigen::Index>(i)] = std::log(y[i]);
    }
    return A.colPivHouseholderQr().solve(b)[0];
}

TEST(Dispersion, BandEdgesAndCentre)
{
    EXPECT_DOUBLE_EQ(lattice_dispersion(0.0, 0.0, 1.5, 0.25), 2.5);
    EXPECT_DOUBLE_EQ(lattice_dispersion(pi, pi, 1.5, 0.25), 0.5);
    EXPECT_NEAR(lattice_dispersion(pi / 2, pi / 2, 1.5, 0.25), 1.5, 1e-15);
}

TEST(Step, BlochWaveRotatesAtBandFrequency)
{
    const std::size_t N = 16;
    const auto p = free_lattice(N, 1.0, 0.3);
    const double ki = 2.0 * pi * 2.0 / N, kj = -2.0 * pi * 5.0 / N;
    const auto s0 = bloch(N, ki, kj);
    const double dt = 0.005, T = 10.0;
    const auto s = evolve_lattice(s0, p, dt, static_cast<std::size_t>(T / dt));
    const double w = lattice_dispersion(ki, kj, p.omega_c, p.J);
    for (std::size_t i = 0; i < s.size(); ++i) {
        // Profile invariant, only the phase rotates.
        EXPECT_NEAR(std::abs(s.a[i]), 1.0, 1e-8 * T);
        EXPECT_NEAR(std::arg(s.a[i] / (s0.a[i] * std::polar(1.0, -w * T))), 0.0, 1e-8 * T);
    }
}

TEST(Step, DecoupledSitesDecayIndependently)
{
    auto p = free_lattice(8, 0.7, 0.0);
    p.kappa = 0.2;
    LatticeState s0(8, 8);
    std::mt19937 rng(3);
    std::normal_distribution<double> d;
    for (cplx& z : s0.a) z = cplx(d(rng), d(rng));
    const double dt = 0.01;
    const auto s = evolve_lattice(s0, p, dt, 300);
    const cplx f = std::exp(-cplx(p.kappa, p.omega_c) * 3.0);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LT(std::abs(s.a[i] - f * s0.a[i]), 1e-10);
}

TEST(Step, HalfConventionHalvesTheDecay)
{
    auto p = free_lattice(4, 0.0, 0.0);
    p.kappa = 0.4;
    p.convention = DampingConvention::half;
    LatticeState s0(4, 4);
    for (cplx& z : s0.a) z = 1.0;
    const auto s = evolve_lattice(s0, p, 0.01, 100);
    EXPECT_NEAR(std::abs(s.a[0]), std::exp(-0.2), 1e-12);
}

TEST(Step, UniformFieldFollowsEliminatedKerrRate)
{
    auto p = free_lattice(8, 0.3, 0.1);
    p.omega_m = 1.0;
    p.gamma = 10.0;
    p.g_prime = 0.3;
    LatticeState s(8, 8);
    for (cplx& z : s.a) z = 1.0;
    const double dt = 0.002;
    const double t1 = 2.0, t2 = 40.0;
    s = evolve_lattice(s, p, dt, static_cast<std::size_t>(t1 / dt));
    const cplx a1 = s.a[0];
    s = evolve_lattice(s, p, dt, static_cast<std::size_t>((t2 - t1) / dt));
    // Remove the linear rotation, keep the accumulated nonlinear phase.
    const double phase = std::arg(s.a[0] / a1 * std::polar(1.0, (p.omega_c + 4.0 * p.J) * (t2 - t1)));
    const double T = p.omega_m / (p.gamma * p.gamma + p.omega_m * p.omega_m);
    const double expected = 2.0 * p.g_prime * p.g_prime * T * (t2 - t1);
    EXPECT_NEAR(phase / expected, 1.0, 0.05);
    EXPECT_NEAR(-array_kerr_coupling(p) * (t2 - t1), expected, 1e-12);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(std::abs(s.a[i] - s.a[0]), 1e-12);
}

TEST(Step, PhotonNumberConserved)
{
    // RK4 loses |R(i z)|^2 - 1 ~ -z^6/72 per step; at z = 0.01 that is far
    // below 1e-13.
    const std::size_t N = 16;
    const auto p = free_lattice(N, 0.5, 0.4);
    LatticeState s(N, N);
    std::mt19937 rng(11);
    std::normal_distribution<double> d;
    for (cplx& z : s.a) z = cplx(d(rng), d(rng));
    const double dt = 0.01 / (std::abs(p.omega_c) + 4.0 * std::abs(p.J));
    const double n0 = total_photons(s);
    s = evolve_lattice(s, p, dt, 1000);
    EXPECT_LT(std::abs(total_photons(s) / n0 - 1.0), 1e-10);
}

TEST(Step, PhononsStayOnSite)
{
    const std::size_t N = 8;
    auto p = free_lattice(N, 0.2, 0.3);
    p.omega_m = 1.3;
    p.gamma = 0.1;
    LatticeState s(N, N);
    std::mt19937 rng(5);
    std::normal_distribution<double> d;
    for (cplx& z : s.b) z = cplx(d(rng), d(rng));
    std::vector<std::size_t> perm(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 37 + 11) % perm.size();
    LatticeState t = s;
    for (std::size_t i = 0; i < perm.size(); ++i) t.b[perm[i]] = s.b[i];
    const auto s1 = evolve_lattice(s, p, 0.01, 50), t1 = evolve_lattice(t, p, 0.01, 50);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(t1.b[perm[i]], s1.b[i]);
}

TEST(Step, PreconditionsEnforced)
{
    const auto p = free_lattice(8, 1.0, 1.0);
    LatticeState s(8, 8);
    EXPECT_THROW(step_lattice(s, p, 0.1), PreconditionError);
    EXPECT_NO_THROW(step_lattice(s, p, 0.1, {true}));
    EXPECT_THROW(step_lattice(LatticeState(4, 8), p, 0.01), PreconditionError);
    EXPECT_THROW(free_lattice(2, 0.0, 1.0).validate(), DomainError);
}

TEST(Step, BlowUpReportsStepIndex)
{
    auto p = free_lattice(4, 0.0, 0.0);
    p.kappa = -1e3;
    LatticeState s(4, 4);
    for (cplx& z : s.a) z = 1e300;
    try {
        evolve_lattice(s, p, 1e-4, 10);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    }
}

TEST(Continuum, ParametersAndSign)
{
    const auto a = continuum_params(0.5, 1.0, 3.0);
    EXPECT_DOUBLE_EQ(std::abs(a.m), 1.0);
    EXPECT_LT(a.m, 0.0);
    EXPECT_TRUE(a.negative_mass);
    EXPECT_DOUBLE_EQ(a.V_tilde, 5.0);
    const auto b = continuum_params(-0.5, 1.0, 2.0);
    EXPECT_DOUBLE_EQ(b.m, 1.0);
    EXPECT_DOUBLE_EQ(b.V_tilde, 0.0);
    EXPECT_THROW(continuum_params(0.0, 1.0, 0.0), DomainError);
}

TEST(Continuum, SiMassByHand)
{
    const double J = 2.0 * pi * 1e6, h = 1e-6;
    const auto c = continuum_params(J, h, 0.0, si::hbar);
    EXPECT_NEAR(std::abs(c.m) / 8.3923e-30, 1.0, 1e-4);
}

TEST(Continuum, TaylorFitRecoversMass)
{
    const double J = 0.37, h = 0.8, wc = 1.1;
    Eigen::MatrixXd A(41, 2);
    Eigen::VectorXd b(41);
    for (int i = 0; i <= 40; ++i) {
        const double k = 0.1 / h * i / 40.0;
        A(i, 0) = 1.0;
        A(i, 1) = k * k;
        b[i] = lattice_dispersion(k * h, 0.0, wc, J);
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    const double m_fit = 1.0 / (2.0 * c[1]);
    EXPECT_NEAR(m_fit / continuum_params(J, h, wc).m, 1.0, 0.01);
    EXPECT_NEAR(c[0], continuum_params(J, h, wc).V_tilde, 1e-6);
}

ComplexField2D sampled(std::size_t N, double h, const std::function<cplx(double, double)>& f, std::size_t Ny = 0)
{
    ComplexField2D g(N, Ny ? Ny : N, h, h);
    g.fill_with(f);
    return g;
}

TEST(Continuum, UniformFieldHasNoError)
{
    const std::size_t N = 16;
    auto p = free_lattice(N, -4.0 * 0.3, 0.3);
    const auto f = sampled(N, 1.0, [](double, double) { return cplx(0.7, 0.2); });
    const auto e = continuum_error(lattice_from_field(f), f, p, 5.0, 0.01);
    EXPECT_EQ(e.field_error, 0.0);
    EXPECT_EQ(e.density_error, 0.0);
    // Offset carried by the bookkeeping phase; only RK4 rounding remains.
    p.omega_c = 0.9;
    EXPECT_LT(continuum_error(lattice_from_field(f), f, p, 5.0, 0.001).field_error, 1e-10);
}

TEST(Continuum, IncompatibleGridsRejected)
{
    const auto p = free_lattice(16, 0.0, 0.3);
    const auto f = sampled(16, 1.0, [](double, double) { return cplx(1.0); });
    const auto g = sampled(16, 0.5, [](double, double) { return cplx(1.0); });
    EXPECT_THROW(continuum_error(lattice_from_field(f), g, p, 1.0, 0.01), PreconditionError);
    auto wrong = lattice_from_field(f);
    wrong.a[3] = 2.0;
    EXPECT_THROW(continuum_error(wrong, f, p, 1.0, 0.01), PreconditionError);
    EXPECT_THROW(continuum_error(lattice_from_field(f), f, p, 1.0, 0.3), PreconditionError);
}

struct BlochErrors {
    std::vector<double> kh, fixed_time, per_period;
};

BlochErrors bloch_errors()
{
    // N = 128 sites make kh = 0.05 ... 0.4 commensurate to within a few percent;
    // the exact sampled kh is used in the fit.
    const std::size_t N = 128;
    const double J = 0.5;
    auto p = free_lattice(N, -4.0 * J, J);
    p.Ny = 4;
    BlochErrors r;
    for (int j : {1, 2, 4, 8}) {
        const double kh = 2.0 * pi * j / N;
        const auto f = sampled(N, 1.0, [&](double x, double) { return std::polar(1.0, kh * x); }, 4);
        const double dt = 0.025;
        r.kh.push_back(kh);
        r.fixed_time.push_back(continuum_error(lattice_from_field(f), f, p, 20.0, dt).field_error);
        const double period = 2.0 * pi / (J * kh * kh);
        const double T = dt * std::round(period / dt);
        r.per_period.push_back(continuum_error(lattice_from_field(f), f, p, T, dt).field_error);
    }
    return r;
}

TEST(Continuum, BlochErrorFollowsTaylorRemainder)
{
    // The band and its parabola differ by J (kh)^4 / 12: the phase mismatch is
    // fourth order at fixed time and second order over one mode period.
    const auto r = bloch_errors();
    EXPECT_NEAR(loglog_slope(r.kh, r.fixed_time), 4.0, 0.2);
    EXPECT_NEAR(loglog_slope(r.kh, r.per_period), 2.0, 0.2);
    for (std::size_t i = 0; i < r.kh.size(); ++i)
        EXPECT_NEAR(r.fixed_time[i], 0.5 * std::pow(r.kh[i], 4) / 12.0 * 20.0, 0.05 * r.fixed_time[i]);
}

TEST(Continuum, GaussianPacketStaysClose)
{
    const std::size_t N = 128;
    const double J = 0.5, k0 = 0.07, sigma = 16.0;
    auto p = free_lattice(N, -4.0 * J, J);
    const auto f = sampled(N, 1.0, [&](double x, double y) {
        return std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)) * std::polar(1.0, k0 * x);
    });
    const double dt = 0.025;
    const auto e = continuum_error(lattice_from_field(f), f, p, 200.0, dt);
    ASSERT_LE(e.rms_kh, 0.1);
    EXPECT_LE(e.field_error, 1e-2);
    std::printf("gaussian packet: rms kh %.4f, error %.3e\n", e.rms_kh, e.field_error);
}

}  // namespace
