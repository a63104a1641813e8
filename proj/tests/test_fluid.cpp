// Copyright 2026 The optofluid Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Sparse>
#include <gtest/gtest.h>

#include "optofluid/field.hpp"
#include "optofluid/fluid.hpp"

namespace {

using namespace optofluid;
using namespace optofluid::fluid;

ComplexField2D uniform(std::size_t nx, std::size_t ny, double L, double n)
{
    return ComplexField2D(nx, ny, L / static_cast<double>(nx), L / static_cast<double>(ny), UnitTag::natural,
                          cplx(std::sqrt(n), 0.0));
}

RealField2D harmonic(const ComplexField2D& grid, double m, double Omega)
{
    auto V = RealField2D::like(grid);
    V.fill_with([&](double x, double y) { return 0.5 * m * Omega * Omega * (x * x + y * y); });
    return V;
}

/// Largest dt with stiffness 0.1 for this state.
double safe_dt(const ComplexField2D& psi, const FluidParams& p)
{
    return 0.1 / SplitStep(psi, p, 1.0).stiffness(psi);
}

double rms_width_x(const ComplexField2D& psi)
{
    double s = 0.0, t = 0.0;
    for (std::size_t j = 0; j < psi.ny(); ++j)
        for (std::size_t i = 0; i < psi.nx(); ++i) {
            const double n = std::norm(psi(i, j));
            s += n * psi.x(i) * psi.x(i);
            t += n;
        }
    return std::sqrt(s / t);
}

// 1D Crank-Nicolson with a sixth-order periodic finite-difference Laplacian.
class CrankNicolson1D {
public:
    CrankNicolson1D(std::size_t n, double dx, double m, const std::vector<double>& V, double dt)
    {
        const double c[4] = {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
        const int N = static_cast<int>(n);
        using T = Eigen::Triplet<std::complex<double>>;
        std::vector<T> a, b;
        const cplx h(0.0, 0.5 * dt);
        for (int i = 0; i < N; ++i) {
            for (int s = -3; s <= 3; ++s) {
                const int j = (i + s + N) % N;
                double H = -c[std::abs(s)] / (2.0 * m * dx * dx);
                if (s == 0) H += V[static_cast<std::size_t>(i)];
                a.emplace_back(i, j, (s == 0 ? 1.0 : 0.0) + h * H);
                b.emplace_back(i, j, (s == 0 ? 1.0 : 0.0) - h * H);
            }
        }
        A_.resize(N, N);
        B_.resize(N, N);
        A_.setFromTriplets(a.begin(), a.end());
        B_.setFromTriplets(b.begin(), b.end());
        A_.makeCompressed();
        lu_.compute(A_);
    }

    void step(Eigen::VectorXcd& psi) const { psi = lu_.solve(B_ * psi); }

private:
    Eigen::SparseMatrix<std::complex<double>> A_, B_;
    Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>> lu_;
};

TEST(Evolve, FreePlaneWaveRotatesAtKineticFrequency)
{
    auto psi = uniform(32, 32, 2.0 * pi * 4, 1.0);
    const double kx = 0.75, ky = -0.5, m = 1.7;
    psi.fill_with([&](double x, double y) { return std::polar(1.0, kx * x + ky * y); });
    FluidParams p;
    p.m = m;
    const double dt = 0.01;
    const std::size_t steps = 500;
    const auto r = evolve(psi, p, dt, steps);
    const double w = (kx * kx + ky * ky) / (2.0 * m);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        EXPECT_NEAR(std::abs(r.psi[i]), 1.0, 1e-12);
        EXPECT_LT(std::abs(r.psi[i] - psi[i] * std::polar(1.0, -w * dt * steps)), 1e-10);
    }
}

TEST(Evolve, UniformStateAcquiresNonlinearPhase)
{
    const double n = 2.5, G = 0.8;
    auto psi = uniform(16, 16, 10.0, n);
    FluidParams p;
    p.G = G;
    p.V_offset = 3.0;
    const double dt = 0.002;
    const auto r = evolve(psi, p, dt, 3000);
    const double t = dt * 3000;
    EXPECT_NEAR(r.global_phase, -3.0 * t, 1e-12);
    for (std::size_t i = 0; i < psi.size(); ++i)
        EXPECT_LT(std::abs(r.psi[i] - std::sqrt(n) * std::polar(1.0, -G * n * t)), 1e-11);
}

TEST(Evolve, RefusesStiffStepUnlessForced)
{
    auto psi = uniform(64, 64, 8.0, 1.0);
    FluidParams p;
    EXPECT_THROW(evolve(psi, p, 1.0, 1), PreconditionError);
    EXPECT_NO_THROW(evolve(psi, p, 1.0, 1, true));
}

TEST(Evolve, RejectsInvalidParameters)
{
    auto psi = uniform(8, 8, 8.0, 1.0);
    FluidParams p;
    p.m = 0.0;
    EXPECT_THROW(evolve(psi, p, 0.01, 1), DomainError);
    p.m = 1.0;
    p.V = RealField2D(8, 4, 1.0, 2.0);
    EXPECT_THROW(evolve(psi, p, 0.01, 1), PreconditionError);
}

TEST(Evolve, BreathingGaussianMatchesCrankNicolson)
{
    const std::size_t N = 128;
    const double L = 16.0, m = 1.0, Omega = 1.0, sigma = 1.4;
    ComplexField2D psi(N, N, L / N, L / N);
    psi.fill_with([&](double x, double y) { return std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)); });
    FluidParams p;
    p.m = m;
    p.V = harmonic(psi, m, Omega);
    const double T = pi / Omega;   // one breathing period
    const double dt0 = safe_dt(psi, p);
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt0));
    const double dt = T / static_cast<double>(steps);
    const std::size_t half = steps / 2;

    const auto mid = evolve(psi, p, dt, half);
    const auto end = evolve(mid.psi, p, dt, steps - half);

    // The field separates, psi(x, y, t) = f(x, t) f(y, t).
    std::vector<double> V1(N);
    Eigen::VectorXcd f(N);
    for (std::size_t i = 0; i < N; ++i) {
        V1[i] = 0.5 * m * Omega * Omega * psi.x(i) * psi.x(i);
        f[static_cast<Eigen::Index>(i)] = std::exp(-psi.x(i) * psi.x(i) / (2.0 * sigma * sigma));
    }
    CrankNicolson1D cn(N, L / N, m, V1, dt);
    for (std::size_t s = 0; s < steps; ++s) cn.step(f);
    ComplexField2D ref = ComplexField2D::like(psi);
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < N; ++i)
            ref(i, j) = f[static_cast<Eigen::Index>(i)] * f[static_cast<Eigen::Index>(j)];

    EXPECT_LE(relative_l2(end.psi, ref), 1e-4);
    // Width breathes at twice the trap frequency: narrowest after a quarter
    // trap period, restored after half of one.
    EXPECT_NEAR(rms_width_x(mid.psi) / rms_width_x(psi), 1.0 / (sigma * sigma), 2e-3);
    EXPECT_NEAR(rms_width_x(end.psi) / rms_width_x(psi), 1.0, 1e-6);
}

struct Bump {
    ComplexField2D psi;
    FluidParams p;
};

Bump nonlinear_bump()
{
    Bump b{uniform(128, 128, 32.0, 1.0), {}};
    b.psi.fill_with([](double x, double y) {
        const double r2 = x * x + y * y;
        return (1.0 + 0.4 * std::exp(-r2 / 8.0)) * std::polar(1.0, 0.3 * std::exp(-r2 / 16.0));
    });
    b.p.G = 1.0;
    b.p.V = harmonic(b.psi, 1.0, 0.05);
    return b;
}

TEST(Evolve, ConservesNormAndEnergy)
{
    const Bump b = nonlinear_bump();
    const double dt = safe_dt(b.psi, b.p);
    const double n0 = norm(b.psi), e0 = energy(b.psi, b.p);
    const auto r = evolve(b.psi, b.p, dt, 1000);
    EXPECT_LE(std::abs(norm(r.psi) / n0 - 1.0), 1e-10);
    EXPECT_LE(std::abs(energy(r.psi, b.p) / e0 - 1.0), 1e-6);
}

TEST(Evolve, StrangSplittingIsSecondOrder)
{
    const Bump b = nonlinear_bump();
    const double T = 0.5;
    auto run = [&](std::size_t steps) { return evolve(b.psi, b.p, T / steps, steps, true).psi; };
    const auto ref = run(400);
    const double e1 = relative_l2(run(50), ref), e2 = relative_l2(run(100), ref);
    EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.1) << e1 << " " << e2;
}

TEST(GroundState, HarmonicOscillatorWithoutInteraction)
{
    const double m = 1.3, Omega = 0.8;
    auto grid = uniform(64, 64, 20.0, 1.0);
    FluidParams p;
    p.m = m;
    p.V = harmonic(grid, m, Omega);
    const auto gs = ground_state(p, 5.0, grid);
    EXPECT_NEAR(norm(gs.psi), 5.0, 1e-12);
    EXPECT_NEAR(gs.energy_per_particle / Omega, 1.0, 1e-6);
    // |psi|^2 ~ exp(-r^2/a^2), a = 1/sqrt(m Omega): <x^2> = a^2/2.
    EXPECT_NEAR(rms_width_x(gs.psi), std::sqrt(0.5 / (m * Omega)), 1e-5);
}

TEST(GroundState, RepulsiveBoxIsUniform)
{
    auto grid = uniform(32, 32, 10.0, 1.0);
    FluidParams p;
    p.G = 2.0;
    const auto gs = ground_state(p, 300.0, grid);
    for (const cplx& z : gs.psi.values()) EXPECT_NEAR(std::norm(z), 3.0, 1e-8);
    EXPECT_NEAR(gs.chemical_potential, 2.0 * 3.0, 1e-7);
}

TEST(GroundState, ThomasFermiChemicalPotential)
{
    const double m = 1.0, Omega = 1.0, G = 1.0, N = 2000.0;
    auto grid = uniform(128, 128, 24.0, 1.0);
    FluidParams p;
    p.m = m;
    p.G = G;
    p.V = harmonic(grid, m, Omega);
    const auto gs = ground_state(p, N, grid);
    const double mu_tf = std::sqrt(m * Omega * Omega * G * N / pi);
    EXPECT_NEAR(gs.chemical_potential / mu_tf, 1.0, 0.05);
}

TEST(GroundState, AttractiveCollapseIsRefused)
{
    auto grid = uniform(64, 64, 16.0, 1.0);
    FluidParams p;
    p.G = -50.0;
    p.V = harmonic(grid, 1.0, 1.0);
    EXPECT_THROW(ground_state(p, 1.0, grid), PhysicsGateError);
}

TEST(GroundState, IsStationaryUnderRealTimeEvolution)
{
    auto grid = uniform(64, 64, 16.0, 1.0);
    FluidParams p;
    p.G = 1.0;
    p.V = harmonic(grid, 1.0, 1.0);
    const auto gs = ground_state(p, 10.0, grid);
    const auto r = evolve(gs.psi, p, safe_dt(gs.psi, p), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_LT(std::abs(std::norm(r.psi[i]) - std::norm(gs.psi[i])), 1e-8);
}

TEST(Bogoliubov, PhononicSlope)
{
    FluidParams p;
    p.m = 1.5;
    p.G = 0.6;
    const double n = 2.0;
    const double c = std::sqrt(n * p.G / p.m), xi = 1.0 / (p.m * c);
    const double k = 1e-3 / xi;
    EXPECT_NEAR(bogoliubov_dispersion(k, n, p).real() / (c * k), 1.0, 1e-5);
    EXPECT_NEAR(excitation_speed_squared(n, p), c * c, 1e-15);
}

TEST(Bogoliubov, ClosedFormAtTwoHealingLengths)
{
    FluidParams p;
    p.m = 0.7;
    p.G = 1.1;
    const double n = 0.9;
    const double c = std::sqrt(n * p.G / p.m), xi = 1.0 / (p.m * c);
    const double k = 2.0 / xi;
    EXPECT_NEAR(bogoliubov_dispersion(k, n, p).real(), std::sqrt(2.0) * c * k, 1e-12 * c * k);
}

TEST(Bogoliubov, AttractiveBranchIsImaginary)
{
    FluidParams p;
    p.G = -1.0;
    const cplx w = bogoliubov_dispersion(1.0, 1.0, p);
    EXPECT_EQ(w.real(), 0.0);
    EXPECT_NEAR(w.imag(), std::sqrt(0.75), 1e-15);
}

TEST(Linearized, ZeroSeedStaysZero)
{
    auto psi0 = uniform(16, 16, 10.0, 1.0);
    FluidParams p;
    p.G = 1.0;
    auto phi = ComplexField2D::like(psi0);
    for (int i = 0; i < 10; ++i) phi = linearized_step(phi, psi0, p, 0.01);
    for (const cplx& z : phi.values()) EXPECT_EQ(z, cplx(0.0, 0.0));
}

TEST(Linearized, FreePlaneWaveOnUniformBackground)
{
    auto psi0 = uniform(32, 32, 2.0 * pi * 4, 1.0);
    FluidParams p;
    const double kx = 1.25;
    auto phi = ComplexField2D::like(psi0);
    phi.fill_with([&](double x, double) { return std::polar(1.0, kx * x); });
    BogoliubovStepper s(psi0, p);
    const double dt = 0.01;
    for (int i = 0; i < 200; ++i) s.step(phi, dt);
    for (std::size_t j = 0; j < 32; ++j)
        for (std::size_t i = 0; i < 32; ++i)
            EXPECT_LT(std::abs(phi(i, j) - std::polar(1.0, kx * psi0.x(i) - kx * kx / 2.0 * 2.0)), 1e-8);
}

TEST(Linearized, RejectsNodesInBackground)
{
    auto psi0 = uniform(8, 8, 8.0, 1.0);
    psi0[3] = 0.0;
    EXPECT_THROW(BogoliubovStepper(psi0, FluidParams{}), PreconditionError);
}

TEST(Linearized, RefusesUnstableStep)
{
    auto psi0 = uniform(64, 64, 8.0, 1.0);
    BogoliubovStepper s(psi0, FluidParams{});
    auto phi = ComplexField2D::like(psi0);
    EXPECT_THROW(s.step(phi, 10.0 / s.omega_max()), PreconditionError);
}

TEST(Dispersion, FreeParticleRecovered)
{
    auto psi0 = uniform(64, 2, 20.0 * pi, 1.0);
    FluidParams p;
    p.m = 2.0;
    const std::vector<double> ks{0.3, 0.6, 1.0};
    for (const auto& pt : measure_dispersion(psi0, p, ks)) {
        ASSERT_TRUE(pt.resolved) << pt.diagnostic;
        EXPECT_NEAR(pt.omega.real() / (pt.k * pt.k / (2.0 * p.m)), 1.0, 1e-3) << "k=" << pt.k;
    }
}

TEST(Dispersion, RepulsiveMatchesBogoliubov)
{
    auto psi0 = uniform(64, 2, 20.0 * pi, 1.0);
    FluidParams p;
    p.G = 1.0;
    // c = xi = 1
    for (const auto& pt : measure_dispersion(psi0, p, {0.1, 0.3, 0.6, 1.0})) {
        ASSERT_TRUE(pt.resolved) << pt.diagnostic;
        EXPECT_NEAR(pt.omega.real() / bogoliubov_dispersion(pt.k, 1.0, p).real(), 1.0, 0.02) << "k=" << pt.k;
    }
}

TEST(Dispersion, ModulationalInstabilityGrowthRate)
{
    auto psi0 = uniform(64, 2, 20.0 * pi, 1.0);
    FluidParams p;
    p.G = -1.0;
    for (const auto& pt : measure_dispersion(psi0, p, {0.5, 1.0, 1.5})) {
        ASSERT_TRUE(pt.resolved) << pt.diagnostic;
        EXPECT_EQ(pt.omega.real(), 0.0);
        EXPECT_NEAR(pt.omega.imag() / bogoliubov_dispersion(pt.k, 1.0, p).imag(), 1.0, 0.02) << "k=" << pt.k;
    }
}

TEST(Dispersion, IncommensurateWavenumberDiagnosed)
{
    auto psi0 = uniform(16, 2, 10.0, 1.0);
    const auto pts = measure_dispersion(psi0, FluidParams{}, {0.123});
    EXPECT_FALSE(pts[0].resolved);
    EXPECT_FALSE(pts[0].diagnostic.empty());
}

TEST(Dispersion, GalileanBoostShiftsByKv)
{
    const double L = 20.0 * pi, m = 1.0;
    const double v = 2.0 * pi / (m * L) * 2.0;   // commensurate flow, 0.2
    auto rest = uniform(64, 2, L, 1.0);
    auto moving = rest;
    moving.fill_with([&](double x, double) { return std::polar(1.0, m * v * x); });
    FluidParams p;
    p.G = 1.0;
    const std::vector<double> ks{0.3, 0.6};
    const auto a = measure_dispersion(rest, p, ks), b = measure_dispersion(moving, p, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        ASSERT_TRUE(a[i].resolved && b[i].resolved);
        EXPECT_NEAR((b[i].omega.real() - a[i].omega.real()) / (ks[i] * v), 1.0, 0.02) << "k=" << ks[i];
    }
}

}  // namespace
