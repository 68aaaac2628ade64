#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "lllab/functionals.hpp"
#include "lllab/perturbation.hpp"
#include "lllab/solitons.hpp"

using namespace lllab;

namespace {

// Composite Simpson rule on [a, b], independent of the library quadrature.
double simpson(const std::function<double(double)>& f, double a, double b, int m = 200000) {
  const double h = (b - a) / m;
  double acc = f(a) + f(b);
  for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

// Analytic soliton pieces written out by hand for the oracles.
struct Profile {
  double c, nu;
  explicit Profile(double c_) : c(c_), nu(std::sqrt(1 - c_ * c_)) {}
  double v(double x) const { return nu / std::cosh(nu * x); }
  double vx(double x) const { return -nu * nu * std::tanh(nu * x) / std::cosh(nu * x); }
  double w(double x) const { return c * v(x) / (1 - v(x) * v(x)); }
};

HydroState sample(const Grid& g, const std::function<double(double)>& v,
                  const std::function<double(double)>& w) {
  HydroState s(g);
  for (std::size_t j = 0; j < g.n; ++j) {
    s.v[j] = v(g.x(j));
    s.w[j] = w(g.x(j));
  }
  return s;
}

HydroState soliton(double c, const Grid& g, double a = 0.0) {
  return sample(
      g, [&](double x) { return soliton_hydro(c, x - a).v; },
      [&](double x) { return soliton_hydro(c, x - a).w; });
}

LocalizedMomentumSpec fixed_center(double center, double y0, double nu) {
  return {[center](double) { return center; }, y0, nu};
}

const Grid kGrid = Grid::centered(102.4, 2048);

}  // namespace

TEST(Energy, ZeroState) { EXPECT_EQ(energy_hydro(HydroState(kGrid)), 0.0); }

TEST(Energy, SolitonClosedFormAgainstQuadrature) {
  const Profile p(0.6);
  const double oracle = simpson(
      [&](double x) {
        const double v = p.v(x), q = 1 - v * v;
        return 0.5 * (p.vx(x) * p.vx(x) / q + q * p.w(x) * p.w(x) + v * v);
      },
      -60, 60);
  EXPECT_NEAR(oracle, 1.6, 1e-10);
  EXPECT_NEAR(energy_hydro(soliton(0.6, kGrid)), 1.6, 1e-8);
}

TEST(Energy, EvenUnderSignFlip) {
  const HydroState s = soliton(0.6, kGrid);
  EXPECT_DOUBLE_EQ(energy_hydro(-1.0 * s), energy_hydro(s));
}

TEST(Energy, VacuumGuard) {
  HydroState s(kGrid);
  s.v[100] = 1.0;
  EXPECT_THROW(energy_hydro(s), Error);
}

TEST(EnergySpin, ConstantVacuum) {
  EXPECT_EQ(energy_spin(SpinState(kGrid, std::vector<Vec3>(kGrid.n, Vec3{0, 1, 0}))), 0.0);
}

TEST(EnergySpin, SolitonMatchesHydroFrame) {
  const SpinState m = soliton_spin_field(0.6, 0.0, kGrid);
  EXPECT_NEAR(energy_spin(m), 1.6, 1e-8);
  EXPECT_NEAR(energy_spin(m), energy_hydro(extract_hydro(m)), 1e-8);
}

TEST(EnergySpin, RotationInvariance) {
  SpinState m = soliton_spin_field(0.6, 0.0, kGrid);
  const double e0 = energy_spin(m);
  const double th = 0.7;
  for (auto& x : m.m) x = {std::cos(th) * x[0] - std::sin(th) * x[1],
                           std::sin(th) * x[0] + std::cos(th) * x[1], x[2]};
  EXPECT_NEAR(energy_spin(m), e0, 1e-12);
}

TEST(Momentum, ZeroState) { EXPECT_EQ(momentum(HydroState(kGrid)), 0.0); }

TEST(Momentum, SolitonClosedFormAgainstQuadrature) {
  const Profile p(0.6);
  const double oracle = simpson([&](double x) { return p.v(x) * p.w(x); }, -60, 60);
  const double closed = 2.0 * std::atan(4.0 / 3.0);
  EXPECT_NEAR(closed, 1.854590436, 1e-9);
  EXPECT_NEAR(oracle, closed, 1e-10);
  EXPECT_NEAR(momentum(soliton(0.6, kGrid)), closed, 1e-8);
}

TEST(Momentum, EvenUnderSignFlip) {
  const HydroState s = soliton(-0.3, kGrid);
  EXPECT_DOUBLE_EQ(momentum(-1.0 * s), momentum(s));
}

TEST(Weight, ValuesAndLimits) {
  EXPECT_EQ(phi_bump(0.0, 0.8), 0.5);
  EXPECT_NEAR(phi_bump(-1e4, 0.8), 0.0, 1e-15);
  EXPECT_NEAR(phi_bump(1e4, 0.8), 1.0, 1e-15);
  EXPECT_THROW(phi_bump(0.0, 0.0), Error);
}

TEST(Weight, DerivativesMatchFiniteDifferences) {
  const double nu = 0.8, h = 1e-3;
  for (double x = -60; x <= 60; x += 3.7) {
    const double d1 = (phi_bump(x + h, nu) - phi_bump(x - h, nu)) / (2 * h);
    EXPECT_NEAR(phi_bump_d1(x, nu), d1, 1e-9);
    const double d3 = (phi_bump_d1(x + h, nu) - 2 * phi_bump_d1(x, nu) + phi_bump_d1(x - h, nu)) / (h * h);
    EXPECT_NEAR(phi_bump_d3(x, nu), d3, 1e-10);
  }
}

TEST(Weight, ThirdDerivativeBound) {
  for (double nu : {0.2, 0.6, 1.0})
    for (double x = -100; x <= 100; x += 0.01)
      EXPECT_LE(std::abs(phi_bump_d3(x, nu)), nu * nu / 64 * phi_bump_d1(x, nu) * (1 + 1e-12));
}

TEST(LocalizedMomentum, ZeroState) {
  EXPECT_EQ(localized_momentum(HydroState(kGrid), fixed_center(0, 0, 0.8), 0.0), 0.0);
}

TEST(LocalizedMomentum, LimitsInY0) {
  const HydroState s = soliton(0.6, kGrid);
  const double P = kGrid.period(), nu = 0.8;
  const double tol = std::exp(-nu * P / 32);
  EXPECT_NEAR(localized_momentum(s, fixed_center(0, -P / 2, nu), 0.0), momentum(s), tol);
  EXPECT_NEAR(localized_momentum(s, fixed_center(0, P / 2, nu), 0.0), 0.0, tol);
}

TEST(LocalizedMomentum, MonotoneInY0ForPositiveDensity) {
  const HydroState s = soliton(0.6, kGrid);
  double prev = 1e300;
  for (double y0 = -40; y0 <= 40; y0 += 2.5) {
    const double I = localized_momentum(s, fixed_center(0, y0, 0.8), 0.0);
    EXPECT_LE(I, prev);
    prev = I;
  }
}

TEST(LocalizedMomentum, CenterPathIsEvaluatedAtTime) {
  const HydroState s = soliton(0.6, kGrid);
  const LocalizedMomentumSpec moving{[](double t) { return 2.0 * t; }, 1.0, 0.8};
  EXPECT_DOUBLE_EQ(localized_momentum(s, moving, 1.5), localized_momentum(s, fixed_center(3.0, 1.0, 0.8), 0.0));
}

TEST(LocalizedMomentumRate, ZeroState) {
  EXPECT_EQ(localized_momentum_rate(HydroState(kGrid), fixed_center(0, 0, 0.8), 0.0, 0.3), 0.0);
}

TEST(LocalizedMomentumRate, MatchesFlowDerivative) {
  // Oracle: d/dt int Phi(x - y(t)) v w = int Phi (v_t w + v w_t) - y' int Phi' v w,
  // with (v_t, w_t) from the flow itself.
  const Grid g = Grid::centered(204.8, 2048);
  HydroState s = multi_soliton_sum({{{-0.4, -20.0, 1}, {0.7, 20.0, -1}}, 30.0}, g);
  s += random_smooth(g, 0.05, 3);
  const FieldPair dt = rhs_hll(s);
  for (double y0 : {-10.0, 0.0, 5.0}) {
    const double speed = 0.35, base = -20.0;
    const LocalizedMomentumSpec spec{[=](double t) { return base + speed * t; }, y0, 0.5};
    double oracle = 0.0;
    for (std::size_t j = 0; j < g.n; ++j) {
      const double y = g.x(j) - base - y0;
      oracle += phi_bump(y, 0.5) * (dt.v[j] * s.w[j] + s.v[j] * dt.w[j]) -
                speed * phi_bump_d1(y, 0.5) * s.v[j] * s.w[j];
    }
    oracle *= g.dx;
    EXPECT_NEAR(localized_momentum_rate(s, spec, 0.0, speed), oracle, 1e-10) << "y0 = " << y0;
  }
}

TEST(LocalizedMomentumRate, CoercivitySpotCheck) {
  const Grid g = Grid::centered(204.8, 2048);
  const HydroState s = multi_soliton_sum({{{-0.4, -20.0, 1}, {0.4, 20.0, 1}}, 30.0}, g);
  const double nu = std::sqrt(1 - 0.16);
  for (std::size_t k = 0; k < 2; ++k) {
    const double c = k == 0 ? -0.4 : 0.4, a = k == 0 ? -20.0 : 20.0;
    const LocalizedMomentumSpec spec = fixed_center(a, 10.0, nu);
    const double rate = localized_momentum_rate(s, spec, 0.0, c);
    const double floor = nu * nu / 32 * localized_quadratic(s, spec, 0.0);
    const double A = std::max(0.0, floor - rate) * std::exp(nu * 10.0 / 16);
    EXPECT_LE(A, 10.0);
  }
}

TEST(Virial, ZeroState) {
  EXPECT_EQ(virial_U(HydroState(kGrid)), 0.0);
  const IdentitySides z = virial_linear_identity(HydroState(kGrid));
  EXPECT_EQ(z.lhs, 0.0);
  EXPECT_EQ(z.rhs, 0.0);
  EXPECT_EQ(virial_rate(HydroState(kGrid)), 0.0);
}

TEST(Virial, CenteredSolitonHasZeroMoment) {
  EXPECT_NEAR(virial_U(soliton(0.6, kGrid)), 0.0, 1e-10);
}

TEST(Virial, TranslationShiftsByMomentum) {
  const HydroState s = soliton(0.6, kGrid, -3.0);
  const HydroState t = soliton(0.6, kGrid, 4.0);
  EXPECT_NEAR(virial_U(t), virial_U(s) + 7.0 * momentum(s), 1e-8);
}

TEST(Virial, SeamWarning) {
  VirialWarning warn;
  virial_U(soliton(0.6, kGrid), &warn);
  EXPECT_TRUE(warn.seam_ok);
  virial_U(soliton(0.6, kGrid, kGrid.x_min + 1.0), &warn);
  EXPECT_FALSE(warn.seam_ok);
}

TEST(VirialIdentity, GaussianInV) {
  const Grid g = Grid::centered(40.96, 1024);
  const HydroState s = sample(g, [](double x) { return std::exp(-x * x); }, [](double) { return 0.0; });
  const double oracle = 1.5 * simpson([](double x) { return 4 * x * x * std::exp(-2 * x * x); }, -20, 20) +
                        0.5 * simpson([](double x) { return std::exp(-2 * x * x); }, -20, 20);
  EXPECT_NEAR(oracle, 2 * std::sqrt(std::numbers::pi / 2), 1e-12);
  const IdentitySides r = virial_linear_identity(s);
  EXPECT_NEAR(r.rhs, oracle, 1e-9 * oracle);
  EXPECT_NEAR(r.lhs, r.rhs, 1e-9 * r.rhs);
}

TEST(VirialIdentity, GaussianInW) {
  const Grid g = Grid::centered(40.96, 1024);
  const HydroState s = sample(g, [](double) { return 0.0; }, [](double x) { return std::exp(-x * x); });
  const double oracle = 0.5 * std::sqrt(std::numbers::pi / 2);
  const IdentitySides r = virial_linear_identity(s);
  EXPECT_NEAR(r.rhs, oracle, 1e-9 * oracle);
  EXPECT_NEAR(r.lhs, r.rhs, 1e-9 * r.rhs);
}

TEST(VirialIdentity, RandomSuite) {
  const Grid g = Grid::centered(204.8, 2048);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const HydroState s = random_smooth(g, 1.0, seed, {1.0, 1.0 / 16});
    VirialWarning warn;
    const IdentitySides r = virial_linear_identity(s, &warn);
    ASSERT_TRUE(warn.seam_ok);
    EXPECT_NEAR(r.lhs, r.rhs, 1e-9 * r.rhs) << "seed " << seed;
  }
}

TEST(VirialRate, SmallDataCoercivity) {
  const Grid g = Grid::centered(409.6, 4096);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const HydroState s = random_smooth(g, 0.01, seed);
    VirialWarning warn;
    const double rate = virial_rate(s, &warn);
    EXPECT_TRUE(warn.seam_ok);
    EXPECT_GE(rate, 0.25 * std::pow(x_norm(s), 2)) << "seed " << seed;
  }
}
