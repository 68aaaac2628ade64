#pragma once

// Dark solitons of the easy-plane Landau-Lifshitz equation in the spin and
// hydrodynamical frames, their superpositions, and the frame conversions.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lllab/error.hpp"
#include "lllab/grid.hpp"
#include "lllab/spectral.hpp"

namespace lllab {

inline void check_speed(double c) {
  if (!(std::abs(c) < 1.0) || c == 0.0)
    throw Error(Errc::invalid_argument,
                "soliton speed must satisfy 0 < |c| < 1 (got " + std::to_string(c) + ")");
}

inline double soliton_nu(double c) { return std::sqrt(1.0 - c * c); }

/// sech(y) without overflow for large |y|.
inline double sech(double y) {
  const double e = std::exp(-std::abs(y));
  return 2.0 * e / (1.0 + e * e);
}

/// Spin profile u_c(x) = (c sech(nu x), tanh(nu x), nu sech(nu x)).
inline Vec3 soliton_spin(double c, double x) {
  check_speed(c);
  const double nu = soliton_nu(c);
  const double s = sech(nu * x);
  return {c * s, std::tanh(nu * x), nu * s};
}

struct HydroPoint {
  double v = 0.0;
  double w = 0.0;
};

/// Q_c(x) = (v_c, w_c) with v_c = nu sech(nu x), w_c = c v_c / (1 - v_c^2).
inline HydroPoint soliton_hydro(double c, double x) {
  check_speed(c);
  const double nu = soliton_nu(c);
  const double v = nu * sech(nu * x);
  return {v, c * v / (1.0 - v * v)};
}

/// d/dx Q_c(x).
inline HydroPoint soliton_hydro_dx(double c, double x) {
  check_speed(c);
  const double nu = soliton_nu(c);
  const double v = nu * sech(nu * x);
  const double vx = -nu * v * std::tanh(nu * x);
  const double q = 1.0 - v * v;
  return {vx, c * vx * (1.0 + v * v) / (q * q)};
}

struct SolitonParams {
  double c = 0.5;
  double a = 0.0;
  int s = 1;
};

/// Ordered speeds, separated centers.
struct MultiSolitonConfig {
  std::vector<SolitonParams> params;
  double min_separation = 0.0;

  std::size_t size() const { return params.size(); }

  void validate() const {
    require(!params.empty(), Errc::invalid_argument, "multi-soliton needs at least one soliton");
    for (std::size_t j = 0; j < params.size(); ++j) {
      check_speed(params[j].c);
      require(params[j].s == 1 || params[j].s == -1, Errc::invalid_argument,
              "soliton sign must be +1 or -1");
      if (j == 0) continue;
      require(params[j].c > params[j - 1].c, Errc::invalid_argument,
              "speeds must be strictly increasing");
      require(params[j].a > params[j - 1].a + min_separation, Errc::invalid_argument,
              "centers must be separated by more than min_separation");
    }
  }

  std::vector<double> speeds() const {
    std::vector<double> r;
    for (const auto& p : params) r.push_back(p.c);
    return r;
  }
  std::vector<double> centers() const {
    std::vector<double> r;
    for (const auto& p : params) r.push_back(p.a);
    return r;
  }
  std::vector<int> signs() const {
    std::vector<int> r;
    for (const auto& p : params) r.push_back(p.s);
    return r;
  }
};

struct SpeedGaps {
  double mu_c = 0.0;
  double nu_c = 0.0;
  double delta_c = 0.0;
  double lambda_c_gamma = 0.0;
};

/// gammas: N+1 limiting speeds of the between-soliton paths, interlacing
/// c_{j-1} < gamma_j < c_j with c_0 = -1, c_{N+1} = 1. When empty, the
/// midpoints of consecutive speeds are used.
inline SpeedGaps speed_gaps(std::span<const double> c, std::span<const double> gammas = {}) {
  require(!c.empty(), Errc::invalid_argument, "speed list is empty");
  const std::size_t N = c.size();
  SpeedGaps g;
  g.mu_c = std::numeric_limits<double>::infinity();
  g.nu_c = std::numeric_limits<double>::infinity();
  for (double cj : c) {
    g.mu_c = std::min(g.mu_c, std::abs(cj));
    g.nu_c = std::min(g.nu_c, soliton_nu(cj));
  }
  double d = std::min(1.0 + c[0], 1.0 - c[N - 1]);
  for (std::size_t j = 1; j < N; ++j) d = std::min(d, c[j] - c[j - 1]);
  g.delta_c = 0.5 * d;

  std::vector<double> gam(gammas.begin(), gammas.end());
  if (gam.empty()) {
    gam.push_back(0.5 * (-1.0 + c[0]));
    for (std::size_t j = 1; j < N; ++j) gam.push_back(0.5 * (c[j - 1] + c[j]));
    gam.push_back(0.5 * (c[N - 1] + 1.0));
  }
  require(gam.size() == N + 1, Errc::invalid_argument, "need N+1 between-soliton speeds");
  double l = std::min(1.0 + gam[0], 1.0 - gam[N]);
  for (std::size_t j = 1; j <= N; ++j) l = std::min(l, gam[j] - c[j - 1]);
  for (std::size_t j = 1; j < N; ++j) l = std::min(l, c[j] - gam[j]);
  g.lambda_c_gamma = 0.5 * l;
  return g;
}

inline SpeedGaps speed_gaps(const MultiSolitonConfig& cfg, std::span<const double> gammas = {}) {
  const auto c = cfg.speeds();
  return speed_gaps(std::span<const double>(c), gammas);
}

/// Samples of sum_j s_j Q_{c_j}(x - a_j) without any validity checks.
inline HydroState soliton_sum_unchecked(std::span<const double> c, std::span<const double> a,
                                        std::span<const int> s, const Grid& g) {
  HydroState out(g);
  for (std::size_t k = 0; k < c.size(); ++k) {
    for (std::size_t j = 0; j < g.n; ++j) {
      const auto q = soliton_hydro(c[k], g.x(j) - a[k]);
      out.v[j] += s[k] * q.v;
      out.w[j] += s[k] * q.w;
    }
  }
  return out;
}

inline HydroState multi_soliton_sum(const MultiSolitonConfig& cfg, const Grid& g) {
  cfg.validate();
  const auto c = cfg.speeds();
  const auto a = cfg.centers();
  const auto s = cfg.signs();
  HydroState out = soliton_sum_unchecked(c, a, s, g);
  if (!(out.max_abs_v() < 1.0))
    throw Error(Errc::invalid_argument, "superposed |V| reaches 1: solitons too close");
  return out;
}

/// Spin field with m3 = v and m1 + i m2 = (1 - v^2)^{1/2} exp(i(theta0 + Theta)),
/// Theta(x) = integral of w from 0 to x. The result carries twist = integral of w.
inline SpinState reconstruct_spin(const HydroState& s, double theta0) {
  require(s.max_abs_v() < 1.0, Errc::invalid_argument, "reconstruct_spin requires max|v| < 1");
  const Grid& g = s.grid;
  const double P = g.period();
  const double total = integrate(g, s.w);
  const double mean = total / P;
  const Field G = spectral::antiderivative(s.w, P);
  const double G0 = spectral::interpolate(G, g.x_min, P, 0.0);
  std::vector<Vec3> m(g.n);
  for (std::size_t j = 0; j < g.n; ++j) {
    const double theta = theta0 + mean * g.x(j) + G[j] - G0;
    const double r = std::sqrt(1.0 - s.v[j] * s.v[j]);
    m[j] = {r * std::cos(theta), r * std::sin(theta), s.v[j]};
  }
  return SpinState(g, std::move(m), total);
}

/// v = m3, w = Im(conj(m) m_x) / |m|^2 with m = m1 + i m2.
inline HydroState extract_hydro(const SpinState& m, double eps_vac = 1e-6) {
  const Grid& g = m.grid;
  const auto z = m.planar();
  for (std::size_t j = 0; j < g.n; ++j) {
    if (!(1.0 - m.m[j][2] * m.m[j][2] >= eps_vac) || !(std::norm(z[j]) >= eps_vac))
      throw Error(Errc::vacuum_breakdown, "in-plane magnetization vanishes near x = " +
                                              std::to_string(g.x(j)));
  }
  const auto zx = spectral::derivative(std::span<const std::complex<double>>(z), g.period(), 1,
                                       m.twist_rate());
  HydroState out(g);
  for (std::size_t j = 0; j < g.n; ++j) {
    out.v[j] = m.m[j][2];
    out.w[j] = (std::conj(z[j]) * zx[j]).imag() / std::norm(z[j]);
  }
  return out;
}

/// Spin profile u_c sampled on a grid, with its phase winding recorded.
inline SpinState soliton_spin_field(double c, double a, const Grid& g) {
  std::vector<Vec3> m(g.n);
  for (std::size_t j = 0; j < g.n; ++j) m[j] = soliton_spin(c, g.x(j) - a);
  // Phase of u_c goes from -pi/2 to pi/2 through 0 (c > 0) or through pi (c < 0).
  return SpinState(g, std::move(m), c > 0 ? std::numbers::pi : -std::numbers::pi);
}

}  // namespace lllab
