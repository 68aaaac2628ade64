#pragma once

// Conserved quantities, the tanh weight and localized momenta, and the
// virial functional with its linear identity.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lllab/error.hpp"
#include "lllab/grid.hpp"
#include "lllab/operators.hpp"

namespace lllab {

inline double energy_hydro(const HydroState& s) {
  check_nv(s);
  const Field vx = derivative(s.grid, s.v, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j) {
    const double q = 1.0 - s.v[j] * s.v[j];
    acc += vx[j] * vx[j] / q + q * s.w[j] * s.w[j] + s.v[j] * s.v[j];
  }
  return 0.5 * acc * s.grid.dx;
}

inline double energy_spin(const SpinState& m) {
  const auto mx = derivative(m, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < m.m.size(); ++j) acc += dot(mx[j], mx[j]) + m.m[j][2] * m.m[j][2];
  return 0.5 * acc * m.grid.dx;
}

inline double momentum(const HydroState& s) { return inner(s.grid, s.v, s.w); }

// Weight Phi(x) = (1 + tanh(nu x / 16)) / 2 and its derivatives.

inline double phi_bump(double x, double nu) {
  require(nu > 0.0, Errc::invalid_argument, "weight rate nu must be positive");
  return 0.5 * (1.0 + std::tanh(nu * x / 16.0));
}

inline double phi_bump_d1(double x, double nu) {
  const double a = nu / 16.0;
  const double s = 1.0 / std::cosh(a * x);
  return 0.5 * a * s * s;
}

inline double phi_bump_d3(double x, double nu) {
  const double a = nu / 16.0;
  const double t = std::tanh(a * x);
  const double s2 = 1.0 - t * t;
  return 0.5 * a * a * a * (4.0 * s2 * t * t - 2.0 * s2 * s2);
}

struct LocalizedMomentumSpec {
  std::function<double(double)> center_path;
  double y0 = 0.0;
  double nu = 1.0;

  void validate() const {
    require(static_cast<bool>(center_path), Errc::invalid_argument, "center path is empty");
    require(nu > 0.0 && nu <= 1.0, Errc::invalid_argument, "weight rate nu must lie in (0, 1]");
  }
};

/// integral of Phi(x - (center(t) + y0)) v w.
inline double localized_momentum(const HydroState& s, const LocalizedMomentumSpec& spec, double t) {
  spec.validate();
  const double shift = spec.center_path(t) + spec.y0;
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j)
    acc += phi_bump(s.grid.x(j) - shift, spec.nu) * s.v[j] * s.w[j];
  return acc * s.grid.dx;
}

/// Time derivative of the localized momentum when the weight center moves at
/// center_speed:
///   1/2 int Phi' (v^2 + w^2 - 2 speed v w - 3 v^2 w^2 + (3 - v^2)/(1 - v^2)^2 v_x^2)
/// + 1/2 int Phi''' ln(1 - v^2).
inline double localized_momentum_rate(const HydroState& s, const LocalizedMomentumSpec& spec,
                                      double t, double center_speed) {
  spec.validate();
  check_nv(s);
  const double shift = spec.center_path(t) + spec.y0;
  const Field vx = derivative(s.grid, s.v, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j) {
    const double y = s.grid.x(j) - shift;
    const double v = s.v[j], w = s.w[j];
    const double q = 1.0 - v * v;
    const double bracket = v * v + w * w - 2.0 * center_speed * v * w - 3.0 * v * v * w * w +
                           (3.0 - v * v) / (q * q) * vx[j] * vx[j];
    acc += phi_bump_d1(y, spec.nu) * bracket + phi_bump_d3(y, spec.nu) * std::log(q);
  }
  return 0.5 * acc * s.grid.dx;
}

/// The weighted quadratic quantity appearing in the monotonicity lower bound:
/// int Phi' ((v_x)^2 + v^2 + w^2).
inline double localized_quadratic(const HydroState& s, const LocalizedMomentumSpec& spec, double t) {
  spec.validate();
  const double shift = spec.center_path(t) + spec.y0;
  const Field vx = derivative(s.grid, s.v, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j)
    acc += phi_bump_d1(s.grid.x(j) - shift, spec.nu) *
           (vx[j] * vx[j] + s.v[j] * s.v[j] + s.w[j] * s.w[j]);
  return acc * s.grid.dx;
}

// Virial functional. The multiplier mu(x) = x is not periodic, so the
// coordinate is measured from the domain midpoint and the state is required
// to be negligible near the seam.

/// Seam-centered coordinate of every sample.
inline Field seam_coordinate(const Grid& g) {
  Field xt(g.n);
  const double mid = g.midpoint();
  for (std::size_t j = 0; j < g.n; ++j) xt[j] = g.x(j) - mid;
  return xt;
}

/// Width (on each side of the seam) of the strip used by the support check.
inline constexpr double kSeamStrip = 5.0;
inline constexpr double kSeamTolerance = 1e-8;

/// True when the state's X-norm within kSeamStrip of the seam is <= 1e-8.
inline bool seam_support_ok(const HydroState& s) {
  const double seam = s.grid.x_min;
  const double hw = std::min(kSeamStrip, 0.25 * s.grid.period());
  return window_norm(s, seam, hw) <= kSeamTolerance;
}

struct VirialWarning {
  bool seam_ok = true;
};

inline double virial_U(const HydroState& s, VirialWarning* warn = nullptr) {
  if (warn) warn->seam_ok = seam_support_ok(s);
  const Field xt = seam_coordinate(s.grid);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j) acc += xt[j] * s.v[j] * s.w[j];
  return acc * s.grid.dx;
}

struct IdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// -<L u, u> - <L u, mu u_x>  versus  int 3/2 v_x^2 + 1/2 v^2 + 1/2 w^2.
inline IdentitySides virial_linear_identity(const HydroState& s, VirialWarning* warn = nullptr) {
  if (warn) warn->seam_ok = seam_support_ok(s);
  const Grid& g = s.grid;
  const Field xt = seam_coordinate(g);
  const FieldPair Lu = apply_L(s);
  FieldPair mu_ux(g, derivative(g, s.v, 1), derivative(g, s.w, 1));
  for (std::size_t j = 0; j < g.n; ++j) {
    mu_ux.v[j] *= xt[j];
    mu_ux.w[j] *= xt[j];
  }
  IdentitySides out;
  out.lhs = -inner(Lu, s) - inner(Lu, mu_ux);

  const Field dv = derivative(g, s.v, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < g.n; ++j)
    acc += 1.5 * dv[j] * dv[j] + 0.5 * s.v[j] * s.v[j] + 0.5 * s.w[j] * s.w[j];
  out.rhs = acc * g.dx;
  return out;
}

/// U' = -<L u, u> - <L u, mu u_x> + <mu d/dx (B u), u>.
inline double virial_rate(const HydroState& s, VirialWarning* warn = nullptr) {
  check_nv(s);
  const IdentitySides lin = virial_linear_identity(s, warn);
  const Grid& g = s.grid;
  const Field xt = seam_coordinate(g);
  const FieldPair Bu = apply_B(s);
  const Field dB1 = derivative(g, Bu.v, 1);
  const Field dB2 = derivative(g, Bu.w, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < g.n; ++j) acc += xt[j] * (dB1[j] * s.v[j] + dB2[j] * s.w[j]);
  return lin.lhs + acc * g.dx;
}

/// One row of the diagnostics time series.
struct DiagnosticsSample {
  double t = 0.0;
  double E = 0.0;
  double P = 0.0;
  double U = 0.0;
  std::map<std::string, double> I;             // column name -> localized momentum
  std::map<std::string, double> window_norms;  // column name -> window X-norm
};

}  // namespace lllab
