#pragma once

// Classical RK4 time stepping of either frame on top of the spectral
// right-hand sides, plus trajectory containers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "lllab/error.hpp"
#include "lllab/grid.hpp"
#include "lllab/operators.hpp"
#include "lllab/spectral.hpp"

namespace lllab {

enum class Scheme { rk4 };

struct IntegratorConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  Scheme scheme = Scheme::rk4;
  bool renormalize_spin = true;
  std::size_t sample_stride = 100;
  double cfl_factor = 0.2;
  bool dealias = false;

  /// Integer number of steps covering [0, t_end].
  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround(t_end / dt));
  }

  void validate(const Grid& g) const {
    require(dt > 0.0 && std::isfinite(dt), Errc::invalid_argument, "dt must be positive");
    require(t_end >= 0.0, Errc::invalid_argument, "t_end must be non-negative");
    require(sample_stride >= 1, Errc::invalid_argument, "sample_stride must be >= 1");
    require(dt <= cfl_factor * g.dx * g.dx * (1.0 + 1e-12), Errc::invalid_argument,
            "dt = " + std::to_string(dt) + " exceeds cfl_factor*dx^2 = " +
                std::to_string(cfl_factor * g.dx * g.dx));
    const double ratio = t_end / dt;
    require(std::abs(ratio - std::round(ratio)) <= 1e-6 * std::max(1.0, ratio),
            Errc::invalid_argument, "t_end must be an integer multiple of dt");
  }
};

struct StepOptions {
  bool renormalize_spin = true;
  bool dealias = false;
};

namespace detail {

inline void check_finite(const HydroState& s) {
  if (!s.finite()) throw Error(Errc::blowup, "non-finite value in hydrodynamical state");
}
inline void check_finite(const SpinState& s) {
  if (!s.finite()) throw Error(Errc::blowup, "non-finite value in spin state");
}

inline void add_scaled(SpinState& m, double s, const std::vector<Vec3>& d) {
  for (std::size_t j = 0; j < m.m.size(); ++j)
    for (std::size_t i = 0; i < 3; ++i) m.m[j][i] += s * d[j][i];
}

}  // namespace detail

inline HydroState step_rk4(const HydroState& s, double dt, const StepOptions& opt = {}) {
  const FieldPair k1 = rhs_hll(s);
  HydroState y = s;
  y.axpy(0.5 * dt, k1);
  detail::check_finite(y);
  const FieldPair k2 = rhs_hll(y);
  y = s;
  y.axpy(0.5 * dt, k2);
  detail::check_finite(y);
  const FieldPair k3 = rhs_hll(y);
  y = s;
  y.axpy(dt, k3);
  detail::check_finite(y);
  const FieldPair k4 = rhs_hll(y);
  HydroState out = s;
  out.axpy(dt / 6.0, k1);
  out.axpy(dt / 3.0, k2);
  out.axpy(dt / 3.0, k3);
  out.axpy(dt / 6.0, k4);
  if (opt.dealias) {
    out.v = spectral::dealias(out.v);
    out.w = spectral::dealias(out.w);
  }
  detail::check_finite(out);
  return out;
}

inline SpinState step_rk4(const SpinState& m, double dt, const StepOptions& opt = {}) {
  const auto k1 = rhs_spin(m);
  SpinState y = m;
  detail::add_scaled(y, 0.5 * dt, k1);
  detail::check_finite(y);
  const auto k2 = rhs_spin(y);
  y = m;
  detail::add_scaled(y, 0.5 * dt, k2);
  detail::check_finite(y);
  const auto k3 = rhs_spin(y);
  y = m;
  detail::add_scaled(y, dt, k3);
  detail::check_finite(y);
  const auto k4 = rhs_spin(y);
  SpinState out = m;
  detail::add_scaled(out, dt / 6.0, k1);
  detail::add_scaled(out, dt / 3.0, k2);
  detail::add_scaled(out, dt / 3.0, k3);
  detail::add_scaled(out, dt / 6.0, k4);
  if (opt.dealias) {
    const auto planar = out.planar();
    const auto p = spectral::dealias(std::span<const std::complex<double>>(planar),
                                     out.twist_rate() * out.grid.dx);
    const Field m3 = spectral::dealias(out.component(2));
    for (std::size_t j = 0; j < out.m.size(); ++j) out.m[j] = {p[j].real(), p[j].imag(), m3[j]};
  }
  detail::check_finite(out);
  if (opt.renormalize_spin) out.normalize();
  return out;
}

template <class State>
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  /// Set when integration stopped early; the last stored snapshot is the
  /// last valid state.
  std::optional<Error> failure;
  double failure_time = 0.0;

  std::size_t size() const { return times.size(); }
  bool complete() const { return !failure.has_value(); }
};

template <class State>
using Diagnostic = std::function<void(double, const State&)>;

/// Integrates to cfg.t_end, storing (and passing to every diagnostic) the
/// state at t = 0 and every sample_stride steps, plus the final state.
template <class State>
Trajectory<State> evolve(const State& initial, const IntegratorConfig& cfg,
                         const std::vector<Diagnostic<State>>& diagnostics = {},
                         bool store_states = true) {
  cfg.validate(initial.grid);
  const StepOptions opt{cfg.renormalize_spin, cfg.dealias};
  Trajectory<State> traj;
  auto record = [&](double t, const State& s) {
    traj.times.push_back(t);
    if (store_states) traj.states.push_back(s);
    for (const auto& d : diagnostics) d(t, s);
  };
  State s = initial;
  record(0.0, s);
  const std::size_t steps = cfg.steps();
  for (std::size_t i = 1; i <= steps; ++i) {
    try {
      s = step_rk4(s, cfg.dt, opt);
    } catch (const Error& e) {
      traj.failure = e;
      traj.failure_time = static_cast<double>(i) * cfg.dt;
      if (traj.times.empty() || traj.times.back() != static_cast<double>(i - 1) * cfg.dt) {
        traj.times.push_back(static_cast<double>(i - 1) * cfg.dt);
        if (store_states) traj.states.push_back(s);
      }
      return traj;
    }
    if (i % cfg.sample_stride == 0 || i == steps) record(static_cast<double>(i) * cfg.dt, s);
  }
  return traj;
}

}  // namespace lllab
