#pragma once

// Hessian of E - cP at a soliton, its negative mode, and the Newton solve for
// modulated speeds and centers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lllab/error.hpp"
#include "lllab/grid.hpp"
#include "lllab/lobpcg.hpp"
#include "lllab/solitons.hpp"
#include "lllab/spectral.hpp"

namespace lllab {

struct EPGradients {
  FieldPair gradE;
  FieldPair gradP;
};

/// L2 gradients of the energy and momentum.
inline EPGradients grad_EP(const HydroState& s) {
  check_nv(s);
  const Grid& g = s.grid;
  const Field vx = derivative(g, s.v, 1);
  Field flux(g.n);
  for (std::size_t j = 0; j < g.n; ++j) flux[j] = vx[j] / (1.0 - s.v[j] * s.v[j]);
  const Field dflux = derivative(g, flux, 1);
  EPGradients out{FieldPair(g), FieldPair(g, s.w, s.v)};
  for (std::size_t j = 0; j < g.n; ++j) {
    const double v = s.v[j], w = s.w[j], q = 1.0 - v * v;
    out.gradE.v[j] = -dflux[j] + v * vx[j] * vx[j] / (q * q) - v * w * w + v;
    out.gradE.w[j] = q * w;
  }
  return out;
}

/// Q_c sampled with its center at position a.
inline HydroState sampled_soliton(double c, double a, const Grid& g) {
  const double cv[] = {c}, av[] = {a};
  const int sv[] = {1};
  return soliton_sum_unchecked(cv, av, sv, g);
}

/// d/dx Q_c sampled with its center at position a.
inline FieldPair sampled_soliton_dx(double c, double a, const Grid& g) {
  FieldPair d(g);
  for (std::size_t j = 0; j < g.n; ++j) {
    const auto p = soliton_hydro_dx(c, g.x(j) - a);
    d.v[j] = p.v;
    d.w[j] = p.w;
  }
  return d;
}

/// h -> (E'' - c P'')(Q_c) h with Q_c centered at the grid midpoint.
class HessianOperator {
 public:
  HessianOperator(double c, const Grid& g)
      : c_(c), grid_(g), q_(sampled_soliton(c, g.midpoint(), g)), q_norm_(l2_norm(q_)) {
    check_speed(c);
    qx_ = derivative(g, q_.v, 1);
  }

  double speed() const { return c_; }
  const Grid& grid() const { return grid_; }
  const HydroState& profile() const { return q_; }

  FieldPair apply(const FieldPair& h) const {
    require(h.grid == grid_, Errc::invalid_argument, "Hessian applied to a field on another grid");
    const double hn = l2_norm(h);
    if (hn == 0.0) return FieldPair(grid_);
    const double delta = 1e-5 * q_norm_ / hn;
    FieldPair out = grad_EP(q_ + delta * h).gradE;
    out -= grad_EP(q_ - delta * h).gradE;
    out *= 1.0 / (2.0 * delta);
    for (std::size_t j = 0; j < grid_.n; ++j) {
      out.v[j] -= c_ * h.w[j];
      out.w[j] -= c_ * h.v[j];
    }
    return out;
  }

  /// Same map from the closed-form second variation of the discrete energy;
  /// linear and symmetric to rounding.
  FieldPair apply_exact(const FieldPair& h) const {
    require(h.grid == grid_, Errc::invalid_argument, "Hessian applied to a field on another grid");
    const std::size_t n = grid_.n;
    const Field hx = derivative(grid_, h.v, 1);
    Field flux(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double v = q_.v[j], vx = qx_[j], q = 1.0 - v * v;
      flux[j] = hx[j] / q + 2.0 * v * vx * h.v[j] / (q * q);
    }
    const Field dflux = derivative(grid_, flux, 1);
    FieldPair out(grid_);
    for (std::size_t j = 0; j < n; ++j) {
      const double v = q_.v[j], vx = qx_[j], w = q_.w[j], q = 1.0 - v * v;
      const double a = h.v[j], b = h.w[j];
      out.v[j] = -dflux[j] + a * vx * vx / (q * q) + 2.0 * v * vx * hx[j] / (q * q) +
                 4.0 * v * v * vx * vx * a / (q * q * q) - a * w * w - 2.0 * v * w * b + a - c_ * b;
      out.w[j] = -2.0 * v * w * a + q * b - c_ * a;
    }
    return out;
  }

 private:
  double c_;
  Grid grid_;
  HydroState q_;
  double q_norm_;
  Field qx_;
};

inline FieldPair hessian_apply(const HessianOperator& H, const FieldPair& h) { return H.apply(h); }

struct NegativeMode {
  double c = 0.0;
  FieldPair chi;            // unit L2 norm, centered at the grid midpoint
  double rayleigh = 0.0;
  int negative_count = 0;   // Ritz values below -count_tol in the lowest block
  std::vector<double> lowest;  // lowest Ritz values found
  int iterations = 0;
};

namespace detail {

inline Eigen::VectorXd pack(const FieldPair& f) {
  const auto n = static_cast<Eigen::Index>(f.v.size());
  Eigen::VectorXd x(2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x[j] = f.v[static_cast<std::size_t>(j)];
    x[n + j] = f.w[static_cast<std::size_t>(j)];
  }
  return x;
}

inline FieldPair unpack(const Eigen::VectorXd& x, const Grid& g) {
  FieldPair f(g);
  const auto n = static_cast<Eigen::Index>(g.n);
  for (Eigen::Index j = 0; j < n; ++j) {
    f.v[static_cast<std::size_t>(j)] = x[j];
    f.w[static_cast<std::size_t>(j)] = x[n + j];
  }
  return f;
}

/// Inverse of the constant-coefficient operator [[k^2 + 1 + s, -c], [-c, 1 + s]].
inline FieldPair far_field_inverse(const FieldPair& r, double c, double shift) {
  const Grid& g = r.grid;
  auto& ws = spectral::detail::workspace(g.n);
  auto V = ws.forward(r.v);
  auto W = ws.forward(r.w);
  for (std::size_t j = 0; j < V.size(); ++j) {
    const double k = spectral::wavenumber(j, g.n, g.period());
    const double a = k * k + 1.0 + shift, d = 1.0 + shift;
    const double det = a * d - c * c;
    const std::complex<double> v = V[j], w = W[j];
    V[j] = (d * v + c * w) / det;
    W[j] = (c * v + a * w) / det;
  }
  return FieldPair(g, ws.inverse(V), ws.inverse(W));
}

}  // namespace detail

struct NegativeModeOptions {
  int block = 4;
  double count_tol = 1e-6;
  LobpcgOptions solver{};
  bool require_single = true;
};

/// Lowest eigenpair of the discretized Hessian at speed c and the number of
/// eigenvalues below -count_tol.
inline NegativeMode negative_mode(double c, const Grid& g, const NegativeModeOptions& opt = {}) {
  check_speed(c);
  const HessianOperator H(c, g);
  const LinearMap A = [&](const Eigen::VectorXd& x) {
    return detail::pack(H.apply_exact(detail::unpack(x, g)));
  };
  const LinearMap T = [&](const Eigen::VectorXd& x) {
    return detail::pack(detail::far_field_inverse(detail::unpack(x, g), c, 0.5));
  };

  const HydroState& q = H.profile();
  const double mid = g.midpoint();
  Eigen::MatrixXd X(2 * static_cast<Eigen::Index>(g.n), opt.block);
  std::vector<FieldPair> seeds{FieldPair(g, q.v, Field(g.n, 0.0)), FieldPair(g, Field(g.n, 0.0), q.w),
                               sampled_soliton_dx(c, mid, g)};
  for (int i = 3; i < opt.block; ++i) {
    FieldPair f(g);
    for (std::size_t j = 0; j < g.n; ++j) {
      const double y = g.x(j) - mid;
      f.v[j] = std::cos(0.37 * i * y) * std::exp(-y * y / (50.0 * i));
      f.w[j] = std::sin(0.23 * i * y) * std::exp(-y * y / (80.0 * i));
    }
    seeds.push_back(f);
  }
  for (int i = 0; i < opt.block; ++i) X.col(i) = detail::pack(seeds[static_cast<std::size_t>(i)]);

  const LobpcgResult r = lobpcg(A, T, X, opt.solver);
  NegativeMode out;
  out.c = c;
  out.iterations = r.iterations;
  for (Eigen::Index i = 0; i < r.values.size(); ++i) {
    out.lowest.push_back(r.values[i]);
    if (r.values[i] < -opt.count_tol) ++out.negative_count;
  }
  out.rayleigh = r.values[0];
  FieldPair chi = detail::unpack(r.vectors.col(0), g);
  chi *= 1.0 / l2_norm(chi);
  if (inner(g, chi.v, q.v) < 0) chi *= -1.0;
  out.chi = std::move(chi);

  if (opt.require_single) {
    require(r.values[r.values.size() - 1] > -opt.count_tol, Errc::spectral_count,
            "whole eigensolver block is negative; count unreliable");
    require(out.negative_count == 1, Errc::spectral_count,
            "discretized Hessian at c = " + std::to_string(c) + " has " +
                std::to_string(out.negative_count) + " eigenvalues below -" +
                std::to_string(opt.count_tol));
  }
  return out;
}

/// Negative modes per soliton, recomputed only when the speed drifts more
/// than `tolerance` from the speed the cached mode was computed at.
class ChiCache {
 public:
  explicit ChiCache(double tolerance = 0.005, NegativeModeOptions opt = {})
      : tol_(tolerance), opt_(std::move(opt)) {}

  const NegativeMode& get(std::size_t k, double c, const Grid& g) {
    auto it = modes_.find(k);
    if (it == modes_.end() || !(it->second.chi.grid == g) || std::abs(it->second.c - c) > tol_) {
      ++solves_;
      it = modes_.insert_or_assign(k, negative_mode(c, g, opt_)).first;
    }
    return it->second;
  }

  int solves() const { return solves_; }

 private:
  double tol_;
  NegativeModeOptions opt_;
  std::map<std::size_t, NegativeMode> modes_;
  int solves_ = 0;
};

struct ModulationOptions {
  int max_iterations = 25;
  double tol = 1e-10;      // max |F| <= tol (1 + x_norm(s))
  double fd_step = 1e-6;
  double speed_margin = 1e-3;
  double max_speed_step = 0.05;
  double max_center_step = 2.0;
  int max_halvings = 8;
};

struct ModulationResult {
  std::vector<double> c;
  std::vector<double> a;
  std::vector<int> s;
  HydroState epsilon;
  double residual_norm = 0.0;  // x_norm(epsilon)
  double orthogonality = 0.0;  // max |F| at the returned parameters
  int newton_iters = 0;

  MultiSolitonConfig config(double min_separation = 0.0) const {
    MultiSolitonConfig cfg{{}, min_separation};
    for (std::size_t k = 0; k < c.size(); ++k) cfg.params.push_back({c[k], a[k], s[k]});
    return cfg;
  }
};

namespace detail {

struct ModulationProblem {
  const HydroState& state;
  std::vector<int> s;
  std::vector<FieldPair> chi;  // centered at the grid midpoint

  HydroState residual_field(const Eigen::VectorXd& p) const {
    const std::size_t N = s.size();
    std::vector<double> c(N), a(N);
    for (std::size_t k = 0; k < N; ++k) {
      c[k] = p[static_cast<Eigen::Index>(k)];
      a[k] = p[static_cast<Eigen::Index>(N + k)];
    }
    return state - soliton_sum_unchecked(c, a, s, state.grid);
  }

  Eigen::VectorXd conditions(const Eigen::VectorXd& p, const HydroState& eps) const {
    const std::size_t N = s.size();
    const Grid& g = state.grid;
    const double P = g.period();
    Eigen::VectorXd F(2 * N);
    for (std::size_t k = 0; k < N; ++k) {
      const double c = p[static_cast<Eigen::Index>(k)], a = p[static_cast<Eigen::Index>(N + k)];
      const FieldPair dq = sampled_soliton_dx(c, a, g);
      const double shift = a - g.midpoint();
      const FieldPair mode(g, spectral::translate(chi[k].v, P, shift),
                           spectral::translate(chi[k].w, P, shift));
      F[static_cast<Eigen::Index>(2 * k)] = s[k] * inner(eps, dq);
      F[static_cast<Eigen::Index>(2 * k + 1)] = s[k] * inner(eps, mode);
    }
    return F;
  }

  Eigen::VectorXd conditions(const Eigen::VectorXd& p) const { return conditions(p, residual_field(p)); }
};

}  // namespace detail

/// Newton solve of the orthogonality conditions
/// <eps, dQ_{c_k}(. - a_k)> = <eps, chi_{c_k}(. - a_k)> = 0, eps = s - S_{c,a,s}.
inline ModulationResult modulate(const HydroState& s, const MultiSolitonConfig& guess, ChiCache& cache,
                                 const ModulationOptions& opt = {}) {
  require(!guess.params.empty(), Errc::invalid_argument, "modulation guess is empty");
  const std::size_t N = guess.size();
  const Grid& g = s.grid;
  detail::ModulationProblem prob{s, guess.signs(), {}};
  Eigen::VectorXd p(2 * N);
  for (std::size_t k = 0; k < N; ++k) {
    p[static_cast<Eigen::Index>(k)] = guess.params[k].c;
    p[static_cast<Eigen::Index>(N + k)] = guess.params[k].a;
  }
  auto check_speeds = [&](const Eigen::VectorXd& q) {
    for (std::size_t k = 0; k < N; ++k) {
      const double c = q[static_cast<Eigen::Index>(k)];
      if (!(std::abs(c) < 1.0 - opt.speed_margin) || !(std::abs(c) > opt.speed_margin))
        throw Error(Errc::speed_out_of_range, "modulated speed " + std::to_string(c) + " of soliton " +
                                                  std::to_string(k + 1) + " left the admissible range");
      if (k > 0 && !(c > q[static_cast<Eigen::Index>(k - 1)]))
        throw Error(Errc::ordering_lost, "modulated speeds of solitons " + std::to_string(k) + " and " +
                                             std::to_string(k + 1) + " crossed");
    }
  };
  check_speeds(p);
  for (std::size_t k = 0; k < N; ++k) prob.chi.push_back(cache.get(k, guess.params[k].c, g).chi);

  const double tol = opt.tol * (1.0 + x_norm(s));
  HydroState eps = prob.residual_field(p);
  Eigen::VectorXd F = prob.conditions(p, eps);
  int iter = 0;
  while (F.cwiseAbs().maxCoeff() > tol) {
    if (iter == opt.max_iterations)
      throw Error(Errc::no_convergence, "modulation Newton solve did not converge in " +
                                            std::to_string(iter) + " iterations (max |F| = " +
                                            std::to_string(F.cwiseAbs().maxCoeff()) + ")");
    Eigen::MatrixXd J(2 * N, 2 * N);
    for (Eigen::Index i = 0; i < J.cols(); ++i) {
      Eigen::VectorXd q = p;
      q[i] += opt.fd_step;
      J.col(i) = (prob.conditions(q) - F) / opt.fd_step;
    }
    Eigen::VectorXd step = J.fullPivLu().solve(-F);
    require(step.allFinite(), Errc::no_convergence, "singular modulation Jacobian");
    double scale = 1.0;
    for (std::size_t k = 0; k < N; ++k) {
      scale = std::min(scale, opt.max_speed_step / std::max(opt.max_speed_step, std::abs(step[static_cast<Eigen::Index>(k)])));
      scale = std::min(scale, opt.max_center_step / std::max(opt.max_center_step, std::abs(step[static_cast<Eigen::Index>(N + k)])));
    }
    // Backtrack until |F| decreases.
    Eigen::VectorXd trial;
    HydroState trial_eps;
    Eigen::VectorXd trial_F;
    for (int halvings = 0;; ++halvings) {
      trial = p + scale * step;
      check_speeds(trial);
      trial_eps = prob.residual_field(trial);
      trial_F = prob.conditions(trial, trial_eps);
      if (trial_F.norm() < F.norm() || halvings == opt.max_halvings) break;
      scale *= 0.5;
    }
    p = trial;
    eps = std::move(trial_eps);
    F = trial_F;
    ++iter;
  }

  ModulationResult out;
  for (std::size_t k = 0; k < N; ++k) {
    out.c.push_back(p[static_cast<Eigen::Index>(k)]);
    out.a.push_back(p[static_cast<Eigen::Index>(N + k)]);
  }
  out.s = prob.s;
  out.residual_norm = x_norm(eps);
  out.orthogonality = F.cwiseAbs().maxCoeff();
  out.epsilon = std::move(eps);
  out.newton_iters = iter;
  return out;
}

inline ModulationResult modulate(const HydroState& s, const MultiSolitonConfig& guess,
                                 const ModulationOptions& opt = {}) {
  ChiCache cache;
  return modulate(s, guess, cache, opt);
}

struct ModulationTrack {
  std::vector<double> times;
  std::vector<std::vector<double>> c;  // c[i][k]: speed of soliton k at sample i
  std::vector<std::vector<double>> a;
  std::vector<double> eps_xnorm;
  std::vector<int> iters;
  std::vector<std::vector<double>> a_dot;  // finite-difference estimates
  std::vector<std::vector<double>> c_dot;
  std::optional<Error> failure;
  double failure_time = 0.0;

  std::size_t size() const { return times.size(); }
  bool complete() const { return !failure.has_value(); }
  /// max_k (|c_k'| + |a_k' - c_k|) / ||eps||_X at sample i.
  double rate_ratio(std::size_t i) const {
    double r = 0.0;
    for (std::size_t k = 0; k < c[i].size(); ++k)
      r = std::max(r, std::abs(c_dot[i][k]) + std::abs(a_dot[i][k] - c[i][k]));
    return eps_xnorm[i] > 0 ? r / eps_xnorm[i] : (r == 0 ? 0.0 : INFINITY);
  }
};

/// Fills a_dot and c_dot by centered differences (one-sided at the ends).
inline void differentiate_track(ModulationTrack& tr) {
  const std::size_t M = tr.size();
  tr.a_dot.assign(M, {});
  tr.c_dot.assign(M, {});
  if (M < 2) {
    for (std::size_t i = 0; i < M; ++i) {
      tr.a_dot[i] = tr.c[i];
      tr.c_dot[i].assign(tr.c[i].size(), 0.0);
    }
    return;
  }
  for (std::size_t i = 0; i < M; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == M ? i : i + 1;
    const double dt = tr.times[hi] - tr.times[lo];
    for (std::size_t k = 0; k < tr.c[i].size(); ++k) {
      tr.a_dot[i].push_back((tr.a[hi][k] - tr.a[lo][k]) / dt);
      tr.c_dot[i].push_back((tr.c[hi][k] - tr.c[lo][k]) / dt);
    }
  }
}

/// Modulates every snapshot, warm-starting each solve from the previous one
/// advanced by its speeds.
inline ModulationTrack track_modulation(const std::vector<double>& times, const std::vector<HydroState>& states,
                                        const MultiSolitonConfig& initial_guess, ChiCache& cache,
                                        const ModulationOptions& opt = {}) {
  require(times.size() == states.size(), Errc::invalid_argument, "times and states differ in length");
  ModulationTrack tr;
  MultiSolitonConfig guess = initial_guess;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i > 0) {
      const double dt = times[i] - times[i - 1];
      for (auto& p : guess.params) p.a += p.c * dt;
    }
    try {
      const ModulationResult r = modulate(states[i], guess, cache, opt);
      tr.times.push_back(times[i]);
      tr.c.push_back(r.c);
      tr.a.push_back(r.a);
      tr.eps_xnorm.push_back(r.residual_norm);
      tr.iters.push_back(r.newton_iters);
      for (std::size_t k = 0; k < guess.size(); ++k) {
        guess.params[k].c = r.c[k];
        guess.params[k].a = r.a[k];
      }
    } catch (const Error& e) {
      tr.failure = e.with_context("at t = " + std::to_string(times[i]));
      tr.failure_time = times[i];
      break;
    }
  }
  differentiate_track(tr);
  return tr;
}

}  // namespace lllab
