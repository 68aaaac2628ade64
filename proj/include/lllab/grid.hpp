#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lllab/error.hpp"
#include "lllab/spectral.hpp"

namespace lllab {

/// Uniform periodic lattice: sample j sits at x_min + j*dx, j = 0..n-1.
struct Grid {
  double x_min = 0.0;
  double dx = 1.0;
  std::size_t n = 1;

  Grid() = default;
  Grid(double x_min_, double dx_, std::size_t n_) : x_min(x_min_), dx(dx_), n(n_) { validate(); }

  /// Lattice of n samples covering [-period/2, period/2).
  static Grid centered(double period, std::size_t n) {
    return Grid(-0.5 * period, period / static_cast<double>(n), n);
  }

  double period() const { return dx * static_cast<double>(n); }
  double x(std::size_t j) const { return x_min + dx * static_cast<double>(j); }
  double midpoint() const { return x_min + 0.5 * period(); }

  std::vector<double> coordinates() const {
    std::vector<double> xs(n);
    for (std::size_t j = 0; j < n; ++j) xs[j] = x(j);
    return xs;
  }

  void validate() const {
    require(n >= 2 && (n & (n - 1)) == 0, Errc::invalid_argument,
            "grid size must be a power of two (got " + std::to_string(n) + ")");
    require(dx > 0.0 && std::isfinite(dx), Errc::invalid_argument, "grid spacing must be positive");
    require(std::isfinite(x_min), Errc::invalid_argument, "grid origin must be finite");
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Field = std::vector<double>;

inline Field derivative(const Grid& g, std::span<const double> f, int order) {
  return spectral::derivative(f, g.period(), order);
}

/// Rectangle rule; spectrally accurate for smooth periodic integrands.
inline double integrate(const Grid& g, std::span<const double> f) {
  double acc = 0.0;
  for (double x : f) acc += x;
  return acc * g.dx;
}

inline double inner(const Grid& g, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc * g.dx;
}

/// Hydrodynamical pair (v, w) = (m3, d/dx phase). Also used for generic
/// pairs of fields (operator outputs, perturbations), which need not obey
/// the max|v| < 1 constraint; `check_nv` enforces it where required.
struct HydroState {
  Grid grid;
  Field v;
  Field w;

  HydroState() = default;
  explicit HydroState(const Grid& g) : grid(g), v(g.n, 0.0), w(g.n, 0.0) {}
  HydroState(const Grid& g, Field v_, Field w_) : grid(g), v(std::move(v_)), w(std::move(w_)) {
    require(v.size() == g.n && w.size() == g.n, Errc::invalid_argument,
            "field length does not match grid");
  }

  HydroState& operator+=(const HydroState& o) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] += o.v[j];
      w[j] += o.w[j];
    }
    return *this;
  }
  HydroState& operator-=(const HydroState& o) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] -= o.v[j];
      w[j] -= o.w[j];
    }
    return *this;
  }
  HydroState& operator*=(double s) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] *= s;
      w[j] *= s;
    }
    return *this;
  }
  friend HydroState operator+(HydroState a, const HydroState& b) { return a += b; }
  friend HydroState operator-(HydroState a, const HydroState& b) { return a -= b; }
  friend HydroState operator*(double s, HydroState a) { return a *= s; }

  /// a += s * b
  void axpy(double s, const HydroState& b) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] += s * b.v[j];
      w[j] += s * b.w[j];
    }
  }

  double max_abs_v() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }

  bool finite() const {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }) &&
           std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); });
  }
};

using FieldPair = HydroState;

/// L2 x L2 inner product of two pairs.
inline double inner(const FieldPair& a, const FieldPair& b) {
  return inner(a.grid, a.v, b.v) + inner(a.grid, a.w, b.w);
}

inline double l2_norm(const FieldPair& a) { return std::sqrt(inner(a, a)); }

inline double sup_norm(const FieldPair& a) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.v.size(); ++j) m = std::max({m, std::abs(a.v[j]), std::abs(a.w[j])});
  return m;
}

/// Vacuum guard: throws when 1 - v^2 drops below eps_vac anywhere.
inline void check_nv(const HydroState& s, double eps_vac = 1e-6) {
  for (std::size_t j = 0; j < s.v.size(); ++j) {
    const double q = 1.0 - s.v[j] * s.v[j];
    if (!(q >= eps_vac))
      throw Error(Errc::vacuum_breakdown, "1 - v^2 = " + std::to_string(q) + " at x = " +
                                              std::to_string(s.grid.x(j)));
  }
}

/// Energy-space norm (||v||_{H1}^2 + ||w||_{L2}^2)^{1/2}.
inline double x_norm(const HydroState& s) {
  const Field vx = derivative(s.grid, s.v, 1);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j)
    acc += s.v[j] * s.v[j] + vx[j] * vx[j] + s.w[j] * s.w[j];
  return std::sqrt(acc * s.grid.dx);
}

/// Distance from x to center on the circle of circumference `period`.
inline double periodic_distance(double x, double center, double period) {
  double d = std::fmod(x - center, period);
  if (d < 0) d += period;
  return std::min(d, period - d);
}

/// x_norm restricted to samples within half_width of center (periodic distance).
inline double window_norm(const HydroState& s, double center, double half_width) {
  require(half_width > 0.0, Errc::invalid_argument, "window half width must be positive");
  const Field vx = derivative(s.grid, s.v, 1);
  const double P = s.grid.period();
  double acc = 0.0;
  for (std::size_t j = 0; j < s.v.size(); ++j) {
    if (periodic_distance(s.grid.x(j), center, P) > half_width) continue;
    acc += s.v[j] * s.v[j] + vx[j] * vx[j] + s.w[j] * s.w[j];
  }
  return std::sqrt(acc * s.grid.dx);
}

using Vec3 = std::array<double, 3>;

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Unit-vector field m on a grid. The in-plane part m1 + i m2 is
/// quasi-periodic: its value at x + period is e^{i twist} times its value at x.
/// twist is the total phase winding across one period (= integral of w).
struct SpinState {
  Grid grid;
  std::vector<Vec3> m;
  double twist = 0.0;

  SpinState() = default;
  SpinState(const Grid& g, std::vector<Vec3> m_, double twist_ = 0.0)
      : grid(g), m(std::move(m_)), twist(twist_) {
    require(m.size() == g.n, Errc::invalid_argument, "spin field length does not match grid");
  }

  double twist_rate() const { return twist / grid.period(); }

  std::vector<std::complex<double>> planar() const {
    std::vector<std::complex<double>> z(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) z[j] = {m[j][0], m[j][1]};
    return z;
  }
  Field component(int i) const {
    Field f(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) f[j] = m[j][static_cast<std::size_t>(i)];
    return f;
  }

  double max_norm_defect() const {
    double d = 0.0;
    for (const auto& x : m) d = std::max(d, std::abs(norm(x) - 1.0));
    return d;
  }

  void normalize() {
    for (auto& x : m) {
      const double r = norm(x);
      for (auto& c : x) c /= r;
    }
  }

  bool finite() const {
    return std::all_of(m.begin(), m.end(), [](const Vec3& x) {
      return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
    });
  }
};

/// Order-th x-derivative of every component of a spin field, honoring the twist.
inline std::vector<Vec3> derivative(const SpinState& s, int order) {
  const auto planar = s.planar();
  const auto dp = spectral::derivative(std::span<const std::complex<double>>(planar),
                                       s.grid.period(), order, s.twist_rate());
  const Field m3 = s.component(2);
  const Field d3 = derivative(s.grid, m3, order);
  std::vector<Vec3> out(s.m.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {dp[j].real(), dp[j].imag(), d3[j]};
  return out;
}

}  // namespace lllab
