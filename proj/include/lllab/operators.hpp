#pragma once

// Right-hand sides of the spin and hydrodynamical flows, and the
// decomposition of the hydrodynamical flow as J (L + B).

#include <vector>

#include "lllab/grid.hpp"

namespace lllab {

/// J (f1, f2) = (d/dx f2, d/dx f1).
inline FieldPair apply_J(const FieldPair& f) {
  return FieldPair(f.grid, derivative(f.grid, f.w, 1), derivative(f.grid, f.v, 1));
}

/// L (v, w) = (-v + v_xx, -w).
inline FieldPair apply_L(const HydroState& s) {
  FieldPair out(s.grid, derivative(s.grid, s.v, 2), s.w);
  for (std::size_t j = 0; j < s.v.size(); ++j) {
    out.v[j] -= s.v[j];
    out.w[j] = -out.w[j];
  }
  return out;
}

/// Higher-order remainder
/// B (v, w) = (v_xx v^2/(1 - v^2) + v_x^2 v/(1 - v^2)^2 + v w^2, v^2 w).
inline FieldPair apply_B(const HydroState& s) {
  check_nv(s);
  const Field vx = derivative(s.grid, s.v, 1);
  const Field vxx = derivative(s.grid, s.v, 2);
  FieldPair out(s.grid);
  for (std::size_t j = 0; j < s.v.size(); ++j) {
    const double v = s.v[j], w = s.w[j];
    const double q = 1.0 - v * v;
    out.v[j] = vxx[j] * v * v / q + vx[j] * vx[j] * v / (q * q) + v * w * w;
    out.w[j] = v * v * w;
  }
  return out;
}

/// Hydrodynamical flow:
///   v_t = d/dx((v^2 - 1) w)
///   w_t = d/dx(v_xx/(1 - v^2) + v v_x^2/(1 - v^2)^2 + v (w^2 - 1)).
inline FieldPair rhs_hll(const HydroState& s) {
  check_nv(s);
  const Grid& g = s.grid;
  const Field vx = derivative(g, s.v, 1);
  const Field vxx = derivative(g, s.v, 2);
  Field flux_v(g.n), flux_w(g.n);
  for (std::size_t j = 0; j < g.n; ++j) {
    const double v = s.v[j], w = s.w[j];
    const double q = 1.0 - v * v;
    flux_v[j] = (v * v - 1.0) * w;
    flux_w[j] = vxx[j] / q + v * vx[j] * vx[j] / (q * q) + v * (w * w - 1.0);
  }
  return FieldPair(g, derivative(g, flux_v, 1), derivative(g, flux_w, 1));
}

/// Spin flow with easy-plane anisotropy: m_t = -m x (m_xx - m3 e3).
inline std::vector<Vec3> rhs_spin(const SpinState& m) {
  const auto mxx = derivative(m, 2);
  std::vector<Vec3> out(m.m.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    Vec3 h = mxx[j];
    h[2] -= m.m[j][2];
    const Vec3 c = cross(m.m[j], h);
    out[j] = {-c[0], -c[1], -c[2]};
  }
  return out;
}

}  // namespace lllab
