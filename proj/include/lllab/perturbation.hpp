#pragma once

// Seeded smooth perturbations used by scenarios, audits and tests.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "lllab/error.hpp"
#include "lllab/grid.hpp"
#include "lllab/spectral.hpp"

namespace lllab {

struct SmoothNoiseOptions {
  double rolloff = 1.0;           // spectral weight exp(-(k/rolloff)^2)
  double envelope_fraction = 0.125;  // envelope width sigma = fraction * period
  double center = std::nan("");   // envelope center; defaults to the grid midpoint
};

namespace detail {

inline Field band_limited_field(const Grid& g, std::mt19937_64& rng, double rolloff) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::complex<double>> coef(g.n / 2 + 1, 0.0);
  const std::size_t kmax = g.n / 8;
  for (std::size_t j = 1; j <= kmax; ++j) {
    const double k = spectral::wavenumber(j, g.n, g.period()) / rolloff;
    const double re = normal(rng), im = normal(rng);
    coef[j] = std::exp(-k * k) * std::complex<double>(re, im);
  }
  return spectral::detail::workspace(g.n).inverse(coef);
}

}  // namespace detail

/// Band-limited random pair (modes <= n/8) under a Gaussian envelope, scaled
/// to x_norm = amplitude. Independent draws for v and w.
inline HydroState random_smooth(const Grid& g, double amplitude, std::uint64_t seed,
                                const SmoothNoiseOptions& opt = {}) {
  require(amplitude >= 0.0, Errc::invalid_argument, "perturbation amplitude must be >= 0");
  require(opt.rolloff > 0.0 && opt.envelope_fraction > 0.0, Errc::invalid_argument,
          "noise rolloff and envelope must be positive");
  std::mt19937_64 rng(seed);
  HydroState h(g, detail::band_limited_field(g, rng, opt.rolloff),
               detail::band_limited_field(g, rng, opt.rolloff));
  const double center = std::isnan(opt.center) ? g.midpoint() : opt.center;
  const double sigma = opt.envelope_fraction * g.period();
  for (std::size_t j = 0; j < g.n; ++j) {
    const double y = (g.x(j) - center) / sigma;
    const double e = std::exp(-y * y);
    h.v[j] *= e;
    h.w[j] *= e;
  }
  const double norm = x_norm(h);
  if (norm > 0.0) h *= amplitude / norm;
  return h;
}

/// v-only Gaussian bump amplitude * exp(-((x - center)/width)^2).
inline HydroState gaussian_bump(const Grid& g, double amplitude, double center, double width) {
  require(width > 0.0, Errc::invalid_argument, "bump width must be positive");
  HydroState h(g);
  for (std::size_t j = 0; j < g.n; ++j) {
    const double y = (g.x(j) - center) / width;
    h.v[j] = amplitude * std::exp(-y * y);
  }
  return h;
}

}  // namespace lllab
