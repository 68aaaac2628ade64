#pragma once

// Fourier collocation on uniform periodic lattices (FFTW backend).
//
// Wavenumbers are k_j = 2*pi*j/period. For odd derivative orders the Nyquist
// coefficient is zeroed so the discrete first derivative is real and
// skew-symmetric; even orders keep it.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "lllab/error.hpp"

namespace lllab::spectral {

using cplx = std::complex<double>;

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Per-thread FFTW buffers and plans for one transform length.
class Workspace {
 public:
  explicit Workspace(std::size_t n) : n_(n) {
    real_ = fftw_alloc_real(n);
    half_ = fftw_alloc_complex(n / 2 + 1);
    cin_ = fftw_alloc_complex(n);
    cout_ = fftw_alloc_complex(n);
    std::lock_guard lock(planner_mutex());
    const int ni = static_cast<int>(n);
    r2c_ = fftw_plan_dft_r2c_1d(ni, real_, half_, FFTW_ESTIMATE);
    c2r_ = fftw_plan_dft_c2r_1d(ni, half_, real_, FFTW_ESTIMATE);
    fwd_ = fftw_plan_dft_1d(ni, cin_, cout_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(ni, cout_, cin_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  ~Workspace() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(half_);
    fftw_free(cin_);
    fftw_free(cout_);
  }

  std::size_t size() const { return n_; }

  /// Forward real transform; returns n/2+1 unnormalized coefficients.
  std::vector<cplx> forward(std::span<const double> f) {
    std::copy(f.begin(), f.end(), real_);
    fftw_execute(r2c_);
    std::vector<cplx> out(n_ / 2 + 1);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = {half_[j][0], half_[j][1]};
    return out;
  }

  /// Inverse real transform including the 1/n normalization.
  std::vector<double> inverse(std::span<const cplx> coef) {
    for (std::size_t j = 0; j < coef.size(); ++j) {
      half_[j][0] = coef[j].real();
      half_[j][1] = coef[j].imag();
    }
    fftw_execute(c2r_);
    std::vector<double> out(real_, real_ + n_);
    const double inv = 1.0 / static_cast<double>(n_);
    for (auto& x : out) x *= inv;
    return out;
  }

  std::vector<cplx> forward(std::span<const cplx> f) {
    for (std::size_t j = 0; j < n_; ++j) {
      cin_[j][0] = f[j].real();
      cin_[j][1] = f[j].imag();
    }
    fftw_execute(fwd_);
    std::vector<cplx> out(n_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = {cout_[j][0], cout_[j][1]};
    return out;
  }

  std::vector<cplx> inverse_complex(std::span<const cplx> coef) {
    for (std::size_t j = 0; j < n_; ++j) {
      cout_[j][0] = coef[j].real();
      cout_[j][1] = coef[j].imag();
    }
    fftw_execute(bwd_);
    std::vector<cplx> out(n_);
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = {cin_[j][0] * inv, cin_[j][1] * inv};
    return out;
  }

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* half_;
  fftw_complex* cin_;
  fftw_complex* cout_;
  fftw_plan r2c_, c2r_, fwd_, bwd_;
};

inline Workspace& workspace(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<Workspace>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Workspace>(n);
  return *slot;
}

inline cplx ipow(cplx z, int order) {
  cplx r = 1.0;
  for (int i = 0; i < order; ++i) r *= z;
  return r;
}

}  // namespace detail

/// Signed wavenumber of the j-th coefficient of a length-n complex transform.
inline double wavenumber(std::size_t j, std::size_t n, double period) {
  const auto jj = static_cast<long long>(j);
  const auto nn = static_cast<long long>(n);
  const long long m = jj <= nn / 2 ? jj : jj - nn;
  return 2.0 * std::numbers::pi * static_cast<double>(m) / period;
}

/// Order-th derivative of a periodic real field, order in {1,2,3}.
inline std::vector<double> derivative(std::span<const double> f, double period, int order) {
  require(order >= 1 && order <= 3, Errc::invalid_argument,
          "derivative order must be 1, 2 or 3 (got " + std::to_string(order) + ")");
  const std::size_t n = f.size();
  auto& ws = detail::workspace(n);
  auto coef = ws.forward(f);
  for (std::size_t j = 0; j < coef.size(); ++j) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / period;
    coef[j] *= detail::ipow(cplx(0.0, k), order);
  }
  if (order % 2 == 1) coef[n / 2] = 0.0;
  return ws.inverse(coef);
}

/// Derivative of a quasi-periodic complex field g(x) = e^{i*rate*(x - x0)} p(x),
/// p periodic. `rate` = 0 gives the plain periodic derivative.
inline std::vector<cplx> derivative(std::span<const cplx> g, double period, int order,
                                    double rate = 0.0) {
  require(order >= 1 && order <= 3, Errc::invalid_argument,
          "derivative order must be 1, 2 or 3 (got " + std::to_string(order) + ")");
  const std::size_t n = g.size();
  const double dx = period / static_cast<double>(n);
  std::vector<cplx> p(n);
  for (std::size_t j = 0; j < n; ++j)
    p[j] = g[j] * std::polar(1.0, -rate * dx * static_cast<double>(j));
  auto& ws = detail::workspace(n);
  auto coef = ws.forward(std::span<const cplx>(p));
  for (std::size_t j = 0; j < n; ++j) {
    if (j == n / 2 && order % 2 == 1) {
      coef[j] = 0.0;
      continue;
    }
    coef[j] *= detail::ipow(cplx(0.0, wavenumber(j, n, period) + rate), order);
  }
  auto out = ws.inverse_complex(coef);
  for (std::size_t j = 0; j < n; ++j) out[j] *= std::polar(1.0, rate * dx * static_cast<double>(j));
  return out;
}

/// Samples of f(x - shift) on the same lattice (exact for band-limited f).
inline std::vector<double> translate(std::span<const double> f, double period, double shift) {
  const std::size_t n = f.size();
  auto& ws = detail::workspace(n);
  auto coef = ws.forward(f);
  for (std::size_t j = 0; j < coef.size(); ++j) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / period;
    coef[j] *= std::polar(1.0, -k * shift);
  }
  // A half-sample shift of the Nyquist mode is not representable as a real
  // field; keep only its real part.
  coef[n / 2] = coef[n / 2].real();
  return ws.inverse(coef);
}

/// Zero-mean periodic antiderivative of the zero-mean part of f.
inline std::vector<double> antiderivative(std::span<const double> f, double period) {
  const std::size_t n = f.size();
  auto& ws = detail::workspace(n);
  auto coef = ws.forward(f);
  coef[0] = 0.0;
  for (std::size_t j = 1; j < coef.size(); ++j) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / period;
    coef[j] /= cplx(0.0, k);
  }
  coef[n / 2] = 0.0;
  return ws.inverse(coef);
}

/// Trigonometric interpolant of samples f (first sample at x_min) evaluated at x.
inline double interpolate(std::span<const double> f, double x_min, double period, double x) {
  const std::size_t n = f.size();
  auto& ws = detail::workspace(n);
  const auto coef = ws.forward(f);
  const double s = x - x_min;
  double acc = coef[0].real();
  for (std::size_t j = 1; j < n / 2; ++j) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / period;
    acc += 2.0 * (coef[j] * std::polar(1.0, k * s)).real();
  }
  const double kn = std::numbers::pi * static_cast<double>(n) / period;
  acc += coef[n / 2].real() * std::cos(kn * s);
  return acc / static_cast<double>(n);
}

/// 2/3-rule mask: zero every coefficient with |j| > n/3.
inline std::vector<double> dealias(std::span<const double> f) {
  const std::size_t n = f.size();
  auto& ws = detail::workspace(n);
  auto coef = ws.forward(f);
  for (std::size_t j = n / 3 + 1; j < coef.size(); ++j) coef[j] = 0.0;
  return ws.inverse(coef);
}

inline std::vector<cplx> dealias(std::span<const cplx> g, double rate_times_dx) {
  const std::size_t n = g.size();
  std::vector<cplx> p(n);
  for (std::size_t j = 0; j < n; ++j)
    p[j] = g[j] * std::polar(1.0, -rate_times_dx * static_cast<double>(j));
  auto& ws = detail::workspace(n);
  auto coef = ws.forward(std::span<const cplx>(p));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t m = j <= n / 2 ? j : n - j;
    if (m > n / 3) coef[j] = 0.0;
  }
  auto out = ws.inverse_complex(coef);
  for (std::size_t j = 0; j < n; ++j)
    out[j] *= std::polar(1.0, rate_times_dx * static_cast<double>(j));
  return out;
}

/// Sum over Fourier modes of k^2 |f_k|^2, scaled so it equals the
/// rectangle-rule integral of (f')^2 by Parseval.
inline double gradient_energy_spectral(std::span<const double> f, double period) {
  const std::size_t n = f.size();
  auto& ws = detail::workspace(n);
  const auto coef = ws.forward(f);
  double acc = 0.0;
  for (std::size_t j = 1; j < n / 2; ++j) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / period;
    acc += 2.0 * k * k * std::norm(coef[j]);
  }
  const double dn = static_cast<double>(n);
  return acc * period / (dn * dn);
}

}  // namespace lllab::spectral
