#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "pptflow/error.hpp"
#include "pptflow/tensor.hpp"

namespace pptflow {

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform. `sign` = -1 forward, +1 inverse (unscaled).
inline void fft_radix2(std::vector<std::complex<double>>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles computed directly rather than by recurrence to keep rounding error flat.
        const std::complex<double> w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// Bluestein chirp-z transform for arbitrary lengths, built on the radix-2 kernel.
inline std::vector<std::complex<double>> fft_bluestein(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<std::complex<double>> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for long inputs.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = {std::cos(ang), -std::sin(ang)};
  }
  std::vector<std::complex<double>> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  fft_radix2(a, -1);
  fft_radix2(b, -1);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_radix2(a, +1);
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k] / static_cast<double>(m);
  return out;
}

}  // namespace detail

/// Unnormalized forward DFT of a real sequence, non-negative frequency bins 0..T/2.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorKind::kDomain, "rfft input too short: need at least 2 samples, got " + std::to_string(x.size()));
  std::vector<std::complex<double>> a(x.begin(), x.end());
  if (detail::is_power_of_two(a.size())) {
    detail::fft_radix2(a, -1);
  } else {
    a = detail::fft_bluestein(a);
  }
  a.resize(x.size() / 2 + 1);
  return a;
}

/// |X_f| for f = 0..T/2 of a rank-1 tensor.
inline Tensor rfft_magnitudes(const Tensor& x) {
  if (x.rank() != 1) fail(ErrorKind::kDimension, "rfft_magnitudes expects a rank-1 tensor, got " + shape_str(x.shape()));
  const auto spec = rfft(x.data());
  Tensor out(Shape{spec.size()});
  for (std::size_t f = 0; f < spec.size(); ++f) out[f] = std::abs(spec[f]);
  return out;
}

}  // namespace pptflow
