#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "pptflow/autodiff.hpp"
#include "pptflow/error.hpp"
#include "pptflow/fft.hpp"
#include "pptflow/tensor.hpp"

namespace pptflow {

struct PeriodEntry {
  std::size_t frequency;  // DFT bin index, 1..T/2
  std::size_t period;     // floor(T / frequency)
  double weight;          // mean amplitude at the bin

  bool operator==(const PeriodEntry&) const = default;
};

/// Dominant periods of a length-T signal, strongest first.
struct PeriodSet {
  std::vector<PeriodEntry> entries;
  std::size_t length = 0;
  std::size_t requested_k = 0;

  std::size_t size() const noexcept { return entries.size(); }
  bool reduced() const noexcept { return entries.size() < requested_k; }

  std::vector<std::size_t> frequencies() const {
    std::vector<std::size_t> f;
    for (const auto& e : entries) f.push_back(e.frequency);
    return f;
  }
};

/// Channel- and batch-averaged FFT amplitude of x[B,T,C] over the time axis, with the DC bin zeroed.
inline Tensor amplitude_spectrum(const Tensor& x) {
  if (x.rank() != 3) fail(ErrorKind::kDimension, "amplitude_spectrum expects [B,T,C], got " + shape_str(x.shape()));
  const std::size_t B = x.shape()[0], T = x.shape()[1], C = x.shape()[2];
  if (T < 4) fail(ErrorKind::kDomain, "amplitude_spectrum input too short: T=" + std::to_string(T) + ", need >= 4");
  Tensor amp(Shape{T / 2 + 1}, 0.0);
  std::vector<double> column(T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < T; ++t) column[t] = x[(b * T + t) * C + c];
      const auto spec = rfft(column);
      for (std::size_t f = 0; f < spec.size(); ++f) amp[f] += std::abs(spec[f]);
    }
  }
  const double norm = static_cast<double>(B * C);
  for (auto& v : amp.data()) v /= norm;
  amp[0] = 0.0;
  return amp;
}

struct TopKOptions {
  // The model needs exactly k branches; zero-amplitude bins then fill the tail in frequency order.
  bool allow_zero_amplitude = false;
};

/// The k strongest bins of an amplitude spectrum (bin 0 excluded), ties toward the lower bin.
inline PeriodSet topk_periods(const Tensor& amplitude, std::size_t k, std::size_t length, TopKOptions opts = {}) {
  if (amplitude.rank() != 1 || amplitude.size() != length / 2 + 1) {
    fail(ErrorKind::kDimension, "amplitude spectrum of shape " + shape_str(amplitude.shape()) +
                                    " does not match length " + std::to_string(length));
  }
  if (k < 1 || k > length / 2) {
    fail(ErrorKind::kConfig, "top-k must lie in [1, T/2]; got k=" + std::to_string(k) + ", T=" + std::to_string(length));
  }
  std::vector<std::size_t> bins;
  for (std::size_t f = 1; f <= length / 2; ++f) {
    if (length / f < 2) continue;  // a period of 1 cannot be folded into a grid
    if (!opts.allow_zero_amplitude && !(amplitude[f] > 0.0)) continue;
    bins.push_back(f);
  }
  std::stable_sort(bins.begin(), bins.end(), [&](std::size_t a, std::size_t b) { return amplitude[a] > amplitude[b]; });
  PeriodSet out;
  out.length = length;
  out.requested_k = k;
  for (std::size_t i = 0; i < std::min(k, bins.size()); ++i) {
    out.entries.push_back({bins[i], length / bins[i], amplitude[bins[i]]});
  }
  if (out.reduced()) {
    warn("requested top-" + std::to_string(k) + " periods but only " + std::to_string(out.size()) +
         " non-zero frequency bins exist");
  }
  return out;
}

/// a[b,i]: channel-mean FFT amplitude of sample b at bin freqs[i].
inline Tensor per_sample_weights(const Tensor& x, const std::vector<std::size_t>& freqs) {
  if (x.rank() != 3) fail(ErrorKind::kDimension, "per_sample_weights expects [B,T,C], got " + shape_str(x.shape()));
  const std::size_t B = x.shape()[0], T = x.shape()[1], C = x.shape()[2];
  if (freqs.empty()) fail(ErrorKind::kConfig, "per_sample_weights needs at least one frequency");
  Tensor out(Shape{B, freqs.size()}, 0.0);
  std::vector<double> column(T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < T; ++t) column[t] = x[(b * T + t) * C + c];
      const auto spec = rfft(column);
      for (std::size_t i = 0; i < freqs.size(); ++i) out[b * freqs.size() + i] += std::abs(spec.at(freqs[i]));
    }
  }
  for (auto& v : out.data()) v /= static_cast<double>(C);
  return out;
}

/// Differentiable counterpart of per_sample_weights: the selected bins are evaluated as a direct
/// DFT (cosine and sine projections), so gradients flow back into x.
inline Var per_sample_weights(const Var& x, const std::vector<std::size_t>& freqs) {
  if (x.shape().size() != 3) fail(ErrorKind::kDimension, "per_sample_weights expects [B,T,C], got " + shape_str(x.shape()));
  if (freqs.empty()) fail(ErrorKind::kConfig, "per_sample_weights needs at least one frequency");
  const std::size_t T = x.shape()[1];
  const std::size_t k = freqs.size();
  Tensor cos_basis(Shape{T, k}), sin_basis(Shape{T, k});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>((freqs[i] * t) % T) / static_cast<double>(T);
      cos_basis.at({t, i}) = std::cos(ang);
      sin_basis.at({t, i}) = -std::sin(ang);
    }
  }
  Tape& tape = *x.tape();
  Var xt = permute(x, {0, 2, 1});  // [B,C,T]
  Var re = matmul(xt, tape.constant(std::move(cos_basis)));
  Var im = matmul(xt, tape.constant(std::move(sin_basis)));
  Var mag = magnitude(re, im);                // [B,C,k]
  return mean_lastdim(permute(mag, {0, 2, 1}));  // [B,k]
}

}  // namespace pptflow
