#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "pptflow/error.hpp"
#include "pptflow/flow_features.hpp"
#include "pptflow/tensor.hpp"

namespace pptflow {

/// Standardized train/validation/test windows drawn from one generated series.
struct SyntheticData {
  Tensor series;  // standardized values the windows were cut from
  WindowBatch train, val, test;
};

inline SyntheticData window_series(Tensor values, std::size_t lookback, std::size_t horizon, std::size_t windows) {
  const std::size_t rows = values.shape()[0];
  if (rows < lookback + horizon + windows - 1) fail(ErrorKind::kDomain, "series too short for the requested window count");
  WindowSplit split = window_split(lookback + horizon + windows - 1, lookback, horizon, 1);
  NormStats stats = fit_norm_stats(values, split.train_rows());
  stats.apply(values);
  SyntheticData d;
  d.series = values;
  d.train = make_windows(values, split.train, lookback, horizon);
  d.val = make_windows(values, split.val, lookback, horizon);
  d.test = make_windows(values, split.test, lookback, horizon);
  return d;
}

/// Two channels, each a sum of two sinusoids with periods dividing 48, plus small Gaussian noise.
inline SyntheticData two_sine_dataset(std::size_t lookback = 48, std::size_t horizon = 12, std::size_t windows = 500,
                                      std::uint64_t seed = 7, double noise = 0.0) {
  const std::size_t rows = lookback + horizon + windows - 1;
  Tensor v(Shape{rows, 2});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, noise > 0.0 ? noise : 1.0);
  const double tau = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < rows; ++t) {
    const double x = static_cast<double>(t);
    v[t * 2 + 0] = std::sin(tau * x / 12.0) + 0.5 * std::sin(tau * x / 24.0 + 0.7);
    v[t * 2 + 1] = std::cos(tau * x / 16.0) + 0.4 * std::sin(tau * x / 8.0 + 1.3);
    if (noise > 0.0) {
      v[t * 2 + 0] += nd(rng);
      v[t * 2 + 1] += nd(rng);
    }
  }
  return window_series(std::move(v), lookback, horizon, windows);
}

/// Every window draws its own smooth random driver: feature 1 is the driver and feature 0 repeats
/// it `horizon` steps later, so the future of feature 0 is visible only in the history of feature 1.
/// Windows are independent, split 7:2:1 and standardized with training-window statistics.
inline SyntheticData cross_feature_dataset(std::size_t lookback, std::size_t horizon, std::size_t windows, std::uint64_t seed,
                                           double smoothing = 0.8) {
  if (windows < 10) fail(ErrorKind::kDomain, "cross-feature dataset needs at least 10 windows");
  const std::size_t span = lookback + horizon;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Tensor all(Shape{windows, span, 2});
  std::vector<double> driver(span + horizon);
  for (std::size_t w = 0; w < windows; ++w) {
    double s = nd(rng) / std::sqrt(1.0 - smoothing * smoothing);
    for (auto& x : driver) x = s = smoothing * s + nd(rng);
    for (std::size_t t = 0; t < span; ++t) {
      all[(w * span + t) * 2 + 0] = driver[t];
      all[(w * span + t) * 2 + 1] = driver[t + horizon];
    }
  }
  const std::size_t n_train = windows * 7 / 10, n_val = windows * 2 / 10;
  NormStats stats = fit_norm_stats(all.reshaped(Shape{windows * span, 2}), n_train * span);
  all = all.reshaped(Shape{windows * span, 2});
  stats.apply(all);
  all = all.reshaped(Shape{windows, span, 2});
  auto take = [&](std::size_t first, std::size_t count) {
    WindowBatch b{Tensor(Shape{count, lookback, 2}), Tensor(Shape{count, horizon, 2}), {}};
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t k = 0; k < lookback * 2; ++k) b.inputs[i * lookback * 2 + k] = all[(first + i) * span * 2 + k];
      for (std::size_t k = 0; k < horizon * 2; ++k) b.targets[i * horizon * 2 + k] = all[(first + i) * span * 2 + lookback * 2 + k];
      b.origins.push_back(first + i);
    }
    return b;
  };
  SyntheticData d;
  d.series = all;
  d.train = take(0, n_train);
  d.val = take(n_train, n_val);
  d.test = take(n_train + n_val, windows - n_train - n_val);
  return d;
}

/// Keeps only the listed feature columns of a [N,L,C] window tensor.
inline Tensor select_features(const Tensor& x, const std::vector<std::size_t>& keep) {
  const std::size_t c = x.shape().back();
  Shape s = x.shape();
  s.back() = keep.size();
  Tensor out(s);
  const std::size_t rows = x.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < keep.size(); ++j) out[r * keep.size() + j] = x[r * c + keep[j]];
  return out;
}

inline WindowBatch select_features(const WindowBatch& b, const std::vector<std::size_t>& keep) {
  return {select_features(b.inputs, keep), select_features(b.targets, keep), b.origins};
}

}  // namespace pptflow
