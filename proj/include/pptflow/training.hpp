#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pptflow/autodiff.hpp"
#include "pptflow/error.hpp"
#include "pptflow/flow_features.hpp"
#include "pptflow/model.hpp"

namespace pptflow {

struct TrainConfig {
  double lr_init = 5e-3;
  double lr_min = 0.0;
  double weight_decay = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::size_t patience = 20;         // epochs without validation-MAE improvement before stopping
  std::uint64_t seed = 42;
  std::vector<std::size_t> targets;  // features in the loss and metrics; empty means all
  double stop_val_mse = 0.0;         // > 0: stop once validation MSE drops below this

  void validate() const {
    if (!(lr_init > lr_min) || lr_min < 0.0) fail(ErrorKind::kConfig, "learning rates need lr_init > lr_min >= 0");
    if (weight_decay < 0.0) fail(ErrorKind::kConfig, "weight decay must be >= 0");
    if (batch_size < 1 || epochs < 1) fail(ErrorKind::kConfig, "batch size and epochs must be >= 1");
  }
};

/// 0/1 weight per feature.
inline std::vector<double> feature_mask(const std::vector<std::size_t>& targets, std::size_t features) {
  std::vector<double> m(features, targets.empty() ? 1.0 : 0.0);
  for (std::size_t t : targets) {
    if (t >= features) fail(ErrorKind::kConfig, "target feature index " + std::to_string(t) + " out of range");
    m[t] = 1.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Loss and metrics.

inline Var mse_loss(const Var& pred, const Tensor& target, const std::vector<double>& mask) {
  if (pred.shape() != target.shape()) {
    fail(ErrorKind::kDimension, "mse_loss shapes differ: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  if (mask.size() != target.shape().back()) fail(ErrorKind::kDimension, "loss mask does not match the feature axis");
  const double active = std::accumulate(mask.begin(), mask.end(), 0.0);
  if (!(active > 0.0)) fail(ErrorKind::kConfig, "loss mask selects no features");
  Tape& tape = *pred.tape();
  const double n = static_cast<double>(target.size() / mask.size()) * active;
  Var sq = square(pred - tape.constant(target)) * tape.constant(Tensor(Shape{mask.size()}, mask));
  return scale(sum(sq), 1.0 / n);
}

struct MetricReport {
  double mae = 0.0, mse = 0.0, rmse = 0.0;
  std::vector<std::size_t> features;  // which features the per-feature entries describe
  std::vector<double> feature_mae, feature_mse;
  std::size_t horizon = 0, samples = 0;

  nlohmann::json to_json(const std::vector<std::string>& names = {}) const {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t i = 0; i < features.size(); ++i) {
      const std::string key = features[i] < names.size() ? names[features[i]] : std::to_string(features[i]);
      per[key] = {{"mae", feature_mae[i]}, {"mse", feature_mse[i]}, {"rmse", std::sqrt(feature_mse[i])}};
    }
    return {{"mae", mae}, {"mse", mse}, {"rmse", rmse}, {"horizon", horizon}, {"samples", samples}, {"per_feature", per}};
  }
};

/// MAE / MSE / RMSE over every masked entry of [N,H,C] tensors.
inline MetricReport compute_metrics(const Tensor& pred, const Tensor& target, const std::vector<double>& mask = {}) {
  if (pred.shape() != target.shape()) {
    fail(ErrorKind::kDimension, "metric shapes differ: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  const std::size_t c = pred.shape().back();
  const std::vector<double> m = mask.empty() ? std::vector<double>(c, 1.0) : mask;
  if (m.size() != c) fail(ErrorKind::kDimension, "metric mask does not match the feature axis");
  MetricReport r;
  r.samples = pred.rank() >= 3 ? pred.shape()[0] : 1;
  r.horizon = pred.rank() >= 2 ? pred.shape()[pred.rank() - 2] : 1;
  std::vector<double> abs_sum(c, 0.0), sq_sum(c, 0.0);
  const std::size_t rows = pred.size() / c;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = pred[i * c + j] - target[i * c + j];
      abs_sum[j] += std::abs(d);
      sq_sum[j] += d * d;
    }
  double n = 0.0, a = 0.0, s = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (m[j] == 0.0) continue;
    r.features.push_back(j);
    r.feature_mae.push_back(abs_sum[j] / static_cast<double>(rows));
    r.feature_mse.push_back(sq_sum[j] / static_cast<double>(rows));
    a += abs_sum[j];
    s += sq_sum[j];
    n += static_cast<double>(rows);
  }
  if (n == 0.0) fail(ErrorKind::kDomain, "metrics need at least one masked entry");
  r.mae = a / n;
  r.mse = s / n;
  r.rmse = std::sqrt(r.mse);
  return r;
}

// ---------------------------------------------------------------------------
// Optimization.

inline double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init, double lr_min) {
  if (total_steps == 0) return lr_init;
  if (step > total_steps) fail(ErrorKind::kConfig, "schedule step beyond total steps");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// Adam moments with bias correction and decoupled weight decay applied to the pre-step value.
class AdamW {
 public:
  AdamW(std::vector<Param*> params, AdamWOptions opts = {}) : params_(std::move(params)), opts_(opts) {
    for (Param* p : params_) {
      m_.emplace_back(p->value.shape(), 0.0);
      v_.emplace_back(p->value.shape(), 0.0);
    }
  }

  void step(double lr) {
    for (Param* p : params_) {
      if (!p->grad.all_finite()) fail(ErrorKind::kNumeric, "non-finite gradient in parameter '" + p->name + "'");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto theta = params_[i]->value.data();
      auto g = params_[i]->grad.data();
      auto m = m_[i].data();
      auto v = v_[i].data();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g[k];
        v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g[k] * g[k];
        const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + opts_.eps);
        const double old = theta[k];
        theta[k] = old - lr * update - lr * opts_.weight_decay * old;
      }
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<Param*> params_;
  AdamWOptions opts_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Training loop.

inline Tensor gather_windows(const Tensor& source, const std::vector<std::size_t>& idx) {
  Shape s = source.shape();
  const std::size_t stride = source.size() / s[0];
  s[0] = idx.size();
  Tensor out(s);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(source.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  return out;
}

/// Inference over all windows in consecutive fixed batches (period sets are shared within a batch).
inline Tensor predict_batched(const Tensor& inputs, PPTNetParams& params, const PPTNetConfig& cfg, std::size_t batch_size) {
  const std::size_t n = inputs.shape()[0];
  Tensor out(Shape{n, cfg.horizon, cfg.input_features});
  const std::size_t stride = cfg.horizon * cfg.input_features;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, n - start));
    std::iota(idx.begin(), idx.end(), start);
    Tensor y = predict(gather_windows(inputs, idx), params, cfg);
    std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * stride));
  }
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0, train_loss = 0.0, val_mae = 0.0, val_mse = 0.0, val_rmse = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch}, {"lr", lr}, {"train_loss", train_loss}, {"val_mae", val_mae}, {"val_mse", val_mse}, {"val_rmse", val_rmse}};
  }
};

struct TrainResult {
  PPTNetParams best;           // parameters at the best validation MAE
  std::size_t best_epoch = 0;
  MetricReport best_val;
  std::vector<EpochRecord> log;
  std::string stop_reason;     // "epochs", "early_stopping", "target_reached" or "diverged"
  std::string error;           // set when diverged
  bool diverged() const { return stop_reason == "diverged"; }
};

/// Minimizes masked MSE with AdamW and a per-epoch cosine schedule. Batches are reshuffled each
/// epoch from the seed; dropout draws from a separate stream derived from the same seed.
inline TrainResult train(const PPTNetConfig& cfg, PPTNetParams params, const WindowBatch& train_set, const WindowBatch& val_set,
                         const TrainConfig& tc, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  tc.validate();
  const std::size_t n_train = train_set.inputs.shape()[0];
  if (n_train == 0 || val_set.inputs.shape()[0] == 0) fail(ErrorKind::kDomain, "training needs non-empty train and validation windows");
  const std::vector<double> mask = feature_mask(tc.targets, cfg.input_features);

  std::mt19937_64 order_rng(tc.seed);
  std::mt19937_64 dropout_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamW opt(params.all(), {.weight_decay = tc.weight_decay});
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best = params;
  double best_mae = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  result.stop_reason = "epochs";

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(epoch, tc.epochs, tc.lr_init, tc.lr_min);
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < n_train; start += tc.batch_size) {
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, start + tc.batch_size)));
        params.zero_grad();
        Tape tape;
        ForwardResult fr = forward(tape, gather_windows(train_set.inputs, idx), params, cfg, {.training = true, .rng = &dropout_rng});
        Var loss = mse_loss(fr.output, gather_windows(train_set.targets, idx), mask);
        if (!std::isfinite(loss.value().item())) fail(ErrorKind::kNumeric, "training loss is non-finite at epoch " + std::to_string(epoch));
        tape.backward(loss);
        opt.step(rec.lr);
        loss_sum += loss.value().item() * static_cast<double>(idx.size());
      }
      rec.train_loss = loss_sum / static_cast<double>(n_train);
      MetricReport val = compute_metrics(predict_batched(val_set.inputs, params, cfg, tc.batch_size), val_set.targets, mask);
      rec.val_mae = val.mae;
      rec.val_mse = val.mse;
      rec.val_rmse = val.rmse;
      if (!std::isfinite(val.mse)) fail(ErrorKind::kNumeric, "validation error is non-finite at epoch " + std::to_string(epoch));
      if (val.mae < best_mae) {
        best_mae = val.mae;
        result.best = params;
        result.best_epoch = epoch;
        result.best_val = val;
        since_best = 0;
      } else {
        ++since_best;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      result.stop_reason = "diverged";
      result.error = e.what();
      return result;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (tc.stop_val_mse > 0.0 && rec.val_mse < tc.stop_val_mse) {
      result.stop_reason = "target_reached";
      break;
    }
    if (tc.patience > 0 && since_best >= tc.patience) {
      result.stop_reason = "early_stopping";
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient check harness.

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;      // "param[index]"
  std::size_t checked = 0;
  bool passed(double tol) const { return max_rel_error < tol; }
};

/// Compares one backward pass against central differences on up to `samples` randomly chosen
/// scalar entries (all entries when there are fewer). Relative error is |a - fd| / (|fd| + 1e-8).
inline GradCheckResult grad_check(const std::vector<Param*>& params, const std::function<Var(Tape&)>& loss_fn,
                                  std::size_t samples, std::uint64_t seed, double step = 1e-5) {
  for (Param* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss_fn(tape));
  }
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t k = 0; k < params[i]->value.size(); ++k) entries.emplace_back(i, k);
  if (entries.size() > samples) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(samples);
  }
  auto eval = [&] {
    Tape tape;
    return loss_fn(tape).value().item();
  };
  GradCheckResult r;
  for (auto [i, k] : entries) {
    double& x = params[i]->value[k];
    const double saved = x;
    x = saved + step;
    const double up = eval();
    x = saved - step;
    const double down = eval();
    x = saved;
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(params[i]->grad[k] - fd) / (std::abs(fd) + 1e-8);
    if (err > r.max_rel_error || r.checked == 0) {
      r.max_rel_error = err;
      r.worst = params[i]->name + "[" + std::to_string(k) + "]";
    }
    ++r.checked;
  }
  return r;
}

/// Full-model check on random data: masked MSE of a freshly initialized model against a random target.
inline GradCheckResult grad_check_model(const PPTNetConfig& cfg, std::size_t batch, std::uint64_t seed, std::size_t samples = 400) {
  PPTNetConfig c = cfg;
  c.dropout = 0.0;
  PPTNetParams params = init_params(c, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> nd;
  Tensor x(Shape{batch, c.lookback, c.input_features}), y(Shape{batch, c.horizon, c.input_features});
  for (auto& v : x.data()) v = nd(rng);
  for (auto& v : y.data()) v = nd(rng);
  const std::vector<double> mask(c.input_features, 1.0);
  return grad_check(params.all(), [&](Tape& t) { return mse_loss(forward(t, x, params, c).output, y, mask); }, samples, seed + 2);
}

}  // namespace pptflow
