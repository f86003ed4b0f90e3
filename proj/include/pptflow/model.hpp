#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pptflow/autodiff.hpp"
#include "pptflow/error.hpp"
#include "pptflow/spectral.hpp"
#include "pptflow/tensor.hpp"

namespace pptflow {

/// Architecture hyperparameters. Defaults follow the reference configuration
/// (3 periodic blocks, 2 decoder layers, d_model 64, d_ff 128, 4 heads, top-6 periods).
struct PPTNetConfig {
  std::size_t input_features = 12;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t heads = 4;
  std::size_t top_k = 6;
  std::size_t periodic_blocks = 3;
  std::size_t decoder_layers = 2;
  std::size_t lookback = 30;
  std::size_t horizon = 15;
  std::vector<std::size_t> kernel_sizes{1, 3, 5};
  std::size_t aggregation_hidden = 16;
  double dropout = 0.2;
  // Component switches for ablation runs.
  bool use_periodic_blocks = true;
  bool use_decoder = true;

  std::size_t d_k() const { return d_model / heads; }
  std::size_t total_length() const { return lookback + horizon; }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) fail(ErrorKind::kConfig, "invalid model config: " + msg);
    };
    need(input_features >= 1 && d_model >= 1 && d_ff >= 1 && heads >= 1, "all sizes must be >= 1");
    need(d_model % heads == 0, "d_model must be divisible by heads");
    need(top_k >= 1 && periodic_blocks >= 1 && decoder_layers >= 1 && aggregation_hidden >= 1, "all counts must be >= 1");
    need(horizon >= 1 && lookback >= horizon, "lookback must be >= horizon >= 1");
    need(lookback >= 4, "lookback must be >= 4 for spectral analysis");
    need(top_k <= lookback / 2, "top_k must be <= lookback / 2");
    need(!kernel_sizes.empty(), "kernel set must be non-empty");
    for (auto r : kernel_sizes) need(r % 2 == 1, "kernel sizes must be odd");
    need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
    need(use_periodic_blocks || use_decoder, "at least one of periodic blocks / decoder must be enabled");
  }

  bool operator==(const PPTNetConfig&) const = default;
};

struct PeriodicBlockParams {
  std::vector<Param> kernels;  // one [d,d,r,r] kernel per entry of kernel_sizes
  Param agg_w1, agg_b1, agg_w2, agg_b2;
};

struct DecoderLayerParams {
  Param wq, wk, wv, wo, bo;
  Param ln1_gain, ln1_bias;
  Param ff_w1, ff_b1, ff_w2, ff_b2;
  Param ln2_gain, ln2_bias;
};

struct PPTNetParams {
  Param embedding;  // W_e [C, d]
  std::vector<PeriodicBlockParams> blocks;
  std::vector<DecoderLayerParams> decoder;
  Param query;  // Q_0 [H, d]
  Param out_w, out_b;

  std::vector<Param*> all() {
    std::vector<Param*> out{&embedding};
    for (auto& b : blocks) {
      for (auto& k : b.kernels) out.push_back(&k);
      for (Param* p : {&b.agg_w1, &b.agg_b1, &b.agg_w2, &b.agg_b2}) out.push_back(p);
    }
    for (auto& l : decoder) {
      for (Param* p : {&l.wq, &l.wk, &l.wv, &l.wo, &l.bo, &l.ln1_gain, &l.ln1_bias, &l.ff_w1, &l.ff_b1, &l.ff_w2,
                       &l.ff_b2, &l.ln2_gain, &l.ln2_bias})
        out.push_back(p);
    }
    for (Param* p : {&query, &out_w, &out_b}) out.push_back(p);
    return out;
  }

  std::vector<const Param*> all() const {
    auto ptrs = const_cast<PPTNetParams*>(this)->all();
    return {ptrs.begin(), ptrs.end()};
  }

  void zero_grad() {
    for (Param* p : all()) p->zero_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param* p : all()) n += p->value.size();
    return n;
  }
};

namespace detail {

inline Param uniform_param(std::string name, Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return Param(std::move(name), std::move(t));
}

inline Param const_param(std::string name, Shape shape, double value) {
  return Param(std::move(name), Tensor(std::move(shape), value));
}

}  // namespace detail

/// Seeded initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights, zero biases, unit LN gains.
inline PPTNetParams init_params(const PPTNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.d_model, k = cfg.top_k;
  auto inv = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  using detail::const_param;
  using detail::uniform_param;

  PPTNetParams p;
  p.embedding = uniform_param("embedding.weight", {cfg.input_features, d}, inv(cfg.input_features), rng);
  if (cfg.use_periodic_blocks) {
    for (std::size_t b = 0; b < cfg.periodic_blocks; ++b) {
      const std::string pre = "block" + std::to_string(b) + ".";
      PeriodicBlockParams bp;
      for (std::size_t r : cfg.kernel_sizes) {
        bp.kernels.push_back(uniform_param(pre + "conv" + std::to_string(r), {d, d, r, r}, inv(d * r * r), rng));
      }
      bp.agg_w1 = uniform_param(pre + "agg.w1", {k, cfg.aggregation_hidden}, inv(k), rng);
      bp.agg_b1 = const_param(pre + "agg.b1", {cfg.aggregation_hidden}, 0.0);
      bp.agg_w2 = uniform_param(pre + "agg.w2", {cfg.aggregation_hidden, k}, inv(cfg.aggregation_hidden), rng);
      bp.agg_b2 = const_param(pre + "agg.b2", {k}, 0.0);
      p.blocks.push_back(std::move(bp));
    }
  }
  if (cfg.use_decoder) {
    for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
      const std::string pre = "decoder" + std::to_string(l) + ".";
      DecoderLayerParams lp;
      lp.wq = uniform_param(pre + "wq", {d, d}, inv(d), rng);
      lp.wk = uniform_param(pre + "wk", {d, d}, inv(d), rng);
      lp.wv = uniform_param(pre + "wv", {d, d}, inv(d), rng);
      lp.wo = uniform_param(pre + "wo", {d, d}, inv(d), rng);
      lp.bo = const_param(pre + "bo", {d}, 0.0);
      lp.ln1_gain = const_param(pre + "ln1.gain", {d}, 1.0);
      lp.ln1_bias = const_param(pre + "ln1.bias", {d}, 0.0);
      lp.ff_w1 = uniform_param(pre + "ff.w1", {d, cfg.d_ff}, inv(d), rng);
      lp.ff_b1 = const_param(pre + "ff.b1", {cfg.d_ff}, 0.0);
      lp.ff_w2 = uniform_param(pre + "ff.w2", {cfg.d_ff, d}, inv(cfg.d_ff), rng);
      lp.ff_b2 = const_param(pre + "ff.b2", {d}, 0.0);
      lp.ln2_gain = const_param(pre + "ln2.gain", {d}, 1.0);
      lp.ln2_bias = const_param(pre + "ln2.bias", {d}, 0.0);
      p.decoder.push_back(std::move(lp));
    }
  }
  p.query = uniform_param("query", {cfg.horizon, d}, 0.1, rng);
  p.out_w = uniform_param("output.weight", {d, cfg.input_features}, inv(d), rng);
  p.out_b = const_param("output.bias", {cfg.input_features}, 0.0);
  return p;
}

// ---------------------------------------------------------------------------
// Building blocks.

/// Sinusoidal positions: row t holds sin(t*w_i) at even columns and cos(t*w_i) at odd ones,
/// with w_i = 1 / 10000^(2i/d).
inline Tensor positional_encoding(std::size_t length, std::size_t d) {
  Tensor pe(Shape{length, d});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t even = j - j % 2;
      const double w = 1.0 / std::pow(10000.0, static_cast<double>(even) / static_cast<double>(d));
      pe.at({t, j}) = j % 2 == 0 ? std::sin(static_cast<double>(t) * w) : std::cos(static_cast<double>(t) * w);
    }
  }
  return pe;
}

/// x[B,T,C] W_e + p_t.
inline Var embed(const Var& x, const Var& weight) {
  if (x.shape().size() != 3 || weight.shape().size() != 2 || x.shape()[2] != weight.shape()[0]) {
    fail(ErrorKind::kDimension, "embedding expects [B,T,C] input matching [C,d] weight, got " + shape_str(x.shape()) +
                                    " and " + shape_str(weight.shape()));
  }
  const std::size_t T = x.shape()[1], d = weight.shape()[1];
  return matmul(x, weight) + x.tape()->constant(positional_encoding(T, d));
}

/// Zero-pads x[B,L0,d] to the smallest multiple L of `period` with L >= total and folds it into
/// [B,d,period,L/period]: axis 2 is the position inside a cycle, axis 3 indexes cycles.
inline Var pad_and_reshape(const Var& x, std::size_t period, std::size_t total) {
  if (period < 2) fail(ErrorKind::kConfig, "period must be >= 2, got " + std::to_string(period));
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] < total) fail(ErrorKind::kDimension, "pad_and_reshape input " + shape_str(s) + " shorter than " + std::to_string(total));
  const std::size_t B = s[0], d = s[2];
  const std::size_t L = (total + period - 1) / period * period;
  Var seq = s[1] == total ? x : slice(x, 1, 0, total);
  if (L > total) seq = concat({seq, x.tape()->constant(Tensor(Shape{B, L - total, d}, 0.0))}, 1);
  return permute(reshape(seq, {B, L / period, period, d}), {0, 3, 2, 1});
}

/// Inverse of pad_and_reshape, truncated to the first `total` steps: [B,d,p,n] -> [B,total,d].
inline Var inverse_reshape(const Var& grid, std::size_t total) {
  const Shape& s = grid.shape();
  if (s.size() != 4) fail(ErrorKind::kDimension, "inverse_reshape expects [B,d,p,n], got " + shape_str(s));
  const std::size_t B = s[0], d = s[1], p = s[2], n = s[3];
  Var seq = reshape(permute(grid, {0, 3, 2, 1}), {B, n * p, d});
  return n * p == total ? seq : slice(seq, 1, 0, total);
}

/// Mean of same-padded convolutions over the kernel set.
inline Var inception_2d(const Var& grid, const std::vector<Var>& kernels) {
  if (kernels.empty()) fail(ErrorKind::kConfig, "inception block has no kernels");
  Var acc = conv2d_same(grid, kernels[0]);
  for (std::size_t i = 1; i < kernels.size(); ++i) acc = acc + conv2d_same(grid, kernels[i]);
  return kernels.size() == 1 ? acc : scale(acc, 1.0 / static_cast<double>(kernels.size()));
}

struct AggregationWeights {
  Var w1, b1, w2, b2;
};

struct AggregateResult {
  Var output;   // [B,L,d]
  Var weights;  // [B,k] fusion weights, rows sum to 1
  bool fallback = false;
};

inline constexpr double kFusionFloor = 1e-12;

/// Fuses branch outputs with w_i = a_i alpha_i / sum_j a_j alpha_j, where alpha comes from a
/// two-layer network over each branch's channel mean at the final time step.
inline AggregateResult adaptive_aggregate(const std::vector<Var>& branches, const Var& amplitudes,
                                          const AggregationWeights& net) {
  if (branches.empty()) fail(ErrorKind::kConfig, "adaptive_aggregate needs at least one branch");
  const std::size_t k = branches.size();
  const Shape& bs = branches[0].shape();
  const std::size_t B = bs[0], L = bs[1];
  if (amplitudes.shape() != Shape{B, k}) {
    fail(ErrorKind::kDimension, "amplitude weights " + shape_str(amplitudes.shape()) + " do not match " +
                                    std::to_string(k) + " branches of batch " + std::to_string(B));
  }
  Tape& tape = *amplitudes.tape();
  std::vector<Var> last;
  for (const Var& y : branches) last.push_back(mean_lastdim(slice(y, 1, L - 1, 1)));  // [B,1]
  Var u = k == 1 ? last[0] : concat(last, 1);                                          // [B,k]
  Var hidden = relu(matmul(u, net.w1) + net.b1);
  Var alpha = softmax_lastdim(matmul(hidden, net.w2) + net.b2);
  Var numer = amplitudes * alpha;

  AggregateResult result;
  Tensor guard(Shape{B, 1}, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += numer.value()[b * k + i];
    if (!(s >= kFusionFloor)) {
      guard[b] = 1.0;
      result.fallback = true;
    }
  }
  if (result.fallback) {
    warn("period fusion weights degenerate (sum below 1e-12); using uniform weights");
    numer = numer + tape.constant(guard);
  }
  Var denom = reshape(scale(mean_lastdim(numer), static_cast<double>(k)), {B, 1});
  result.weights = numer / denom;

  Var acc;
  for (std::size_t i = 0; i < k; ++i) {
    Var wi = reshape(slice(result.weights, 1, i, 1), {B, 1, 1});
    Var term = branches[i] * wi;
    acc = i == 0 ? term : acc + term;
  }
  result.output = acc;
  return result;
}

struct PeriodicBlockResult {
  Var output;
  PeriodSet periods;
  Var fusion_weights;
};

/// One periodic block on x[B,T+H,d]: periods are detected on the first `lookback` steps, each
/// period gets a fold -> inception -> unfold branch, and the fused branches are added to x.
inline PeriodicBlockResult periodic_block(const Var& x, PeriodicBlockParams& params, const PPTNetConfig& cfg) {
  Tape& tape = *x.tape();
  const std::size_t total = x.shape()[1];
  Var history = slice(x, 1, 0, cfg.lookback);
  PeriodicBlockResult out;
  out.periods = topk_periods(amplitude_spectrum(history.value()), cfg.top_k, cfg.lookback, {.allow_zero_amplitude = true});
  Var amplitudes = per_sample_weights(history, out.periods.frequencies());

  if (params.kernels.size() != cfg.kernel_sizes.size()) {
    fail(ErrorKind::kConfig, "periodic block has " + std::to_string(params.kernels.size()) + " kernels, expected " +
                                 std::to_string(cfg.kernel_sizes.size()));
  }
  std::vector<Var> kernels;
  for (auto& k : params.kernels) kernels.push_back(tape.leaf(k));
  std::vector<Var> branches;
  for (const auto& e : out.periods.entries) {
    branches.push_back(inverse_reshape(inception_2d(pad_and_reshape(x, e.period, total), kernels), total));
  }
  AggregationWeights net{tape.leaf(params.agg_w1), tape.leaf(params.agg_b1),
                         tape.leaf(params.agg_w2), tape.leaf(params.agg_b2)};
  AggregateResult agg = adaptive_aggregate(branches, amplitudes, net);
  out.output = agg.output + x;
  out.fusion_weights = agg.weights;
  return out;
}

/// M(i,j) = -inf for j > i, else 0.
inline Tensor causal_mask(std::size_t n) {
  Tensor m(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.at({i, j}) = -std::numeric_limits<double>::infinity();
  return m;
}

/// softmax(q k^T / sqrt(d_k) + mask) v over [.., S, d_k] operands.
inline Var masked_attention(const Var& q, const Var& k, const Var& v, const Tensor& mask) {
  const std::size_t dk = q.shape().back();
  const std::size_t r = k.shape().size();
  std::vector<std::size_t> axes(r);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[r - 1], axes[r - 2]);
  Var scores = scale(matmul(q, permute(k, axes)), 1.0 / std::sqrt(static_cast<double>(dk)));
  return matmul(softmax_lastdim(scores + q.tape()->constant(mask)), v);
}

struct AttentionWeights {
  Var wq, wk, wv, wo, bo;
};

/// Causal multi-head self-attention over x[B,S,d]; heads are concatenated and projected.
inline Var multi_head_self_attention(const Var& x, const AttentionWeights& w, std::size_t heads) {
  const Shape& s = x.shape();
  const std::size_t B = s[0], S = s[1], d = s[2];
  if (d % heads != 0) fail(ErrorKind::kConfig, "d_model not divisible by heads");
  const std::size_t dk = d / heads;
  auto split = [&](const Var& t) { return permute(reshape(t, {B, S, heads, dk}), {0, 2, 1, 3}); };
  Var q = split(matmul(x, w.wq)), k = split(matmul(x, w.wk)), v = split(matmul(x, w.wv));
  Var att = masked_attention(q, k, v, causal_mask(S));
  Var merged = reshape(permute(att, {0, 2, 1, 3}), {B, S, d});
  return matmul(merged, w.wo) + w.bo;
}

struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  Var apply(const Var& x) const { return rate > 0.0 && rng ? dropout(x, rate, *rng) : x; }
};

/// Self-attention sublayer then position-wise FFN sublayer, each with residual + layer norm.
inline Var decoder_layer(const Var& x, DecoderLayerParams& p, std::size_t heads, const DropoutContext& drop) {
  Tape& tape = *x.tape();
  auto leaf = [&](Param& prm) { return tape.leaf(prm); };
  AttentionWeights aw{leaf(p.wq), leaf(p.wk), leaf(p.wv), leaf(p.wo), leaf(p.bo)};
  Var att = drop.apply(multi_head_self_attention(x, aw, heads));
  Var h = layer_norm(x + att, leaf(p.ln1_gain), leaf(p.ln1_bias));
  Var ff = matmul(relu(matmul(h, leaf(p.ff_w1)) + leaf(p.ff_b1)), leaf(p.ff_w2)) + leaf(p.ff_b2);
  return layer_norm(h + drop.apply(ff), leaf(p.ln2_gain), leaf(p.ln2_bias));
}

/// Runs the decoder stack on already-conditioned queries.
inline Var decoder_stack(const Var& queries, PPTNetParams& params, const PPTNetConfig& cfg,
                         const DropoutContext& drop) {
  Var h = queries;
  for (auto& layer : params.decoder) h = decoder_layer(h, layer, cfg.heads, drop);
  return h;
}

/// Q^(0) = Q_0 (broadcast over batch) + enc[:, T:T+H, :], then the decoder stack. Returns [B,H,d].
inline Var decoder_forward(const Var& enc, PPTNetParams& params, const PPTNetConfig& cfg,
                           const DropoutContext& drop = {}) {
  Tape& tape = *enc.tape();
  Var q0 = tape.leaf(params.query) + slice(enc, 1, cfg.lookback, cfg.horizon);
  return decoder_stack(q0, params, cfg, drop);
}

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // dropout stream; required when training with dropout > 0
};

struct ForwardResult {
  Var output;  // [B,H,C], standardized units
  std::vector<PeriodSet> periods;
  std::vector<Var> fusion_weights;
};

namespace detail {

inline void check_finite(const Var& v, const std::string& stage) {
  if (!v.value().all_finite()) fail(ErrorKind::kNumeric, "non-finite values after " + stage);
}

}  // namespace detail

/// Full forward pass x[B,T,C] -> forecast [B,H,C].
inline ForwardResult forward(Tape& tape, const Tensor& x, PPTNetParams& params, const PPTNetConfig& cfg,
                             ForwardOptions opts = {}) {
  cfg.validate();
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != cfg.lookback || s[2] != cfg.input_features) {
    fail(ErrorKind::kDimension, "forward expects input [B," + std::to_string(cfg.lookback) + "," +
                                    std::to_string(cfg.input_features) + "], got " + shape_str(s));
  }
  if (!x.all_finite()) fail(ErrorKind::kNumeric, "non-finite values in model input");
  const std::size_t B = s[0], d = cfg.d_model;
  DropoutContext drop;
  if (opts.training && cfg.dropout > 0.0) {
    if (!opts.rng) fail(ErrorKind::kConfig, "training forward with dropout needs an RNG");
    drop = {cfg.dropout, opts.rng};
  }
  auto leaf = [&](Param& p) { return tape.leaf(p); };

  ForwardResult result;
  Var h = embed(tape.constant(x), leaf(params.embedding));
  detail::check_finite(h, "embedding");
  h = concat({h, tape.constant(Tensor(Shape{B, cfg.horizon, d}, 0.0))}, 1);

  if (cfg.use_periodic_blocks) {
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
      PeriodicBlockResult blk = periodic_block(h, params.blocks[b], cfg);
      h = blk.output;
      detail::check_finite(h, "periodic block " + std::to_string(b));
      result.periods.push_back(std::move(blk.periods));
      result.fusion_weights.push_back(blk.fusion_weights);
    }
  }

  Var dec;
  if (cfg.use_decoder && cfg.use_periodic_blocks) {
    dec = decoder_forward(h, params, cfg, drop);
  } else if (cfg.use_decoder) {
    // Decoder alone: causal self-attention over the whole embedded sequence, queries added on
    // the forecast rows; the last H positions are read out.
    Var q = concat({tape.constant(Tensor(Shape{cfg.lookback, d}, 0.0)), leaf(params.query)}, 0);
    dec = slice(decoder_stack(h + q, params, cfg, drop), 1, cfg.lookback, cfg.horizon);
  } else {
    dec = slice(h, 1, cfg.lookback, cfg.horizon);
  }
  detail::check_finite(dec, "decoder");
  result.output = matmul(dec, leaf(params.out_w)) + leaf(params.out_b);
  detail::check_finite(result.output, "output projection");
  return result;
}

/// Forward pass without gradient bookkeeping beyond the throwaway tape.
inline Tensor predict(const Tensor& x, PPTNetParams& params, const PPTNetConfig& cfg) {
  Tape tape;
  return forward(tape, x, params, cfg).output.value();
}

}  // namespace pptflow
