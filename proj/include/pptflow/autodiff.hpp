#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pptflow/error.hpp"
#include "pptflow/tensor.hpp"

namespace pptflow {

/// A learnable array with its accumulated gradient.
struct Param {
  Param() = default;
  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor(value.shape(), 0.0); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of primitive operations. Backward walks the record in exact reverse.
///
/// A tape and the Params bound to it form a single-writer unit.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  /// Binds a Param as a leaf; backward adds into param.grad.
  Var leaf(Param& param) {
    Var v = push(param.value, true, nullptr);
    nodes_[v.id()].param = &param;
    return v;
  }

  /// Records an operation. `backward` receives the output gradient and must call accumulate()
  /// for each differentiable input.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  void accumulate(const Var& v, const Tensor& grad) {
    Node& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (grad.shape() != node.value.shape()) {
      fail(ErrorKind::kDimension, "gradient of shape " + shape_str(grad.shape()) + " for value of shape " +
                                      shape_str(node.value.shape()));
    }
    if (!node.has_grad) {
      node.grad = grad;
      node.has_grad = true;
    } else {
      node.grad += grad;
    }
  }

  /// Populates Param grads with d(loss)/d(value). Param grads accumulate across calls.
  void backward(const Var& loss) {
    check_owner(loss);
    const Node& root = nodes_[loss.id()];
    if (root.value.size() != 1) {
      fail(ErrorKind::kDimension, "backward needs a scalar loss, got shape " + shape_str(root.value.shape()));
    }
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    backward_order_.clear();
    Node& start = nodes_[loss.id()];
    start.grad = Tensor(start.value.shape(), 1.0);
    start.has_grad = true;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.has_grad || !node.requires_grad) continue;
      backward_order_.push_back(id);
      if (node.param != nullptr) {
        node.param->grad += node.grad;
      } else if (node.backward) {
        Tensor g = std::move(node.grad);
        node.has_grad = false;
        node.backward(*this, g);
      }
    }
  }

  /// Node ids in the order the last backward() visited them.
  const std::vector<std::size_t>& backward_order() const noexcept { return backward_order_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Param* param = nullptr;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Tensor(), false, requires_grad, nullptr, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) fail(ErrorKind::kConfig, "variable does not belong to this tape");
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> backward_order_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Taped primitives.

inline Var add(const Var& a, const Var& b) {
  Tensor out = broadcast_binary(a.value(), b.value(), std::plus<>());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, reduce_to_shape(g, a.shape()));
    t.accumulate(b, reduce_to_shape(g, b.shape()));
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tensor out = broadcast_binary(a.value(), b.value(), std::minus<>());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, reduce_to_shape(g, a.shape()));
    Tensor neg = g;
    for (auto& v : neg.data()) v = -v;
    t.accumulate(b, reduce_to_shape(neg, b.shape()));
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tensor out = broadcast_binary(a.value(), b.value(), std::multiplies<>());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, reduce_to_shape(broadcast_binary(g, b.value(), std::multiplies<>()), a.shape()));
    if (t.requires_grad(b)) t.accumulate(b, reduce_to_shape(broadcast_binary(g, a.value(), std::multiplies<>()), b.shape()));
  });
}

inline Var div(const Var& a, const Var& b) {
  Tensor out = broadcast_binary(a.value(), b.value(), std::divides<>());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, reduce_to_shape(broadcast_binary(g, b.value(), std::divides<>()), a.shape()));
    if (t.requires_grad(b)) {
      // d(a/b)/db = -a/b^2
      Tensor q = broadcast_binary(a.value(), b.value(), [](double x, double y) { return -x / (y * y); });
      t.accumulate(b, reduce_to_shape(broadcast_binary(g, q, std::multiplies<>()), b.shape()));
    }
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

inline Var scale(const Var& x, double c) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= c;
  return x.tape()->record(std::move(out), {x}, [x, c](Tape& t, const Tensor& g) {
    Tensor gx = g;
    for (auto& v : gx.data()) v *= c;
    t.accumulate(x, gx);
  });
}

inline Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor gx = g;
    const Tensor& in = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = in[i] > 0.0 ? gx[i] : 0.0;
    t.accumulate(x, gx);
  });
}

inline Var square(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= v;
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor gx = g;
    const Tensor& in = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 2.0 * in[i];
    t.accumulate(x, gx);
  });
}

/// Elementwise sqrt(re^2 + im^2); gradient taken as 0 where the magnitude vanishes.
inline Var magnitude(const Var& re, const Var& im) {
  if (re.shape() != im.shape()) {
    fail(ErrorKind::kDimension, "magnitude operands differ: " + shape_str(re.shape()) + " vs " + shape_str(im.shape()));
  }
  Tensor out(re.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::hypot(re.value()[i], im.value()[i]);
  return re.tape()->record(out, {re, im}, [re, im, out](Tape& t, const Tensor& g) {
    Tensor gr(out.shape()), gi(out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double m = out[i];
      gr[i] = m > 0.0 ? g[i] * re.value()[i] / m : 0.0;
      gi[i] = m > 0.0 ? g[i] * im.value()[i] / m : 0.0;
    }
    t.accumulate(re, gr);
    t.accumulate(im, gi);
  });
}

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape()->record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
    t.accumulate(x, Tensor(x.shape(), g.item()));
  });
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

/// Mean over the last axis; the axis is dropped.
inline Var mean_lastdim(const Var& x) {
  const Tensor& in = x.value();
  const std::size_t d = in.dim(-1);
  const std::size_t rows = in.size() / d;
  Shape os(in.shape().begin(), in.shape().end() - 1);
  Tensor out(os);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += in[r * d + j];
    out[r] = s / static_cast<double>(d);
  }
  return x.tape()->record(std::move(out), {x}, [x, d, rows](Tape& t, const Tensor& g) {
    Tensor gx(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = g[r] / static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] = v;
    }
    t.accumulate(x, gx);
  });
}

inline Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    t.accumulate(x, g.reshaped(x.shape()));
  });
}

inline Var permute(const Var& x, std::vector<std::size_t> axes) {
  Tensor out = permute(x.value(), axes);
  return x.tape()->record(std::move(out), {x}, [x, axes](Tape& t, const Tensor& g) {
    t.accumulate(x, permute(g, inverse_permutation(axes)));
  });
}

namespace detail {

/// Views a tensor as [outer, axis, inner] around `axis`.
struct AxisSplit {
  std::size_t outer, extent, inner;
};

inline AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

/// Contiguous range [start, start+length) along `axis`.
inline Var slice(const Var& x, int axis_in, std::size_t start, std::size_t length) {
  const Tensor& in = x.value();
  const std::size_t axis = in.normalize_axis(axis_in);
  if (length == 0 || start + length > in.shape()[axis]) {
    fail(ErrorKind::kDimension, "slice [" + std::to_string(start) + "," + std::to_string(start + length) +
                                    ") out of range on axis " + std::to_string(axis) + " of " + shape_str(in.shape()));
  }
  const auto s = detail::split_at(in.shape(), axis);
  Shape os = in.shape();
  os[axis] = length;
  Tensor out(os);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = in.data().data() + (o * s.extent + start) * s.inner;
    std::copy(src, src + length * s.inner, out.data().data() + o * length * s.inner);
  }
  return x.tape()->record(std::move(out), {x}, [x, s, start, length](Tape& t, const Tensor& g) {
    Tensor gx(x.shape(), 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = g.data().data() + o * length * s.inner;
      std::copy(src, src + length * s.inner, gx.data().data() + (o * s.extent + start) * s.inner);
    }
    t.accumulate(x, gx);
  });
}

/// Concatenation along `axis`; all other extents must agree.
inline Var concat(const std::vector<Var>& parts, int axis_in) {
  if (parts.empty()) fail(ErrorKind::kDimension, "concat of zero tensors");
  const Tensor& first = parts.front().value();
  const std::size_t axis = first.normalize_axis(axis_in);
  Shape os = first.shape();
  os[axis] = 0;
  for (const Var& p : parts) {
    const Shape& ps = p.shape();
    bool ok = ps.size() == first.rank();
    for (std::size_t i = 0; ok && i < ps.size(); ++i) ok = i == axis || ps[i] == first.shape()[i];
    if (!ok) fail(ErrorKind::kDimension, "concat shape mismatch: " + shape_str(ps) + " vs " + shape_str(first.shape()));
    os[axis] += ps[axis];
  }
  Tensor out(os);
  const auto so = detail::split_at(os, axis);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const auto sp = detail::split_at(p.shape(), axis);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = p.value().data().data() + o * sp.extent * sp.inner;
      std::copy(src, src + sp.extent * sp.inner, out.data().data() + (o * so.extent + off) * so.inner);
    }
    off += sp.extent;
  }
  return parts.front().tape()->record(std::move(out), parts, [parts, offsets, so](Tape& t, const Tensor& g) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!t.requires_grad(parts[i])) continue;
      const Shape& ps = parts[i].shape();
      Tensor gp(ps);
      const std::size_t ext = gp.size() / (so.outer * so.inner);
      for (std::size_t o = 0; o < so.outer; ++o) {
        const double* src = g.data().data() + (o * so.extent + offsets[i]) * so.inner;
        std::copy(src, src + ext * so.inner, gp.data().data() + o * ext * so.inner);
      }
      t.accumulate(parts[i], gp);
    }
  });
}

inline Var matmul(const Var& a, const Var& b) {
  Tensor out = matmul(a.value(), b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, reduce_to_shape(matmul(g, transpose_last2(b.value())), a.shape()));
    if (t.requires_grad(b)) t.accumulate(b, reduce_to_shape(matmul(transpose_last2(a.value()), g), b.shape()));
  });
}

inline Var conv2d_same(const Var& x, const Var& kernel) {
  Tensor out = conv2d_same(x.value(), kernel.value());
  return x.tape()->record(std::move(out), {x, kernel}, [x, kernel](Tape& t, const Tensor& g) {
    if (t.requires_grad(x)) t.accumulate(x, conv2d_same_input_grad(g, kernel.value(), x.shape()));
    if (t.requires_grad(kernel)) t.accumulate(kernel, conv2d_same_kernel_grad(g, x.value(), kernel.shape()));
  });
}

inline Var softmax_lastdim(const Var& x) {
  Tensor out = softmax_lastdim(x.value());
  return x.tape()->record(out, {x}, [x, out](Tape& t, const Tensor& g) {
    const std::size_t d = out.rank() == 0 ? 1 : out.dim(-1);
    const std::size_t rows = out.size() / d;
    Tensor gx(out.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * out[r * d + j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] = out[r * d + j] * (g[r * d + j] - dot);
    }
    t.accumulate(x, gx);
  });
}

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes each last-axis slice to zero mean / unit variance, then applies gain and bias.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  const Tensor& in = x.value();
  const std::size_t d = in.dim(-1);
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    fail(ErrorKind::kDimension, "layer_norm affine shapes " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                                    " do not match feature extent " + std::to_string(d));
  }
  const std::size_t rows = in.size() / d;
  Tensor xhat(in.shape()), out(in.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = in.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += v[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (v[j] - mu) * (v[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (v[j] - mu) * inv_std[r];
      out[r * d + j] = gain.value()[j] * xhat[r * d + j] + bias.value()[j];
    }
  }
  return x.tape()->record(std::move(out), {x, gain, bias},
                          [x, gain, bias, xhat, inv_std, d, rows](Tape& t, const Tensor& g) {
    Tensor gx(x.shape()), gg(Shape{d}, 0.0), gb(Shape{d}, 0.0);
    const double n = static_cast<double>(d);
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double gy = g[r * d + j];
        gg[j] += gy * xhat[r * d + j];
        gb[j] += gy;
        dxhat[j] = gy * gain.value()[j];
        s1 += dxhat[j];
        s2 += dxhat[j] * xhat[r * d + j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        gx[r * d + j] = inv_std[r] / n * (n * dxhat[j] - s1 - xhat[r * d + j] * s2);
      }
    }
    t.accumulate(x, gx);
    t.accumulate(gain, gg);
    t.accumulate(bias, gb);
  });
}

/// Inverted dropout: zeroes entries with probability `rate` and rescales survivors.
inline Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) fail(ErrorKind::kConfig, "dropout rate must be < 1");
  Tensor mask(x.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  for (auto& m : mask.data()) m = keep(rng) ? s : 0.0;
  return mul(x, x.tape()->constant(std::move(mask)));
}

}  // namespace pptflow
