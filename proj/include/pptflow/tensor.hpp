#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pptflow/error.hpp"

namespace pptflow {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

/// Dense row-major n-dimensional array of doubles. A rank-0 tensor is a scalar.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_size(shape_)) {
      fail(ErrorKind::kDimension, "tensor data length " + std::to_string(data_.size()) +
                                      " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor(Shape{values.size()}, std::vector<double>(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) fail(ErrorKind::kDimension, "ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(Shape{r, c}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  /// Extent of an axis; negative axes count from the end.
  std::size_t dim(int axis) const { return shape_.at(normalize_axis(axis)); }

  std::size_t normalize_axis(int axis) const {
    const int r = static_cast<int>(shape_.size());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) fail(ErrorKind::kDimension, "axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
    return static_cast<std::size_t>(a);
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
  double at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

  double item() const {
    if (data_.size() != 1) fail(ErrorKind::kDimension, "item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      fail(ErrorKind::kDimension, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
      fail(ErrorKind::kDimension, "in-place add of " + shape_str(other.shape_) + " into " + shape_str(shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  bool operator==(const Tensor& other) const = default;

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) fail(ErrorKind::kDimension, "tensor extents must be >= 1, got " + shape_str(shape_));
    }
  }

  std::size_t offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) fail(ErrorKind::kDimension, "index rank mismatch for " + shape_str(shape_));
    std::size_t off = 0;
    std::size_t i = 0;
    for (auto v : index) {
      if (v >= shape_[i]) fail(ErrorKind::kDimension, "index out of range for " + shape_str(shape_));
      off = off * shape_[i] + v;
      ++i;
    }
    return off;
  }

  Shape shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Broadcasting helpers (numpy rules, right-aligned).

inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      fail(ErrorKind::kDimension, "shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcast-compatible");
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

/// Strides of `shape` viewed inside `out` (zero on broadcast axes).
inline Shape broadcast_strides(const Shape& shape, const Shape& out) {
  Shape strides(out.size(), 0);
  const Shape own = row_major_strides(shape);
  const std::size_t lead = out.size() - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    strides[lead + i] = shape[i] == 1 ? 0 : own[i];
  }
  return strides;
}

/// Calls fn(out_index, a_offset, b_offset) over the broadcast product of a and b.
template <typename Fn>
void for_each_broadcast(const Shape& a, const Shape& b, const Shape& out, Fn&& fn) {
  const Shape sa = broadcast_strides(a, out);
  const Shape sb = broadcast_strides(b, out);
  const std::size_t n = shape_size(out);
  const std::size_t r = out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, oa, ob);
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < out[ax]) {
        oa += sa[ax];
        ob += sb[ax];
        break;
      }
      oa -= sa[ax] * (out[ax] - 1);
      ob -= sb[ax] * (out[ax] - 1);
      idx[ax] = 0;
    }
  }
}

template <typename Op>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, Op op) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return out;
  }
  Shape os = broadcast_shapes(a.shape(), b.shape());
  Tensor out(os);
  for_each_broadcast(a.shape(), b.shape(), os, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = op(a[ia], b[ib]);
  });
  return out;
}

/// Sums a broadcast gradient back down to `shape`.
inline Tensor reduce_to_shape(const Tensor& grad, const Shape& shape) {
  if (grad.shape() == shape) return grad;
  Tensor out(shape, 0.0);
  for_each_broadcast(grad.shape(), shape, grad.shape(), [&](std::size_t i, std::size_t, std::size_t io) {
    out[io] += grad[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dense kernels shared by the taped operations.

/// Batched matrix product a[..,m,k] x b[..,k,n] with broadcast leading axes.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    fail(ErrorKind::kDimension, "matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(-2), k = a.dim(-1), kb = b.dim(-2), n = b.dim(-1);
  if (k != kb) {
    fail(ErrorKind::kDimension, "matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  Shape lead;
  try {
    lead = broadcast_shapes(lead_a, lead_b);
  } catch (const Error&) {
    fail(ErrorKind::kDimension, "matmul leading extents incompatible: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  const std::size_t mat_a = m * k, mat_b = k * n, mat_o = m * n;
  auto kernel = [&](std::size_t bo, std::size_t ba, std::size_t bb) {
    const double* A = pa + ba * mat_a;
    const double* B = pb + bb * mat_b;
    double* C = po + bo * mat_o;
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        if (av == 0.0) continue;
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  };
  if (lead.empty()) {
    kernel(0, 0, 0);
  } else {
    // Batch offsets are counted in whole matrices.
    for_each_broadcast(lead_a.empty() ? Shape{1} : lead_a, lead_b.empty() ? Shape{1} : lead_b,
                       lead, [&](std::size_t io, std::size_t ia, std::size_t ib) { kernel(io, ia, ib); });
  }
  return out;
}

/// General axis permutation: out.shape[i] = in.shape[axes[i]].
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.rank();
  if (axes.size() != r) fail(ErrorKind::kDimension, "permute axes rank mismatch for " + shape_str(x.shape()));
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) fail(ErrorKind::kDimension, "permute axes are not a permutation");
    seen[axes[i]] = true;
    out_shape[i] = x.shape()[axes[i]];
  }
  const Shape in_strides = row_major_strides(x.shape());
  Shape src_strides(r);
  for (std::size_t i = 0; i < r; ++i) src_strides[i] = in_strides[axes[i]];
  Tensor out(out_shape);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[src];
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < out_shape[ax]) {
        src += src_strides[ax];
        break;
      }
      src -= src_strides[ax] * (out_shape[ax] - 1);
      idx[ax] = 0;
    }
  }
  return out;
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& axes) {
  std::vector<std::size_t> inv(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = i;
  return inv;
}

inline Tensor transpose_last2(const Tensor& x) {
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

/// Numerically stable softmax over the last axis; -inf entries map to exactly 0.
inline Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t d = x.rank() == 0 ? 1 : x.dim(-1);
  const std::size_t rows = x.size() / d;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * d;
    double* o = out.data().data() + r * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) mx = std::max(mx, in[j]);
    if (mx == -std::numeric_limits<double>::infinity()) {
      fail(ErrorKind::kNumeric, "softmax over a fully masked slice");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = in[j] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < d; ++j) o[j] /= sum;
  }
  return out;
}

/// Spatial extents of a [B,C,H,W] tensor plus a square odd kernel width.
struct ConvGeometry {
  std::size_t batch, cin, cout, height, width, ksize;
};

inline ConvGeometry conv_geometry(const Shape& x, const Shape& kernel) {
  if (x.size() != 4 || kernel.size() != 4) {
    fail(ErrorKind::kDimension, "conv2d expects [B,Cin,H,W] input and [Cout,Cin,r,r] kernel, got " +
                                    shape_str(x) + " and " + shape_str(kernel));
  }
  if (kernel[2] != kernel[3]) fail(ErrorKind::kConfig, "conv2d kernel must be square, got " + shape_str(kernel));
  if (kernel[2] % 2 == 0) fail(ErrorKind::kConfig, "conv2d kernel size must be odd, got " + std::to_string(kernel[2]));
  if (kernel[1] != x[1]) {
    fail(ErrorKind::kDimension, "conv2d channel mismatch: input " + shape_str(x) + ", kernel " + shape_str(kernel));
  }
  return {x[0], x[1], kernel[0], x[2], x[3], kernel[2]};
}

// The three convolution kernels share one loop nest; `Mode` picks which operand is written.
namespace detail {

enum class ConvMode { kForward, kInputGrad, kKernelGrad };

template <ConvMode Mode>
void conv2d_loop(const ConvGeometry& g, const double* x, const double* k, const double* y, double* out) {
  const long pad = static_cast<long>(g.ksize / 2);
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const std::size_t plane = g.height * g.width;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      for (std::size_t ci = 0; ci < g.cin; ++ci) {
        const std::size_t xoff = (b * g.cin + ci) * plane;
        const std::size_t yoff = (b * g.cout + co) * plane;
        const std::size_t koff = (co * g.cin + ci) * g.ksize * g.ksize;
        for (long ki = 0; ki < static_cast<long>(g.ksize); ++ki) {
          const long di = ki - pad;
          const long i0 = std::max(0L, -di), i1 = std::min(H, H - di);
          for (long kj = 0; kj < static_cast<long>(g.ksize); ++kj) {
            const long dj = kj - pad;
            const long j0 = std::max(0L, -dj), j1 = std::min(W, W - dj);
            const std::size_t kidx = koff + static_cast<std::size_t>(ki) * g.ksize + static_cast<std::size_t>(kj);
            if constexpr (Mode == ConvMode::kKernelGrad) {
              double acc = 0.0;
              for (long i = i0; i < i1; ++i) {
                const double* xr = x + xoff + static_cast<std::size_t>((i + di) * W);
                const double* yr = y + yoff + static_cast<std::size_t>(i * W);
                for (long j = j0; j < j1; ++j) acc += xr[j + dj] * yr[j];
              }
              out[kidx] += acc;
            } else {
              const double kv = k[kidx];
              if (kv == 0.0) continue;
              for (long i = i0; i < i1; ++i) {
                if constexpr (Mode == ConvMode::kForward) {
                  const double* xr = x + xoff + static_cast<std::size_t>((i + di) * W);
                  double* orow = out + yoff + static_cast<std::size_t>(i * W);
                  for (long j = j0; j < j1; ++j) orow[j] += kv * xr[j + dj];
                } else {
                  const double* yr = y + yoff + static_cast<std::size_t>(i * W);
                  double* orow = out + xoff + static_cast<std::size_t>((i + di) * W);
                  for (long j = j0; j < j1; ++j) orow[j + dj] += kv * yr[j];
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2D convolution (cross-correlation) with zero "same" padding of (r-1)/2.
inline Tensor conv2d_same(const Tensor& x, const Tensor& kernel) {
  const ConvGeometry g = conv_geometry(x.shape(), kernel.shape());
  Tensor out(Shape{g.batch, g.cout, g.height, g.width}, 0.0);
  detail::conv2d_loop<detail::ConvMode::kForward>(g, x.data().data(), kernel.data().data(), nullptr,
                                                   out.data().data());
  return out;
}

inline Tensor conv2d_same_input_grad(const Tensor& grad_out, const Tensor& kernel, const Shape& x_shape) {
  const ConvGeometry g = conv_geometry(x_shape, kernel.shape());
  Tensor dx(x_shape, 0.0);
  detail::conv2d_loop<detail::ConvMode::kInputGrad>(g, nullptr, kernel.data().data(), grad_out.data().data(),
                                                     dx.data().data());
  return dx;
}

inline Tensor conv2d_same_kernel_grad(const Tensor& grad_out, const Tensor& x, const Shape& kernel_shape) {
  const ConvGeometry g = conv_geometry(x.shape(), kernel_shape);
  Tensor dk(kernel_shape, 0.0);
  detail::conv2d_loop<detail::ConvMode::kKernelGrad>(g, x.data().data(), nullptr, grad_out.data().data(),
                                                      dk.data().data());
  return dk;
}

}  // namespace pptflow
