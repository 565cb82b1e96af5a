#include "mans/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mans/errors.hpp"
#include "mans/kernels.hpp"

namespace mans::ops {

using kernels::Trans;

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

template <typename T>
T sigmoid_value(T x) {
  // Split by sign so exp never overflows.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> elementwise(Tape<T>& tape, Elementwise kind, const Tensor<T>& a, const Tensor<T>* b) {
  const bool binary = kind == Elementwise::kAdd || kind == Elementwise::kSub ||
                      kind == Elementwise::kMul;
  if (binary) {
    if (b == nullptr) throw ArgumentError("elementwise: binary kind needs a second operand");
    require_same_shape("elementwise", a, *b);
  }
  Tensor<T> out(a.shape());
  const std::size_t n = a.numel();
  const T* x = a.raw();
  const T* y = binary ? b->raw() : nullptr;
  T* o = out.raw();
  switch (kind) {
    case Elementwise::kAdd:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] + y[i];
      break;
    case Elementwise::kSub:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] - y[i];
      break;
    case Elementwise::kMul:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * y[i];
      break;
    case Elementwise::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) o[i] = sigmoid_value(x[i]);
      break;
    case Elementwise::kTanh:
      for (std::size_t i = 0; i < n; ++i) o[i] = std::tanh(x[i]);
      break;
    case Elementwise::kRelu:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] > T(0) ? x[i] : T(0);
      break;
  }
  if (!tape.wants({&a, b})) return out;

  static constexpr const char* kNames[] = {"add", "sub", "mul", "sigmoid", "tanh", "relu"};
  Tensor<T> lhs = a;
  Tensor<T> rhs = binary ? *b : Tensor<T>();
  std::vector<Tensor<T>> inputs{lhs};
  if (binary) inputs.push_back(rhs);
  tape.record(kNames[static_cast<int>(kind)], std::move(inputs), out,
              [kind, lhs, rhs, out]() mutable {
                const auto g = out.grad();
                const std::size_t n = g.size();
                if (lhs.requires_grad()) {
                  auto da = lhs.grad();
                  const T* y = out.raw();
                  const T* x = lhs.raw();
                  switch (kind) {
                    case Elementwise::kAdd:
                    case Elementwise::kSub:
                      for (std::size_t i = 0; i < n; ++i) da[i] += g[i];
                      break;
                    case Elementwise::kMul:
                      for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * rhs.raw()[i];
                      break;
                    case Elementwise::kSigmoid:
                      for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * y[i] * (T(1) - y[i]);
                      break;
                    case Elementwise::kTanh:
                      for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * (T(1) - y[i] * y[i]);
                      break;
                    case Elementwise::kRelu:
                      // Subgradient at exactly zero is zero.
                      for (std::size_t i = 0; i < n; ++i) da[i] += x[i] > T(0) ? g[i] : T(0);
                      break;
                  }
                }
                if (rhs.defined() && rhs.requires_grad()) {
                  auto db = rhs.grad();
                  if (kind == Elementwise::kAdd) {
                    for (std::size_t i = 0; i < n; ++i) db[i] += g[i];
                  } else if (kind == Elementwise::kSub) {
                    for (std::size_t i = 0; i < n; ++i) db[i] -= g[i];
                  } else {
                    for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * lhs.raw()[i];
                  }
                }
              });
  return out;
}

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2, "left operand");
  require_rank("matmul", b, 2, "right operand");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  const int m = static_cast<int>(a.dim(0));
  const int k = static_cast<int>(a.dim(1));
  const int p = static_cast<int>(b.dim(1));
  Tensor<T> out(Shape{a.dim(0), b.dim(1)});
  kernels::gemm<T>(Trans::kNo, Trans::kNo, m, p, k, T(1), a.raw(), k, b.raw(), p, T(0),
                   out.raw(), p);
  if (!tape.wants({&a, &b})) return out;
  tape.record("matmul", {a, b}, out, [a = a, b = b, out, m, k, p]() mutable {
    const T* g = out.grad().data();
    if (a.requires_grad()) {
      kernels::gemm<T>(Trans::kNo, Trans::kYes, m, k, p, T(1), g, p, b.raw(), p, T(1),
                       a.grad().data(), k);
    }
    if (b.requires_grad()) {
      kernels::gemm<T>(Trans::kYes, Trans::kNo, k, p, m, T(1), a.raw(), k, g, p, T(1),
                       b.grad().data(), p);
    }
  });
  return out;
}

template <typename T>
Tensor<T> affine(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_rank("affine", x, 2, "input");
  require_rank("affine", w, 2, "weight");
  if (x.dim(1) != w.dim(0) || bias.numel() != w.dim(1)) {
    throw DimensionError("affine: incompatible shapes " + shape_string(x.shape()) + ", " +
                         shape_string(w.shape()) + ", bias " + shape_string(bias.shape()));
  }
  const int rows = static_cast<int>(x.dim(0));
  const int din = static_cast<int>(x.dim(1));
  const int dout = static_cast<int>(w.dim(1));
  Tensor<T> out(Shape{x.dim(0), w.dim(1)});
  for (int r = 0; r < rows; ++r) {
    std::copy(bias.raw(), bias.raw() + dout, out.raw() + static_cast<std::size_t>(r) * dout);
  }
  kernels::gemm<T>(Trans::kNo, Trans::kNo, rows, dout, din, T(1), x.raw(), din, w.raw(), dout,
                   T(1), out.raw(), dout);
  if (!tape.wants({&x, &w, &bias})) return out;
  tape.record("affine", {x, w, bias}, out, [x = x, w = w, bias = bias, out, rows, din, dout]() mutable {
    const T* g = out.grad().data();
    if (x.requires_grad()) {
      kernels::gemm<T>(Trans::kNo, Trans::kYes, rows, din, dout, T(1), g, dout, w.raw(), dout,
                       T(1), x.grad().data(), din);
    }
    if (w.requires_grad()) {
      kernels::gemm<T>(Trans::kYes, Trans::kNo, din, dout, rows, T(1), x.raw(), din, g, dout,
                       T(1), w.grad().data(), dout);
    }
    if (bias.requires_grad()) {
      auto db = bias.grad();
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < dout; ++c) db[c] += g[static_cast<std::size_t>(r) * dout + c];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> reduce_mean(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw IndexError("reduce_mean: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(x.shape()));
  }
  const Shape& in = x.shape();
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t len = in[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (i != axis) out_shape.push_back(in[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor<T> out(out_shape);
  const T inv = T(1) / static_cast<T>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      T s = T(0);
      for (std::size_t l = 0; l < len; ++l) s += x.raw()[(o * len + l) * inner + i];
      out.raw()[o * inner + i] = s * inv;
    }
  }
  if (!tape.wants({&x})) return out;
  tape.record("reduce_mean", {x}, out, [x = x, out, outer, inner, len, inv]() mutable {
    const auto g = out.grad();
    auto dx = x.grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t i = 0; i < inner; ++i) dx[(o * len + l) * inner + i] += g[o * inner + i] * inv;
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> duplicate_cols(Tape<T>& tape, const Tensor<T>& x, std::size_t k) {
  if (x.rank() != 2 || x.dim(1) != 1) {
    throw DimensionError("duplicate_cols: expected a [T x 1] column, got " +
                         shape_string(x.shape()));
  }
  if (k == 0) throw ArgumentError("duplicate_cols: copy count must be at least 1");
  const std::size_t rows = x.dim(0);
  Tensor<T> out(Shape{rows, k});
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(out.raw() + r * k, k, x.raw()[r]);
  }
  if (!tape.wants({&x})) return out;
  tape.record("duplicate_cols", {x}, out, [x = x, out, rows, k]() mutable {
    const auto g = out.grad();
    auto dx = x.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      T s = T(0);
      for (std::size_t c = 0; c < k; ++c) s += g[r * k + c];
      dx[r] += s;
    }
  });
  return out;
}

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernels, int stride,
                 int pad) {
  require_rank("conv2d", x, 4, "input");
  require_rank("conv2d", kernels, 4, "kernels");
  if (kernels.dim(1) != x.dim(1) || kernels.dim(2) != kernels.dim(3)) {
    throw DimensionError("conv2d: kernels " + shape_string(kernels.shape()) +
                         " do not fit input " + shape_string(x.shape()));
  }
  if (stride < 1 || pad < 0) throw ArgumentError("conv2d: stride must be >= 1 and pad >= 0");
  const kernels::ConvGeometry geom{static_cast<int>(x.dim(1)), static_cast<int>(x.dim(2)),
                                   static_cast<int>(x.dim(3)), static_cast<int>(kernels.dim(2)),
                                   stride, pad};
  if (geom.height + 2 * pad < geom.kernel || geom.width + 2 * pad < geom.kernel) {
    throw DimensionError("conv2d: kernel " + shape_string(kernels.shape()) +
                         " larger than padded input " + shape_string(x.shape()));
  }
  const int batch = static_cast<int>(x.dim(0));
  const int cout = static_cast<int>(kernels.dim(0));
  const int oh = geom.out_height();
  const int ow = geom.out_width();
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t ld = plane * batch;
  const std::size_t in_size = static_cast<std::size_t>(geom.channels) * geom.height * geom.width;
  const int patch = geom.patch_size();

  auto unfold = [geom, batch, plane, ld, in_size](const T* images, std::vector<T>& cols) {
    cols.resize(static_cast<std::size_t>(geom.patch_size()) * ld);
    for (int b = 0; b < batch; ++b) {
      kernels::im2col<T>(geom, images + b * in_size, cols.data() + b * plane, ld);
    }
  };

  std::vector<T> cols;
  unfold(x.raw(), cols);
  std::vector<T> result(static_cast<std::size_t>(cout) * ld);
  kernels::gemm<T>(Trans::kNo, Trans::kNo, cout, static_cast<int>(ld), patch, T(1), kernels.raw(),
                   patch, cols.data(), static_cast<int>(ld), T(0), result.data(),
                   static_cast<int>(ld));
  Tensor<T> out(Shape{x.dim(0), kernels.dim(0), static_cast<std::size_t>(oh),
                      static_cast<std::size_t>(ow)});
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < cout; ++c) {
      std::copy_n(result.data() + c * ld + b * plane, plane,
                  out.raw() + (static_cast<std::size_t>(b) * cout + c) * plane);
    }
  }
  if (!tape.wants({&x, &kernels})) return out;

  tape.record("conv2d", {x, kernels}, out,
              [x = x, kernels = kernels, out, geom, batch, cout, plane, ld, in_size, patch, unfold]() mutable {
                const auto g = out.grad();
                std::vector<T> gmat(static_cast<std::size_t>(cout) * ld);
                for (int b = 0; b < batch; ++b) {
                  for (int c = 0; c < cout; ++c) {
                    std::copy_n(g.data() + (static_cast<std::size_t>(b) * cout + c) * plane, plane,
                                gmat.data() + c * ld + b * plane);
                  }
                }
                const int n = static_cast<int>(ld);
                if (kernels.requires_grad()) {
                  std::vector<T> cols;
                  unfold(x.raw(), cols);
                  kernels::gemm<T>(Trans::kNo, Trans::kYes, cout, patch, n, T(1), gmat.data(), n,
                                   cols.data(), n, T(1), kernels.grad().data(), patch);
                }
                if (x.requires_grad()) {
                  std::vector<T> dcols(static_cast<std::size_t>(patch) * ld);
                  kernels::gemm<T>(Trans::kYes, Trans::kNo, patch, n, cout, T(1), kernels.raw(),
                                   patch, gmat.data(), n, T(0), dcols.data(), n);
                  auto dx = x.grad();
                  for (int b = 0; b < batch; ++b) {
                    kernels::col2im<T>(geom, dcols.data() + b * plane, ld,
                                       dx.data() + b * in_size);
                  }
                }
              });
  return out;
}

template <typename T>
Tensor<T> batchnorm2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, BatchNormState<T>& state, Mode mode) {
  require_rank("batchnorm2d", x, 4, "input");
  const std::size_t batch = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != channels || beta.numel() != channels ||
      state.running_mean.numel() != channels || state.running_var.numel() != channels) {
    throw DimensionError("batchnorm2d: per-channel parameters do not match " +
                         shape_string(x.shape()));
  }
  const std::size_t count = batch * plane;
  if (mode == Mode::kTrain && count < 2) {
    throw ArgumentError("batchnorm2d: train mode needs at least two values per channel, got " +
                        shape_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(channels);
  const T eps = state.eps;
  const T momentum = state.momentum;
  const int nch = static_cast<int>(channels);

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < nch; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    T mean;
    T var;
    if (mode == Mode::kTrain) {
      T s = T(0);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.raw() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / static_cast<T>(count);
      T ss = T(0);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.raw() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / static_cast<T>(count);
      state.running_mean.raw()[c] = momentum * state.running_mean.raw()[c] + (T(1) - momentum) * mean;
      state.running_var.raw()[c] = momentum * state.running_var.raw()[c] + (T(1) - momentum) * var;
    } else {
      mean = state.running_mean.raw()[c];
      var = state.running_var.raw()[c];
    }
    const T istd = T(1) / std::sqrt(var + eps);
    inv_std[c] = istd;
    const T gm = gamma.raw()[c];
    const T bt = beta.raw()[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = (x.raw()[off + i] - mean) * istd;
        xhat[off + i] = h;
        out.raw()[off + i] = gm * h + bt;
      }
    }
  }
  if (!tape.wants({&x, &gamma, &beta})) return out;

  tape.record("batchnorm2d", {x, gamma, beta}, out,
              [x = x, gamma = gamma, beta = beta, out, mode, batch, channels, plane, count,
               xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
                const auto g = out.grad();
                const bool need_x = x.requires_grad();
                T* dx = need_x ? x.grad().data() : nullptr;
                T* dgamma = gamma.requires_grad() ? gamma.grad().data() : nullptr;
                T* dbeta = beta.requires_grad() ? beta.grad().data() : nullptr;
                const int nch = static_cast<int>(channels);
#pragma omp parallel for schedule(static)
                for (int ci = 0; ci < nch; ++ci) {
                  const std::size_t c = static_cast<std::size_t>(ci);
                  T sum_g = T(0);
                  T sum_gx = T(0);
                  for (std::size_t b = 0; b < batch; ++b) {
                    const std::size_t off = (b * channels + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                      sum_g += g[off + i];
                      sum_gx += g[off + i] * xhat[off + i];
                    }
                  }
                  if (dgamma) dgamma[c] += sum_gx;
                  if (dbeta) dbeta[c] += sum_g;
                  if (!need_x) continue;
                  const T scale = gamma.raw()[c] * inv_std[c];
                  const T n = static_cast<T>(count);
                  for (std::size_t b = 0; b < batch; ++b) {
                    const std::size_t off = (b * channels + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                      if (mode == Mode::kTrain) {
                        dx[off + i] += scale * (g[off + i] - sum_g / n - xhat[off + i] * sum_gx / n);
                      } else {
                        dx[off + i] += scale * g[off + i];
                      }
                    }
                  }
                }
              });
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank("softmax", logits, 2, "logits");
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  Tensor<T> probs(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * cols;
    T* p = probs.raw() + r * cols;
    const T mx = *std::max_element(z, z + cols);
    T s = T(0);
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] = std::exp(z[c] - mx);
      s += p[c];
    }
    for (std::size_t c = 0; c < cols; ++c) p[c] /= s;
  }
  return probs;
}

template <typename T>
CrossEntropy<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                      std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits, 2, "logits");
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  if (labels.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= cols) {
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(cols) + ")");
    }
  }
  Tensor<T> probs = softmax(logits);
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * cols;
    const T mx = *std::max_element(z, z + cols);
    T s = T(0);
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(z[c] - mx);
    total += std::log(s) - (z[labels[r]] - mx);
  }
  Tensor<T> loss = Tensor<T>::scalar(total / static_cast<T>(rows));
  if (tape.wants({&logits})) {
    std::vector<int> held(labels.begin(), labels.end());
    tape.record("softmax_cross_entropy", {logits}, loss,
                [logits = logits, loss, probs, held = std::move(held), rows, cols]() mutable {
                  const T g = loss.grad()[0] / static_cast<T>(rows);
                  auto dz = logits.grad();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                      const T onehot = static_cast<std::size_t>(held[r]) == c ? T(1) : T(0);
                      dz[r * cols + c] += g * (probs.raw()[r * cols + c] - onehot);
                    }
                  }
                });
  }
  return {loss, probs};
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (!tape.wants({&x})) return out;
  tape.record("reshape", {x}, out, [x = x, out]() mutable {
    const auto g = out.grad();
    auto dx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> swap01(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() < 2) throw DimensionError("swap01: need rank >= 2, got " + shape_string(x.shape()));
  const std::size_t a = x.dim(0);
  const std::size_t b = x.dim(1);
  const std::size_t inner = x.numel() / (a * b);
  Shape shape = x.shape();
  std::swap(shape[0], shape[1]);
  Tensor<T> out(shape);
  const T* src = x.raw();
  T* dst = out.raw();
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) std::copy_n(src + (i * b + j) * inner, inner, dst + (j * a + i) * inner);
  if (!tape.wants({&x})) return out;
  tape.record("swap01", {x}, out, [x = x, out, a, b, inner]() mutable {
    const T* g = out.grad().data();
    T* dx = x.grad().data();
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j)
        for (std::size_t r = 0; r < inner; ++r) dx[(i * b + j) * inner + r] += g[(j * a + i) * inner + r];
  });
  return out;
}

template <typename T>
Tensor<T> select(Tape<T>& tape, const Tensor<T>& x, std::size_t index) {
  if (index >= x.dim(0)) {
    throw IndexError("select: index " + std::to_string(index) + " out of range for " +
                     shape_string(x.shape()));
  }
  Shape shape(x.shape().begin() + 1, x.shape().end());
  if (shape.empty()) shape.push_back(1);
  const std::size_t slice = shape_numel(shape);
  const std::size_t offset = index * slice;
  Tensor<T> out(shape, std::vector<T>(x.raw() + offset, x.raw() + offset + slice));
  if (!tape.wants({&x})) return out;
  tape.record("select", {x}, out, [x = x, out, offset, slice]() mutable {
    const auto g = out.grad();
    auto dx = x.grad();
    for (std::size_t i = 0; i < slice; ++i) dx[offset + i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> stack(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ArgumentError("stack: nothing to stack");
  const Shape& part_shape = parts.front().shape();
  for (const auto& p : parts) require_same_shape("stack", parts.front(), p);
  Shape shape{parts.size()};
  shape.insert(shape.end(), part_shape.begin(), part_shape.end());
  const std::size_t slice = parts.front().numel();
  Tensor<T> out(shape);
  bool any_grad = false;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy_n(parts[i].raw(), slice, out.raw() + i * slice);
    any_grad = any_grad || parts[i].requires_grad();
  }
  if (!tape.recording() || !any_grad) return out;
  tape.record("stack", parts, out, [parts = parts, out, slice]() mutable {
    const auto g = out.grad();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!parts[i].requires_grad()) continue;
      auto d = parts[i].grad();
      for (std::size_t j = 0; j < slice; ++j) d[j] += g[i * slice + j];
    }
  });
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  Tensor<T> out = Tensor<T>::scalar(s);
  if (!tape.wants({&x})) return out;
  tape.record("sum", {x}, out, [x = x, out]() mutable {
    const T g = out.grad()[0];
    for (T& d : x.grad()) d += g;
  });
  return out;
}

#define MANS_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> elementwise<T>(Tape<T>&, Elementwise, const Tensor<T>&, const Tensor<T>*); \
  template Tensor<T> matmul<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> affine<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> reduce_mean<T>(Tape<T>&, const Tensor<T>&, std::size_t);                   \
  template Tensor<T> duplicate_cols<T>(Tape<T>&, const Tensor<T>&, std::size_t);                \
  template Tensor<T> conv2d<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, int, int);         \
  template Tensor<T> batchnorm2d<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                    const Tensor<T>&, BatchNormState<T>&, Mode);                \
  template CrossEntropy<T> softmax_cross_entropy<T>(Tape<T>&, const Tensor<T>&,                 \
                                                    std::span<const int>);                      \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                              \
  template Tensor<T> reshape<T>(Tape<T>&, const Tensor<T>&, Shape);                             \
  template Tensor<T> swap01<T>(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T> select<T>(Tape<T>&, const Tensor<T>&, std::size_t);                        \
  template Tensor<T> stack<T>(Tape<T>&, const std::vector<Tensor<T>>&);                         \
  template Tensor<T> sum<T>(Tape<T>&, const Tensor<T>&);

MANS_INSTANTIATE_OPS(float)
MANS_INSTANTIATE_OPS(double)

#undef MANS_INSTANTIATE_OPS

}  // namespace mans::ops
