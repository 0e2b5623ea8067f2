#pragma once

// Forward and backward kernels for the layer types of the diagnosis network.
// Everything is templated on the scalar so the same code paths run in float
// for training and in double for finite-difference checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bfd/error.hpp"
#include "bfd/tensor.hpp"

namespace bfd {

// Non-owning view of a convolution kernel. weights are laid out
// (kh, kw, in_ch, out_ch) row-major.
template <typename T>
struct ConvKernel {
  int kh = 1;
  int kw = 1;
  int in_ch = 1;
  int out_ch = 1;
  int stride = 1;
  std::span<const T> weights;
  std::span<const T> bias;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(kh) * kw * in_ch * out_ch;
  }
};

// Non-owning view of a fully connected layer; weights are (in_dim, out_dim).
template <typename T>
struct DenseWeights {
  int in_dim = 1;
  int out_dim = 1;
  std::span<const T> weights;
  std::span<const T> bias;
};

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  // Flat input index of the winner for every output element.
  std::vector<std::uint32_t> argmax;
};

template <typename T>
struct LossResult {
  T loss{};
  // Gradient with respect to the pre-softmax logits: pred - onehot.
  std::vector<T> logits_grad;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) raise(ErrorCode::kShapeMismatch, what);
}

template <typename T>
void check_conv(const Shape& in, const ConvKernel<T>& k) {
  require(k.kh >= 1 && k.kw >= 1 && k.in_ch >= 1 && k.out_ch >= 1, "conv kernel dims must be positive");
  require(k.stride == 1, "conv2d_same supports stride 1 only");
  require(in.channels == k.in_ch, "conv input has " + std::to_string(in.channels) +
                                      " channels, kernel expects " + std::to_string(k.in_ch));
  require(k.weights.size() == k.weight_count(), "conv weight count mismatch");
  require(k.bias.size() == static_cast<std::size_t>(k.out_ch), "conv bias count mismatch");
}

// Same padding: pad_top = floor((k - 1) / 2); the remainder goes bottom/right.
constexpr int pad_before(int k) { return (k - 1) / 2; }

}  // namespace detail

namespace detail {

// Column matrix of a same-padded stride-1 convolution: row
// k = (kr * kw + kc) * in_ch + ic, column p = r * cols + c. Padding cells
// stay zero.
template <typename T>
void im2col_same(const BasicTensor<T>& input, int kh, int kw, std::vector<T>& out) {
  const int rows = input.rows();
  const int cols = input.cols();
  const int ch = input.channels();
  const std::size_t positions = static_cast<std::size_t>(rows) * cols;
  out.assign(static_cast<std::size_t>(kh) * kw * ch * positions, T{});
  const T* in = input.data().data();
  for (int kr = 0; kr < kh; ++kr) {
    const int dr = kr - pad_before(kh);
    for (int kc = 0; kc < kw; ++kc) {
      const int dc = kc - pad_before(kw);
      const int c_lo = std::max(0, -dc);
      const int c_hi = std::min(cols, cols - dc);
      T* block = out.data() + static_cast<std::size_t>(kr * kw + kc) * ch * positions;
      for (int r = 0; r < rows; ++r) {
        const int ir = r + dr;
        if (ir < 0 || ir >= rows) continue;
        for (int c = c_lo; c < c_hi; ++c) {
          const T* src = in + (static_cast<std::size_t>(ir) * cols + (c + dc)) * ch;
          const std::size_t p = static_cast<std::size_t>(r) * cols + c;
          for (int ic = 0; ic < ch; ++ic) block[static_cast<std::size_t>(ic) * positions + p] = src[ic];
        }
      }
    }
  }
}

// Adds a column-matrix gradient back onto the input positions it was read from.
template <typename T>
void col2im_same_add(const std::vector<T>& colgrad, int kh, int kw, BasicTensor<T>& grad_input) {
  const int rows = grad_input.rows();
  const int cols = grad_input.cols();
  const int ch = grad_input.channels();
  const std::size_t positions = static_cast<std::size_t>(rows) * cols;
  T* gi = grad_input.data().data();
  for (int kr = 0; kr < kh; ++kr) {
    const int dr = kr - pad_before(kh);
    for (int kc = 0; kc < kw; ++kc) {
      const int dc = kc - pad_before(kw);
      const int c_lo = std::max(0, -dc);
      const int c_hi = std::min(cols, cols - dc);
      const T* block = colgrad.data() + static_cast<std::size_t>(kr * kw + kc) * ch * positions;
      for (int r = 0; r < rows; ++r) {
        const int ir = r + dr;
        if (ir < 0 || ir >= rows) continue;
        for (int c = c_lo; c < c_hi; ++c) {
          T* dst = gi + (static_cast<std::size_t>(ir) * cols + (c + dc)) * ch;
          const std::size_t p = static_cast<std::size_t>(r) * cols + c;
          for (int ic = 0; ic < ch; ++ic) dst[ic] += block[static_cast<std::size_t>(ic) * positions + p];
        }
      }
    }
  }
}

// Direct kernels vectorized across output channels; faster than the
// column-matrix path once the spatial extent is smaller than the channel count.
template <typename T>
BasicTensor<T> conv2d_same_direct(const BasicTensor<T>& input, const ConvKernel<T>& k) {
  const int rows = input.rows();
  const int cols = input.cols();
  const int in_ch = k.in_ch;
  const int out_ch = k.out_ch;
  const int pt = pad_before(k.kh);
  const int pl = pad_before(k.kw);
  BasicTensor<T> out(Shape{rows, cols, out_ch});
  const T* in = input.data().data();
  const T* w = k.weights.data();
  T* o = out.data().data();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      T* acc = o + (static_cast<std::size_t>(r) * cols + c) * out_ch;
      std::copy(k.bias.begin(), k.bias.end(), acc);
      for (int kr = 0; kr < k.kh; ++kr) {
        const int ir = r + kr - pt;
        if (ir < 0 || ir >= rows) continue;
        for (int kc = 0; kc < k.kw; ++kc) {
          const int icol = c + kc - pl;
          if (icol < 0 || icol >= cols) continue;
          const T* x = in + (static_cast<std::size_t>(ir) * cols + icol) * in_ch;
          const T* wk = w + (static_cast<std::size_t>(kr) * k.kw + kc) * in_ch * out_ch;
          for (int i = 0; i < in_ch; ++i) {
            const T xv = x[i];
            const T* wrow = wk + static_cast<std::size_t>(i) * out_ch;
#pragma omp simd
            for (int oc = 0; oc < out_ch; ++oc) acc[oc] += xv * wrow[oc];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_same_backward_direct(const BasicTensor<T>& input, const ConvKernel<T>& k,
                                 const BasicTensor<T>& grad_output, std::span<T> grad_weights,
                                 std::span<T> grad_bias, BasicTensor<T>* grad_input) {
  const int rows = input.rows();
  const int cols = input.cols();
  const int in_ch = k.in_ch;
  const int out_ch = k.out_ch;
  if (grad_input != nullptr) *grad_input = BasicTensor<T>(input.shape());
  const int pt = pad_before(k.kh);
  const int pl = pad_before(k.kw);
  const T* in = input.data().data();
  const T* w = k.weights.data();
  const T* go = grad_output.data().data();
  T* gw = grad_weights.data();
  T* gb = grad_bias.data();
  T* gi = grad_input != nullptr ? grad_input->data().data() : nullptr;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const T* g = go + (static_cast<std::size_t>(r) * cols + c) * out_ch;
      for (int oc = 0; oc < out_ch; ++oc) gb[oc] += g[oc];
      for (int kr = 0; kr < k.kh; ++kr) {
        const int ir = r + kr - pt;
        if (ir < 0 || ir >= rows) continue;
        for (int kc = 0; kc < k.kw; ++kc) {
          const int icol = c + kc - pl;
          if (icol < 0 || icol >= cols) continue;
          const std::size_t in_off = (static_cast<std::size_t>(ir) * cols + icol) * in_ch;
          const std::size_t w_off = (static_cast<std::size_t>(kr) * k.kw + kc) * in_ch * out_ch;
          const T* x = in + in_off;
          for (int i = 0; i < in_ch; ++i) {
            const T xv = x[i];
            T* gwrow = gw + w_off + static_cast<std::size_t>(i) * out_ch;
#pragma omp simd
            for (int oc = 0; oc < out_ch; ++oc) gwrow[oc] += xv * g[oc];
          }
          if (gi != nullptr) {
            for (int i = 0; i < in_ch; ++i) {
              const T* wrow = w + w_off + static_cast<std::size_t>(i) * out_ch;
              T s{};
#pragma omp simd reduction(+ : s)
              for (int oc = 0; oc < out_ch; ++oc) s += wrow[oc] * g[oc];
              gi[in_off + i] += s;
            }
          }
        }
      }
    }
  }
}

inline bool prefer_direct(const Shape& in, int out_ch) {
  return static_cast<std::size_t>(out_ch) > static_cast<std::size_t>(in.rows) * in.cols;
}

}  // namespace detail

// Stride-1 convolution with zero "same" padding. Each output is accumulated
// as bias, then over kernel row, kernel column, input channel, in that order;
// the loops vectorize across output positions, which leaves that per-output
// order intact.
template <typename T>
BasicTensor<T> conv2d_same(const BasicTensor<T>& input, const ConvKernel<T>& k) {
  detail::check_conv(input.shape(), k);
  if (detail::prefer_direct(input.shape(), k.out_ch)) return detail::conv2d_same_direct(input, k);
  const std::size_t positions = static_cast<std::size_t>(input.rows()) * input.cols();
  const std::size_t taps = static_cast<std::size_t>(k.kh) * k.kw * k.in_ch;
  const int out_ch = k.out_ch;
  std::vector<T> colmat;
  detail::im2col_same(input, k.kh, k.kw, colmat);

  // Channel-major accumulator, transposed to channels-last at the end.
  std::vector<T> acc(static_cast<std::size_t>(out_ch) * positions);
  for (int oc = 0; oc < out_ch; ++oc) {
    std::fill_n(acc.begin() + static_cast<std::ptrdiff_t>(oc * positions), positions, k.bias[oc]);
  }
  const T* w = k.weights.data();
  for (std::size_t t = 0; t < taps; ++t) {
    const T* row = colmat.data() + t * positions;
    for (int oc = 0; oc < out_ch; ++oc) {
      const T wv = w[t * out_ch + oc];
      T* a = acc.data() + static_cast<std::size_t>(oc) * positions;
#pragma omp simd
      for (std::size_t p = 0; p < positions; ++p) a[p] += row[p] * wv;
    }
  }
  BasicTensor<T> out(Shape{input.rows(), input.cols(), out_ch});
  T* o = out.data().data();
  for (std::size_t p = 0; p < positions; ++p) {
    for (int oc = 0; oc < out_ch; ++oc) o[p * out_ch + oc] = acc[static_cast<std::size_t>(oc) * positions + p];
  }
  return out;
}

// Accumulates dL/dW and dL/db into grad_weights / grad_bias (callers zero
// them per batch). grad_input is skipped when null.
template <typename T>
void conv2d_same_backward(const BasicTensor<T>& input, const ConvKernel<T>& k,
                          const BasicTensor<T>& grad_output, std::span<T> grad_weights,
                          std::span<T> grad_bias, BasicTensor<T>* grad_input) {
  detail::check_conv(input.shape(), k);
  const int out_ch = k.out_ch;
  detail::require(grad_output.shape() == Shape{input.rows(), input.cols(), out_ch}, "conv grad_output shape mismatch");
  detail::require(grad_weights.size() == k.weight_count(), "conv grad_weights size mismatch");
  detail::require(grad_bias.size() == static_cast<std::size_t>(out_ch), "conv grad_bias size mismatch");
  if (detail::prefer_direct(input.shape(), out_ch)) {
    detail::conv2d_same_backward_direct(input, k, grad_output, grad_weights, grad_bias, grad_input);
    return;
  }
  const std::size_t positions = static_cast<std::size_t>(input.rows()) * input.cols();
  const std::size_t taps = static_cast<std::size_t>(k.kh) * k.kw * k.in_ch;

  std::vector<T> gt(static_cast<std::size_t>(out_ch) * positions);
  const T* go = grad_output.data().data();
  for (std::size_t p = 0; p < positions; ++p) {
    for (int oc = 0; oc < out_ch; ++oc) gt[static_cast<std::size_t>(oc) * positions + p] = go[p * out_ch + oc];
  }
  for (int oc = 0; oc < out_ch; ++oc) {
    const T* g = gt.data() + static_cast<std::size_t>(oc) * positions;
    T s{};
#pragma omp simd reduction(+ : s)
    for (std::size_t p = 0; p < positions; ++p) s += g[p];
    grad_bias[oc] += s;
  }

  std::vector<T> colmat;
  detail::im2col_same(input, k.kh, k.kw, colmat);
  T* gw = grad_weights.data();
  for (std::size_t t = 0; t < taps; ++t) {
    const T* row = colmat.data() + t * positions;
    for (int oc = 0; oc < out_ch; ++oc) {
      const T* g = gt.data() + static_cast<std::size_t>(oc) * positions;
      T s{};
#pragma omp simd reduction(+ : s)
      for (std::size_t p = 0; p < positions; ++p) s += row[p] * g[p];
      gw[t * out_ch + oc] += s;
    }
  }

  if (grad_input == nullptr) return;
  // Reuse the column buffer for the column-space input gradient.
  std::fill(colmat.begin(), colmat.end(), T{});
  const T* w = k.weights.data();
  for (std::size_t t = 0; t < taps; ++t) {
    T* row = colmat.data() + t * positions;
    for (int oc = 0; oc < out_ch; ++oc) {
      const T wv = w[t * out_ch + oc];
      const T* g = gt.data() + static_cast<std::size_t>(oc) * positions;
#pragma omp simd
      for (std::size_t p = 0; p < positions; ++p) row[p] += wv * g[p];
    }
  }
  *grad_input = BasicTensor<T>(input.shape());
  detail::col2im_same_add(colmat, k.kh, k.kw, *grad_input);
}

constexpr int pooled_extent(int n, int k, int stride) { return (n - k) / stride + 1; }

// Unpadded max pooling; output extent floor((n - k) / stride) + 1 per axis.
// Ties resolve to the first element in window scan order.
template <typename T>
PoolResult<T> maxpool(const BasicTensor<T>& input, int k, int stride) {
  detail::require(k >= 1 && stride >= 1, "pool size and stride must be positive");
  detail::require(k <= std::min(input.rows(), input.cols()),
                  "pool window " + std::to_string(k) + " exceeds input " + to_string(input.shape()));
  const int rows = input.rows();
  const int cols = input.cols();
  const int ch = input.channels();
  const int out_rows = pooled_extent(rows, k, stride);
  const int out_cols = pooled_extent(cols, k, stride);
  PoolResult<T> res{BasicTensor<T>(Shape{out_rows, out_cols, ch}), {}};
  res.argmax.resize(res.output.size());

  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      for (int q = 0; q < ch; ++q) {
        std::size_t best = input.index(r * stride, c * stride, q);
        T best_v = input[best];
        for (int dr = 0; dr < k; ++dr) {
          for (int dc = 0; dc < k; ++dc) {
            const std::size_t idx = input.index(r * stride + dr, c * stride + dc, q);
            if (input[idx] > best_v) {
              best_v = input[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = res.output.index(r, c, q);
        res.output[o] = best_v;
        res.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return res;
}

template <typename T>
BasicTensor<T> maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                const BasicTensor<T>& grad_output) {
  detail::require(argmax.size() == grad_output.size(), "pool argmax/grad size mismatch");
  BasicTensor<T> grad_input(input_shape);
  for (std::size_t j = 0; j < argmax.size(); ++j) {
    detail::require(argmax[j] < grad_input.size(), "pool argmax index out of range");
    grad_input[argmax[j]] += grad_output[j];
  }
  return grad_input;
}

// out[j] = bias[j] + sum_i input[i] * weights[i][j]; input of any shape is
// read in flattened order.
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const DenseWeights<T>& w) {
  detail::require(input.size() == static_cast<std::size_t>(w.in_dim),
                  "dense input length " + std::to_string(input.size()) + " != " + std::to_string(w.in_dim));
  detail::require(w.weights.size() == static_cast<std::size_t>(w.in_dim) * w.out_dim, "dense weight count mismatch");
  detail::require(w.bias.size() == static_cast<std::size_t>(w.out_dim), "dense bias count mismatch");
  std::vector<T> out(w.bias.begin(), w.bias.end());
  const int n = w.out_dim;
  for (int i = 0; i < w.in_dim; ++i) {
    const T xv = input[i];
    const T* wrow = w.weights.data() + static_cast<std::size_t>(i) * n;
#pragma omp simd
    for (int j = 0; j < n; ++j) out[j] += xv * wrow[j];
  }
  return BasicTensor<T>::flat(std::move(out));
}

template <typename T>
void dense_backward(const BasicTensor<T>& input, const DenseWeights<T>& w, const BasicTensor<T>& grad_output,
                    std::span<T> grad_weights, std::span<T> grad_bias, BasicTensor<T>* grad_input) {
  detail::require(input.size() == static_cast<std::size_t>(w.in_dim), "dense input length mismatch");
  detail::require(grad_output.size() == static_cast<std::size_t>(w.out_dim), "dense grad_output length mismatch");
  detail::require(grad_weights.size() == static_cast<std::size_t>(w.in_dim) * w.out_dim,
                  "dense grad_weights size mismatch");
  detail::require(grad_bias.size() == static_cast<std::size_t>(w.out_dim), "dense grad_bias size mismatch");
  const int n = w.out_dim;
  const T* g = grad_output.data().data();
  for (int j = 0; j < n; ++j) grad_bias[j] += g[j];
  if (grad_input != nullptr) *grad_input = BasicTensor<T>(input.shape());
  for (int i = 0; i < w.in_dim; ++i) {
    const T xv = input[i];
    T* gwrow = grad_weights.data() + static_cast<std::size_t>(i) * n;
#pragma omp simd
    for (int j = 0; j < n; ++j) gwrow[j] += xv * g[j];
    if (grad_input != nullptr) {
      const T* wrow = w.weights.data() + static_cast<std::size_t>(i) * n;
      T s{};
      for (int j = 0; j < n; ++j) s += wrow[j] * g[j];
      (*grad_input)[i] = s;
    }
  }
}

template <typename T>
BasicTensor<T> tanh(BasicTensor<T> t) {
  for (auto& v : t.data()) v = std::tanh(v);
  return t;
}

template <typename T>
BasicTensor<T> relu(BasicTensor<T> t) {
  for (auto& v : t.data()) v = v > T{} ? v : T{};
  return t;
}

// Derivatives expressed through the forward output y.
template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& output, BasicTensor<T> grad) {
  detail::require(output.shape() == grad.shape(), "tanh grad shape mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= T{1} - output[i] * output[i];
  return grad;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output, BasicTensor<T> grad) {
  detail::require(output.shape() == grad.shape(), "relu grad shape mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > T{})) grad[i] = T{};
  }
  return grad;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  detail::require(logits.shape().is_flat(), "softmax expects a flat tensor");
  const T peak = *std::max_element(logits.data().begin(), logits.data().end());
  std::vector<T> out(logits.size());
  T sum{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return BasicTensor<T>::flat(std::move(out));
}

// Full Jacobian-vector product; the training path uses the fused
// cross-entropy gradient instead.
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, BasicTensor<T> grad) {
  detail::require(output.shape() == grad.shape(), "softmax grad shape mismatch");
  T dot{};
  for (std::size_t i = 0; i < grad.size(); ++i) dot += output[i] * grad[i];
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = output[i] * (grad[i] - dot);
  return grad;
}

template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& pred, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= pred.size()) {
    raise(ErrorCode::kShapeMismatch, "label " + std::to_string(label) + " outside prediction of length " +
                                         std::to_string(pred.size()));
  }
  const T p = std::max(pred[label], std::numeric_limits<T>::min());
  LossResult<T> res;
  res.loss = -std::log(p);
  res.logits_grad.assign(pred.data().begin(), pred.data().end());
  res.logits_grad[label] -= T{1};
  return res;
}

}  // namespace bfd
