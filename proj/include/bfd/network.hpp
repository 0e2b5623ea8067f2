#pragma once

// Sequential execution of an Architecture: parameter storage, seeded
// initialization, forward pass with an optional trace, and backpropagation.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bfd/model.hpp"
#include "bfd/ops.hpp"

namespace bfd {

template <typename T>
struct LayerParams {
  std::vector<T> weights;
  std::vector<T> bias;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// One entry per layer; pools hold empty vectors.
template <typename T>
struct BasicModelParams {
  std::vector<LayerParams<T>> layers;

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  void set_zero() {
    for (auto& l : layers) {
      std::fill(l.weights.begin(), l.weights.end(), T{});
      std::fill(l.bias.begin(), l.bias.end(), T{});
    }
  }

  friend bool operator==(const BasicModelParams&, const BasicModelParams&) = default;
};

using ModelParams = BasicModelParams<float>;

template <typename T>
BasicModelParams<T> zero_params(const Architecture& arch) {
  BasicModelParams<T> p;
  for (const auto& c : parameter_layout(arch)) {
    p.layers.push_back(LayerParams<T>{std::vector<T>(c.weights), std::vector<T>(c.bias)});
  }
  return p;
}

// Throws ShapeMismatch unless every layer's vectors match the layout.
template <typename T>
void check_params(const Architecture& arch, const BasicModelParams<T>& params) {
  const auto layout = parameter_layout(arch);
  if (params.layers.size() != layout.size()) {
    raise(ErrorCode::kShapeMismatch, "parameter set has " + std::to_string(params.layers.size()) +
                                         " layers, architecture has " + std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params.layers[i].weights.size() != layout[i].weights || params.layers[i].bias.size() != layout[i].bias) {
      raise(ErrorCode::kShapeMismatch, "layer " + std::to_string(i + 1) + " parameter count mismatch");
    }
  }
}

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
template <typename T>
BasicModelParams<T> init_params(const Architecture& arch, std::uint64_t seed) {
  auto params = zero_params<T>(arch);
  const auto shapes = infer_shapes(arch);
  std::mt19937_64 rng(seed);
  Shape in = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    double fan_in = 0, fan_out = 0;
    if (layer.kind == LayerKind::kConv) {
      const double area = static_cast<double>(layer.filter_h) * layer.filter_w;
      fan_in = area * in.channels;
      fan_out = area * layer.filter_count;
    } else if (layer.has_weights()) {
      fan_in = static_cast<double>(in.size());
      fan_out = layer.filter_count;
    }
    if (layer.has_weights()) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& w : params.layers[i].weights) w = static_cast<T>(dist(rng));
    }
    in = shapes[i];
  }
  return params;
}

// activations[0] is the input; activations[i + 1] is layer i's output after
// its activation (probabilities for the final softmax layer).
template <typename T>
struct ForwardTrace {
  std::vector<BasicTensor<T>> activations;
  std::vector<std::vector<std::uint32_t>> argmax;
};

namespace detail {

template <typename T>
ConvKernel<T> conv_view(const LayerSpec& layer, int in_ch, const LayerParams<T>& p) {
  return ConvKernel<T>{layer.filter_h, layer.filter_w, in_ch, layer.filter_count, 1, p.weights, p.bias};
}

template <typename T>
DenseWeights<T> dense_view(const LayerSpec& layer, std::size_t in_dim, const LayerParams<T>& p) {
  return DenseWeights<T>{static_cast<int>(in_dim), layer.filter_count, p.weights, p.bias};
}

template <typename T>
BasicTensor<T> activate(Activation act, BasicTensor<T> t) {
  switch (act) {
    case Activation::kTanh: return bfd::tanh(std::move(t));
    case Activation::kRelu: return bfd::relu(std::move(t));
    case Activation::kNone: break;
  }
  return t;
}

template <typename T>
BasicTensor<T> activate_backward(Activation act, const BasicTensor<T>& out, BasicTensor<T> grad) {
  switch (act) {
    case Activation::kTanh: return tanh_backward(out, std::move(grad));
    case Activation::kRelu: return relu_backward(out, std::move(grad));
    case Activation::kNone: break;
  }
  return grad;
}

}  // namespace detail

// Returns class probabilities. Pass a trace to keep what backward() needs.
template <typename T>
BasicTensor<T> forward(const Architecture& arch, const BasicModelParams<T>& params, BasicTensor<T> input,
                       ForwardTrace<T>* trace = nullptr) {
  if (input.shape() != arch.input) {
    raise(ErrorCode::kShapeMismatch, "network input " + to_string(input.shape()) + " != " + to_string(arch.input));
  }
  if (params.layers.size() != arch.layers.size()) raise(ErrorCode::kShapeMismatch, "parameter/layer count mismatch");
  if (trace != nullptr) {
    trace->activations.clear();
    trace->argmax.assign(arch.layers.size(), {});
    trace->activations.reserve(arch.layers.size() + 1);
    trace->activations.push_back(input);
  }
  BasicTensor<T> cur = std::move(input);
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    const auto& p = params.layers[i];
    switch (layer.kind) {
      case LayerKind::kConv:
        cur = detail::activate(layer.activation, conv2d_same(cur, detail::conv_view(layer, cur.channels(), p)));
        break;
      case LayerKind::kMaxPool: {
        auto pooled = maxpool(cur, layer.filter_h, layer.stride);
        cur = std::move(pooled.output);
        if (trace != nullptr) trace->argmax[i] = std::move(pooled.argmax);
        break;
      }
      case LayerKind::kDense:
        cur = detail::activate(layer.activation, dense(cur, detail::dense_view(layer, cur.size(), p)));
        break;
      case LayerKind::kSoftmaxDense:
        cur = softmax(dense(cur, detail::dense_view(layer, cur.size(), p)));
        break;
    }
    if (trace != nullptr) trace->activations.push_back(cur);
  }
  return cur;
}

// Backpropagates the cross-entropy loss of the traced forward pass against
// label, accumulating parameter gradients into grads. Returns the loss.
template <typename T>
T backward(const Architecture& arch, const BasicModelParams<T>& params, const ForwardTrace<T>& trace, int label,
           BasicModelParams<T>& grads) {
  const std::size_t n = arch.layers.size();
  if (trace.activations.size() != n + 1) raise(ErrorCode::kShapeMismatch, "trace does not match architecture");
  const auto ce = cross_entropy(trace.activations.back(), label);
  BasicTensor<T> grad = BasicTensor<T>::flat(ce.logits_grad);

  for (std::size_t li = n; li-- > 0;) {
    const auto& layer = arch.layers[li];
    const auto& in = trace.activations[li];
    const auto& out = trace.activations[li + 1];
    const bool need_input_grad = li > 0;
    BasicTensor<T> grad_in;
    switch (layer.kind) {
      case LayerKind::kConv: {
        grad = detail::activate_backward(layer.activation, out, std::move(grad));
        conv2d_same_backward(in, detail::conv_view(layer, in.channels(), params.layers[li]), grad,
                             std::span<T>(grads.layers[li].weights), std::span<T>(grads.layers[li].bias),
                             need_input_grad ? &grad_in : nullptr);
        break;
      }
      case LayerKind::kMaxPool:
        grad_in = maxpool_backward(in.shape(), std::span<const std::uint32_t>(trace.argmax[li]), grad);
        break;
      case LayerKind::kDense:
      case LayerKind::kSoftmaxDense: {
        // Softmax layers arrive here already holding the fused logits gradient.
        if (layer.kind == LayerKind::kDense) grad = detail::activate_backward(layer.activation, out, std::move(grad));
        dense_backward(in, detail::dense_view(layer, in.size(), params.layers[li]), grad,
                       std::span<T>(grads.layers[li].weights), std::span<T>(grads.layers[li].bias),
                       need_input_grad ? &grad_in : nullptr);
        break;
      }
    }
    if (need_input_grad) grad = std::move(grad_in);
  }
  return ce.loss;
}

template <typename T>
int argmax_class(const BasicTensor<T>& probs) {
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace bfd
