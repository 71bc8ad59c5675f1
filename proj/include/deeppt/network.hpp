#pragma once

#include "deeppt/layers.hpp"

#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dpt {

enum class LayerKind { conv, relu, dense, flatten, softmax };

struct LayerRef {
  LayerKind kind;
  int index = -1;  // into the conv or dense list, for conv/dense kinds
};

using Topology = std::vector<LayerRef>;

/// conv+relu pairs with a linear final conv: the feature-stack wiring used
/// by both branches of the tracker.
inline Topology conv_stack_topology(int conv_layers) {
  Topology t;
  for (int i = 0; i < conv_layers; ++i) {
    t.push_back({LayerKind::conv, i});
    if (i + 1 < conv_layers) t.push_back({LayerKind::relu});
  }
  return t;
}

/// dense+relu pairs ending in a linear dense layer (logits).
inline Topology mlp_topology(int dense_layers) {
  Topology t;
  for (int i = 0; i < dense_layers; ++i) {
    t.push_back({LayerKind::dense, i});
    if (i + 1 < dense_layers) t.push_back({LayerKind::relu});
  }
  return t;
}

template <typename S>
struct ForwardCache {
  // acts[0] is the input; acts[i+1] is the output of topology layer i.
  std::vector<Tensor<S>> acts;
};

namespace detail {

template <typename S>
VecX<S> as_vector(const Tensor<S>& t) {
  if (t.rank() != 1)
    throw std::invalid_argument("expected rank-1 tensor, got " +
                                Tensor<S>::shape_string(t.shape()));
  return t.vec();
}

}  // namespace detail

/// Runs `topology` over `input`. Conv/dense indices resolve into `convs` and
/// `denses`. Shape mismatches raise std::invalid_argument at the offending
/// layer. Pass a cache to keep every intermediate activation for backward.
template <typename S>
Tensor<S> network_forward(std::span<const ConvLayerParams<S>> convs,
                          std::span<const DenseLayerParams<S>> denses,
                          const Topology& topology, const Tensor<S>& input,
                          ForwardCache<S>* cache = nullptr) {
  Tensor<S> x = input;
  if (cache) {
    cache->acts.clear();
    cache->acts.reserve(topology.size() + 1);
    cache->acts.push_back(x);
  }
  for (const LayerRef& l : topology) {
    switch (l.kind) {
      case LayerKind::conv:
        if (l.index < 0 || l.index >= static_cast<int>(convs.size()))
          throw std::invalid_argument("topology references missing conv layer");
        x = conv2d_forward(x, convs[static_cast<size_t>(l.index)]);
        break;
      case LayerKind::relu:
        x = relu(x);
        break;
      case LayerKind::flatten:
        x = x.reshaped({static_cast<int>(x.size())});
        break;
      case LayerKind::dense: {
        if (l.index < 0 || l.index >= static_cast<int>(denses.size()))
          throw std::invalid_argument("topology references missing dense layer");
        VecX<S> y = dense_forward(detail::as_vector(x), denses[static_cast<size_t>(l.index)]);
        const int n = static_cast<int>(y.size());
        x = Tensor<S>({n}, std::move(y));
        break;
      }
      case LayerKind::softmax: {
        VecX<S> y = softmax(detail::as_vector(x));
        const int n = static_cast<int>(y.size());
        x = Tensor<S>({n}, std::move(y));
        break;
      }
    }
    if (cache) cache->acts.push_back(x);
  }
  return x;
}

template <typename S>
struct StackGradients {
  std::vector<ConvGrads<S>> conv;    // indexed like the conv list
  std::vector<DenseGrads<S>> dense;  // indexed like the dense list
};

struct BackwardOptions {
  bool freeze_convs = false;  // conv layers yield no gradients
  bool want_input_grad = false;
};

/// Backpropagates `out_grad` through the cached forward pass. Gradients of
/// layers referenced twice accumulate. Frozen conv layers are skipped
/// entirely (their entries stay zero).
template <typename S>
StackGradients<S> network_backward(std::span<const ConvLayerParams<S>> convs,
                                   std::span<const DenseLayerParams<S>> denses,
                                   const Topology& topology, const ForwardCache<S>& cache,
                                   const Tensor<S>& out_grad,
                                   const BackwardOptions& opts = {},
                                   Tensor<S>* input_grad = nullptr) {
  if (cache.acts.size() != topology.size() + 1)
    throw std::logic_error("network_backward requires the forward cache for this topology");

  StackGradients<S> grads;
  grads.conv.resize(convs.size());
  for (size_t i = 0; i < convs.size(); ++i) {
    grads.conv[i].kernels = Tensor<S>(convs[i].kernels.shape());
    grads.conv[i].biases = VecX<S>::Zero(convs[i].biases.size());
  }
  grads.dense.resize(denses.size());
  for (size_t i = 0; i < denses.size(); ++i) {
    grads.dense[i].weights = MatX<S>::Zero(denses[i].weights.rows(), denses[i].weights.cols());
    grads.dense[i].biases = VecX<S>::Zero(denses[i].biases.size());
  }

  Tensor<S> g = out_grad;
  for (int li = static_cast<int>(topology.size()) - 1; li >= 0; --li) {
    const LayerRef& l = topology[static_cast<size_t>(li)];
    const Tensor<S>& in = cache.acts[static_cast<size_t>(li)];
    const Tensor<S>& out = cache.acts[static_cast<size_t>(li) + 1];
    const bool need_below = li > 0 || opts.want_input_grad || input_grad != nullptr;
    switch (l.kind) {
      case LayerKind::conv: {
        const auto& layer = convs[static_cast<size_t>(l.index)];
        if (opts.freeze_convs) {
          if (!need_below) { g = Tensor<S>(); break; }
          Tensor<S> gi;
          conv2d_backward(in, layer, g, &gi);
          g = std::move(gi);
        } else {
          Tensor<S> gi;
          ConvGrads<S> cg = conv2d_backward(in, layer, g, need_below ? &gi : nullptr);
          grads.conv[static_cast<size_t>(l.index)].kernels.vec() += cg.kernels.vec();
          grads.conv[static_cast<size_t>(l.index)].biases += cg.biases;
          if (need_below) g = std::move(gi);
        }
        break;
      }
      case LayerKind::relu:
        g = relu_backward(in, g);
        break;
      case LayerKind::flatten:
        g = g.reshaped(in.shape());
        break;
      case LayerKind::dense: {
        const auto& layer = denses[static_cast<size_t>(l.index)];
        VecX<S> gi;
        DenseGrads<S> dg = dense_backward(detail::as_vector(in), layer, detail::as_vector(g),
                                          need_below ? &gi : nullptr);
        grads.dense[static_cast<size_t>(l.index)].weights += dg.weights;
        grads.dense[static_cast<size_t>(l.index)].biases += dg.biases;
        if (need_below) {
          const int n = static_cast<int>(gi.size());
          g = Tensor<S>({n}, std::move(gi));
        }
        break;
      }
      case LayerKind::softmax: {
        VecX<S> gi = softmax_backward(detail::as_vector(out), detail::as_vector(g));
        const int n = static_cast<int>(gi.size());
        g = Tensor<S>({n}, std::move(gi));
        break;
      }
    }
  }
  if (input_grad) *input_grad = std::move(g);
  return grads;
}

/// Everything learnable: the shared conv stack plus named dense heads.
template <typename S>
struct NetworkParams {
  std::vector<ConvLayerParams<S>> conv;
  std::map<std::string, std::vector<DenseLayerParams<S>>> heads;

  void validate() const {
    for (size_t i = 0; i + 1 < conv.size(); ++i)
      if (conv[i].out_channels() != conv[i + 1].in_channels())
        throw std::invalid_argument("conv channel widths do not chain at layer " +
                                    std::to_string(i + 1));
    for (const auto& [name, layers] : heads)
      for (size_t i = 0; i + 1 < layers.size(); ++i)
        if (layers[i].out_width() != layers[i + 1].in_width())
          throw std::invalid_argument("head '" + name + "' widths do not chain at layer " +
                                      std::to_string(i + 1));
  }
};

using NetworkParamsF = NetworkParams<float>;

/// Zero-mean Gaussian fan-in initialization (variance 2/fan_in), zero biases.
template <typename S>
void init_conv_layer(ConvLayerParams<S>& layer, std::mt19937& rng) {
  const double std_dev = std::sqrt(2.0 / (layer.in_channels() * 9));
  std::normal_distribution<double> dist(0.0, std_dev);
  for (Eigen::Index i = 0; i < layer.kernels.size(); ++i)
    layer.kernels[i] = static_cast<S>(dist(rng));
  layer.biases.setZero();
}

template <typename S>
void init_dense_layer(DenseLayerParams<S>& layer, std::mt19937& rng) {
  const double std_dev = std::sqrt(2.0 / layer.weights.cols());
  std::normal_distribution<double> dist(0.0, std_dev);
  for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
      layer.weights(i, j) = static_cast<S>(dist(rng));
  layer.biases.setZero();
}

template <typename S>
std::vector<ConvLayerParams<S>> make_conv_stack(const std::vector<int>& widths,
                                                uint32_t seed, int in_channels = 1) {
  std::mt19937 rng(seed);
  std::vector<ConvLayerParams<S>> layers;
  int in = in_channels;
  for (int out : widths) {
    ConvLayerParams<S> l(out, in);
    init_conv_layer(l, rng);
    layers.push_back(std::move(l));
    in = out;
  }
  return layers;
}

template <typename S>
std::vector<DenseLayerParams<S>> make_mlp(const std::vector<int>& widths, uint32_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs at least in/out widths");
  std::mt19937 rng(seed);
  std::vector<DenseLayerParams<S>> layers;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayerParams<S> l(widths[i + 1], widths[i]);
    init_dense_layer(l, rng);
    layers.push_back(std::move(l));
  }
  return layers;
}

}  // namespace dpt
