#pragma once

#include "deeppt/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpt {

/// 3x3 valid convolution layer. Kernels are (out_channels, in_channels, 3, 3).
template <typename S>
struct ConvLayerParams {
  Tensor<S> kernels;
  VecX<S> biases;

  ConvLayerParams() = default;
  ConvLayerParams(int out_channels, int in_channels)
      : kernels({out_channels, in_channels, 3, 3}),
        biases(VecX<S>::Zero(out_channels)) {}

  int out_channels() const { return kernels.extent(0); }
  int in_channels() const { return kernels.extent(1); }

  void validate() const {
    if (kernels.rank() != 4 || kernels.extent(2) != 3 || kernels.extent(3) != 3)
      throw std::invalid_argument("conv kernels must be (out,in,3,3)");
    if (biases.size() != kernels.extent(0))
      throw std::invalid_argument("conv bias length must equal out channels");
  }
};

template <typename S>
struct DenseLayerParams {
  MatX<S> weights;  // out x in
  VecX<S> biases;   // out

  DenseLayerParams() = default;
  DenseLayerParams(int out, int in)
      : weights(MatX<S>::Zero(out, in)), biases(VecX<S>::Zero(out)) {}

  int out_width() const { return static_cast<int>(weights.rows()); }
  int in_width() const { return static_cast<int>(weights.cols()); }

  void validate() const {
    if (biases.size() != weights.rows())
      throw std::invalid_argument("dense bias length must equal out width");
  }
};

namespace detail {

template <typename S>
struct ChwView {
  const S* data;
  int c, h, w;
};

// Normalizes (C,H,W) or (1,C,H,W) to a non-owning channel/height/width view.
template <typename S>
ChwView<S> as_chw(const Tensor<S>& t) {
  if (t.rank() == 4) {
    if (t.extent(0) != 1)
      throw std::invalid_argument("batched conv input not supported; loop over samples");
    return {t.data(), t.extent(1), t.extent(2), t.extent(3)};
  }
  if (t.rank() == 3) return {t.data(), t.extent(0), t.extent(1), t.extent(2)};
  throw std::invalid_argument("conv input must be rank 3 or 4, got " +
                              Tensor<S>::shape_string(t.shape()));
}

// Patch matrix for 3x3 valid convolution: row (c*9 + ky*3 + kx),
// column (oy*ow + ox) holds input(c, oy+ky, ox+kx).
template <typename S>
RowMatX<S> im2col3x3(const ChwView<S>& in) {
  const int oh = in.h - 2, ow = in.w - 2;
  RowMatX<S> p(in.c * 9, static_cast<Eigen::Index>(oh) * ow);
  for (int ch = 0; ch < in.c; ++ch)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = p.data() + static_cast<Eigen::Index>(ch * 9 + ky * 3 + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const S* src = in.data + (static_cast<Eigen::Index>(ch) * in.h + oy + ky) * in.w + kx;
          std::copy(src, src + ow, dst + static_cast<Eigen::Index>(oy) * ow);
        }
      }
  return p;
}

template <typename S>
void col2im3x3_add(const RowMatX<S>& p, Tensor<S>& in_grad) {
  const int c = in_grad.extent(0), h = in_grad.extent(1), w = in_grad.extent(2);
  const int oh = h - 2, ow = w - 2;
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = p.data() + static_cast<Eigen::Index>(ch * 9 + ky * 3 + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          S* dst = in_grad.data() + (static_cast<Eigen::Index>(ch) * h + oy + ky) * w + kx;
          const S* row = src + static_cast<Eigen::Index>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) dst[ox] += row[ox];
        }
      }
}

}  // namespace detail

/// Valid 3x3 convolution, stride 1: output spatial extents shrink by 2.
template <typename S>
Tensor<S> conv2d_forward(const Tensor<S>& input, const ConvLayerParams<S>& layer) {
  layer.validate();
  const bool batched = input.rank() == 4;
  const detail::ChwView<S> in = detail::as_chw(input);
  if (in.c != layer.in_channels())
    throw std::invalid_argument("conv input channels " + std::to_string(in.c) +
                                " do not match layer in channels " +
                                std::to_string(layer.in_channels()));
  if (in.h < 3 || in.w < 3)
    throw std::invalid_argument("conv input spatial extents must be >= 3");

  const int oc = layer.out_channels();
  const int oh = in.h - 2, ow = in.w - 2;
  const RowMatX<S> patches = detail::im2col3x3(in);
  Eigen::Map<const RowMatX<S>> k(layer.kernels.data(), oc, layer.in_channels() * 9);

  Tensor<S> out({oc, oh, ow});
  Eigen::Map<RowMatX<S>> o(out.data(), oc, static_cast<Eigen::Index>(oh) * ow);
  o.noalias() = k * patches;
  o.colwise() += layer.biases;
  if (batched) return out.reshaped({1, oc, oh, ow});
  return out;
}

template <typename S>
struct ConvGrads {
  Tensor<S> kernels;
  VecX<S> biases;
};

/// Gradients of a valid 3x3 convolution. `input` must be the forward input.
/// Fills `input_grad` (gradient w.r.t. the input) when non-null.
template <typename S>
ConvGrads<S> conv2d_backward(const Tensor<S>& input, const ConvLayerParams<S>& layer,
                             const Tensor<S>& grad_out, Tensor<S>* input_grad = nullptr) {
  const detail::ChwView<S> in = detail::as_chw(input);
  const detail::ChwView<S> g = detail::as_chw(grad_out);
  const int oc = layer.out_channels();
  const int oh = in.h - 2, ow = in.w - 2;
  if (g.c != oc || g.h != oh || g.w != ow)
    throw std::invalid_argument("conv grad_out shape mismatch");

  const RowMatX<S> patches = detail::im2col3x3(in);
  Eigen::Map<const RowMatX<S>> go(g.data, oc, static_cast<Eigen::Index>(oh) * ow);

  ConvGrads<S> grads;
  grads.kernels = Tensor<S>(layer.kernels.shape());
  Eigen::Map<RowMatX<S>> dk(grads.kernels.data(), oc, layer.in_channels() * 9);
  dk.noalias() = go * patches.transpose();
  grads.biases = go.rowwise().sum();

  if (input_grad) {
    *input_grad = Tensor<S>({in.c, in.h, in.w});
    Eigen::Map<const RowMatX<S>> k(layer.kernels.data(), oc, layer.in_channels() * 9);
    const RowMatX<S> dp = k.transpose() * go;
    detail::col2im3x3_add(dp, *input_grad);
  }
  return grads;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& input) {
  Tensor<S> out(input.shape());
  out.vec() = input.vec().cwiseMax(S(0));
  return out;
}

/// Upstream gradient masked by (pre-activation > 0).
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& pre_activation, const Tensor<S>& grad_out) {
  if (!pre_activation.same_shape(grad_out))
    throw std::invalid_argument("relu backward shape mismatch");
  Tensor<S> out(grad_out.shape());
  out.vec() = (pre_activation.vec().array() > S(0))
                  .select(grad_out.vec().array(), S(0));
  return out;
}

template <typename S>
VecX<S> dense_forward(const VecX<S>& input, const DenseLayerParams<S>& layer) {
  layer.validate();
  if (input.size() != layer.weights.cols())
    throw std::invalid_argument("dense input length " + std::to_string(input.size()) +
                                " does not match in width " +
                                std::to_string(layer.weights.cols()));
  return layer.weights * input + layer.biases;
}

template <typename S>
struct DenseGrads {
  MatX<S> weights;
  VecX<S> biases;
};

template <typename S>
DenseGrads<S> dense_backward(const VecX<S>& input, const DenseLayerParams<S>& layer,
                             const VecX<S>& grad_out, VecX<S>* input_grad = nullptr) {
  if (grad_out.size() != layer.weights.rows())
    throw std::invalid_argument("dense grad_out length mismatch");
  DenseGrads<S> grads;
  grads.weights = grad_out * input.transpose();
  grads.biases = grad_out;
  if (input_grad) *input_grad = layer.weights.transpose() * grad_out;
  return grads;
}

/// Numerically stable softmax (max subtraction). Preserves the argmax.
template <typename S>
VecX<S> softmax(const VecX<S>& scores) {
  if (scores.size() == 0) throw std::invalid_argument("softmax of empty vector");
  if (!scores.allFinite()) throw std::invalid_argument("softmax input must be finite");
  VecX<S> e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

/// Gradient w.r.t. softmax input given gradient w.r.t. its output.
template <typename S>
VecX<S> softmax_backward(const VecX<S>& output, const VecX<S>& grad_out) {
  const S dot = output.dot(grad_out);
  return output.array() * (grad_out.array() - dot);
}

/// Negative cross-entropy of a softmax output against a target distribution.
/// The returned gradient is taken w.r.t. the pre-softmax scores: pred - target.
template <typename S>
struct CrossEntropyResult {
  S loss;
  VecX<S> score_grad;
};

template <typename S>
CrossEntropyResult<S> cross_entropy(const VecX<S>& pred_dist, const VecX<S>& target_dist) {
  if (pred_dist.size() != target_dist.size())
    throw std::invalid_argument("cross_entropy length mismatch");
  if (target_dist.minCoeff() < S(0) ||
      std::abs(double(target_dist.sum()) - 1.0) > 1e-4)
    throw std::invalid_argument("cross_entropy target is not a distribution");
  const S tiny = std::numeric_limits<S>::min();
  CrossEntropyResult<S> r;
  r.loss = -(target_dist.array() * pred_dist.array().max(tiny).log()).sum();
  r.score_grad = pred_dist - target_dist;
  return r;
}

/// Fused softmax + cross-entropy evaluated from raw scores (log-sum-exp
/// path, safe for widely spread logits). Gradient is softmax(scores) - target.
template <typename S>
CrossEntropyResult<S> softmax_cross_entropy(const VecX<S>& scores, const VecX<S>& target_dist) {
  if (scores.size() != target_dist.size())
    throw std::invalid_argument("softmax_cross_entropy length mismatch");
  const S m = scores.maxCoeff();
  VecX<S> e = (scores.array() - m).exp();
  const S z = e.sum();
  CrossEntropyResult<S> r;
  r.loss = target_dist.sum() * (m + std::log(z)) - target_dist.dot(scores);
  r.score_grad = e / z - target_dist;
  return r;
}

}  // namespace dpt
