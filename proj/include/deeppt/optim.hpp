#pragma once

#include "deeppt/layers.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace dpt {

struct TrainConfig {
  double base_lr = 1e-2;
  double lr_decay = 1e-7;      // per optimizer iteration
  double weight_decay = 1e-4;  // L2 term added to the gradient
  double momentum = 0.9;       // Adam beta1
  double step_factor = 0.2;    // multiplicative drop per completed interval
  int step_interval_epochs = 30;
  int step_start_epoch = 120;
  int epochs = 200;
  int batch_size = 64;
  uint32_t seed = 1;

  void validate() const {
    if (base_lr < 0 || lr_decay < 0 || weight_decay < 0 || momentum < 0)
      throw std::invalid_argument("training rates must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  }

  // lr 1e-2, decay 1e-7, wd 1e-4, momentum 0.9, x0.2 every 30 epochs past 120
  static TrainConfig tracker_defaults() { return TrainConfig{}; }

  // lr 1e-3, decay 1e-7, wd 1e-5, momentum 0.85, x0.1 every 30 epochs past 120
  static TrainConfig score_defaults() {
    TrainConfig c;
    c.base_lr = 1e-3;
    c.weight_decay = 1e-5;
    c.momentum = 0.85;
    c.step_factor = 0.1;
    return c;
  }
};

/// Per-iteration hyperbolic decay with a stepped drop every
/// `step_interval_epochs` completed after `step_start_epoch`.
inline double lr_schedule(const TrainConfig& config, int epoch, int64_t iteration) {
  double rate = config.base_lr / (1.0 + config.lr_decay * static_cast<double>(iteration));
  if (config.step_interval_epochs > 0 && epoch >= config.step_start_epoch) {
    const int k = (epoch - config.step_start_epoch) / config.step_interval_epochs;
    rate *= std::pow(config.step_factor, k);
  }
  return rate;
}

/// Flat views over the tensors of a parameter set, in a fixed order.
template <typename S>
using ParamViews = std::vector<std::span<S>>;

template <typename S>
ParamViews<S> conv_param_views(std::vector<ConvLayerParams<S>>& layers) {
  ParamViews<S> v;
  for (auto& l : layers) {
    v.push_back({l.kernels.data(), static_cast<size_t>(l.kernels.size())});
    v.push_back({l.biases.data(), static_cast<size_t>(l.biases.size())});
  }
  return v;
}

template <typename S>
ParamViews<S> conv_grad_views(std::vector<ConvGrads<S>>& grads) {
  ParamViews<S> v;
  for (auto& g : grads) {
    v.push_back({g.kernels.data(), static_cast<size_t>(g.kernels.size())});
    v.push_back({g.biases.data(), static_cast<size_t>(g.biases.size())});
  }
  return v;
}

template <typename S>
ParamViews<S> dense_param_views(std::vector<DenseLayerParams<S>>& layers) {
  ParamViews<S> v;
  for (auto& l : layers) {
    v.push_back({l.weights.data(), static_cast<size_t>(l.weights.size())});
    v.push_back({l.biases.data(), static_cast<size_t>(l.biases.size())});
  }
  return v;
}

template <typename S>
ParamViews<S> dense_grad_views(std::vector<DenseGrads<S>>& grads) {
  ParamViews<S> v;
  for (auto& g : grads) {
    v.push_back({g.weights.data(), static_cast<size_t>(g.weights.size())});
    v.push_back({g.biases.data(), static_cast<size_t>(g.biases.size())});
  }
  return v;
}

/// First/second moment accumulators, one pair per parameter tensor.
template <typename S>
struct AdamState {
  std::vector<VecX<S>> m, v;
  int64_t step = 0;

  static AdamState zeros_like(const ParamViews<S>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.push_back(VecX<S>::Zero(static_cast<Eigen::Index>(p.size())));
      s.v.push_back(VecX<S>::Zero(static_cast<Eigen::Index>(p.size())));
    }
    return s;
  }
};

inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One Adam step with bias correction. beta1 comes from config.momentum;
/// weight decay enters as an L2 term on the gradient. The learning rate is
/// lr_schedule(config, epoch, iteration).
template <typename S>
void adam_update(const ParamViews<S>& params, const ParamViews<S>& grads,
                 AdamState<S>& state, const TrainConfig& config, int epoch,
                 int64_t iteration) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_update: parameter/gradient/state counts differ");
  const double lr = lr_schedule(config, epoch, iteration);
  const double beta1 = config.momentum;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() ||
        static_cast<Eigen::Index>(params[t].size()) != state.m[t].size())
      throw std::invalid_argument("adam_update: tensor shape mismatch");
    Eigen::Map<VecX<S>> p(params[t].data(), static_cast<Eigen::Index>(params[t].size()));
    Eigen::Map<const VecX<S>> g(grads[t].data(), static_cast<Eigen::Index>(grads[t].size()));
    auto& m = state.m[t];
    auto& v = state.v[t];
    const S wd = static_cast<S>(config.weight_decay);
    VecX<S> eff = g + wd * p;
    m = static_cast<S>(beta1) * m + static_cast<S>(1.0 - beta1) * eff;
    v = static_cast<S>(kAdamBeta2) * v.array().matrix() +
        static_cast<S>(1.0 - kAdamBeta2) * eff.array().square().matrix();
    p.array() -= static_cast<S>(lr) * (m.array() / static_cast<S>(bc1)) /
                 ((v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(kAdamEpsilon));
  }
}

}  // namespace dpt
