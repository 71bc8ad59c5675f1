#pragma once

#include "deeppt/layers.hpp"
#include "deeppt/samples.hpp"
#include "deeppt/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace dpt {

/// Integer displacement between frames, in pixels.
struct Displacement {
  int dx = 0;
  int dy = 0;
  bool operator==(const Displacement&) const = default;
};

/// Score maps are 37x37 matrices; row r, column c correspond to the
/// displacement (dy, dx) = (r - 18, c - 18), so the centre cell is (0,0).
template <typename S>
using ScoreMap = MatX<S>;
using ScoreMapF = ScoreMap<float>;

template <typename S>
void check_map_extents(const MatX<S>& m, const char* what) {
  if (m.rows() != kMapSize || m.cols() != kMapSize)
    throw std::invalid_argument(std::string(what) + " must be 37x37");
}

/// Sliding dot product between the template feature and every cell of the
/// search feature map (channels, 37, 37). No normalization.
template <typename S>
ScoreMap<S> correlate(const VecX<S>& tmpl_feature, const Tensor<S>& search_features) {
  if (search_features.rank() != 3 || search_features.extent(1) != kMapSize ||
      search_features.extent(2) != kMapSize)
    throw std::invalid_argument("search features must be (channels,37,37)");
  if (search_features.extent(0) != tmpl_feature.size())
    throw std::invalid_argument("feature widths do not match");
  const int channels = search_features.extent(0);
  // cell-major view of the feature map: (channels) x (37*37)
  Eigen::Map<const RowMatX<S>> f(search_features.data(), channels,
                                 static_cast<Eigen::Index>(kMapSize) * kMapSize);
  VecX<S> scores = f.transpose() * tmpl_feature;
  return Eigen::Map<const RowMatX<S>>(scores.data(), kMapSize, kMapSize);
}

/// Gradients of correlate with respect to both inputs.
template <typename S>
void correlate_backward(const VecX<S>& tmpl_feature, const Tensor<S>& search_features,
                        const ScoreMap<S>& grad_scores, VecX<S>& grad_tmpl,
                        Tensor<S>& grad_search) {
  const int channels = search_features.extent(0);
  const Eigen::Index cells = static_cast<Eigen::Index>(kMapSize) * kMapSize;
  Eigen::Map<const RowMatX<S>> f(search_features.data(), channels, cells);
  RowMatX<S> g = grad_scores;  // row-major flattening matches cell order
  Eigen::Map<const VecX<S>> gv(g.data(), cells);
  grad_tmpl.noalias() = f * gv;
  grad_search = Tensor<S>({channels, kMapSize, kMapSize});
  Eigen::Map<RowMatX<S>> gs(grad_search.data(), channels, cells);
  gs.noalias() = tmpl_feature * gv.transpose();
}

/// Argmax cell mapped through the origin convention; among ties the
/// smallest row-major index wins.
template <typename S>
Displacement predict_displacement(const ScoreMap<S>& score) {
  check_map_extents(score, "score map");
  if (!score.allFinite()) throw std::invalid_argument("score map must be finite");
  int best_r = 0, best_c = 0;
  S best = score(0, 0);
  for (int r = 0; r < kMapSize; ++r)
    for (int c = 0; c < kMapSize; ++c)
      if (score(r, c) > best) {
        best = score(r, c);
        best_r = r;
        best_c = c;
      }
  return {best_c - kMapCenter, best_r - kMapCenter};
}

/// 3x3 Gaussian bump (sigma 1) at the ground-truth cell, truncated at the
/// window border and renormalized to sum 1.
template <typename S>
ScoreMap<S> build_target_distribution(Displacement gt, double sigma = 1.0) {
  if (std::abs(gt.dx) > kMaxDisplacement || std::abs(gt.dy) > kMaxDisplacement)
    throw std::invalid_argument("ground-truth displacement outside the 37x37 window");
  ScoreMap<S> target = ScoreMap<S>::Zero(kMapSize, kMapSize);
  const int cr = kMapCenter + gt.dy, cc = kMapCenter + gt.dx;
  double sum = 0;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) {
      const int r = cr + i, c = cc + j;
      if (r < 0 || c < 0 || r >= kMapSize || c >= kMapSize) continue;
      const double w = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      target(r, c) = static_cast<S>(w);
      sum += w;
    }
  target /= static_cast<S>(sum);
  return target;
}

template <typename S>
struct TrackerLossResult {
  S loss;
  ScoreMap<S> score_grad;  // softmax(score) - target
};

/// Softmax over all 1369 cells followed by cross-entropy against the target.
template <typename S>
TrackerLossResult<S> tracker_loss(const ScoreMap<S>& score, const ScoreMap<S>& target) {
  check_map_extents(score, "score map");
  check_map_extents(target, "target distribution");
  const Eigen::Index cells = static_cast<Eigen::Index>(kMapSize) * kMapSize;
  RowMatX<S> s = score, t = target;
  Eigen::Map<const VecX<S>> sv(s.data(), cells);
  Eigen::Map<const VecX<S>> tv(t.data(), cells);
  CrossEntropyResult<S> ce = softmax_cross_entropy<S>(sv, tv);
  TrackerLossResult<S> r;
  r.loss = ce.loss;
  r.score_grad = Eigen::Map<const RowMatX<S>>(ce.score_grad.data(), kMapSize, kMapSize);
  return r;
}

}  // namespace dpt
