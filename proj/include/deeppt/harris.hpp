#pragma once

#include "deeppt/image.hpp"

#include <Eigen/Core>

#include <vector>

namespace dpt {

struct Corner {
  int x = 0;
  int y = 0;
  float response = 0.f;
};

struct HarrisParams {
  float k = 0.04f;
  float rel_threshold = 0.01f;  // fraction of the peak response
  int nms_radius = 5;           // Chebyshev
};

/// Structure-tensor response R = det(M) - k trace(M)^2 from 3x3 Sobel
/// gradients smoothed by a 5x5 box. Returns local maxima above
/// rel_threshold * max(R), non-maximum suppressed, sorted by response
/// descending (ties by y then x).
std::vector<Corner> harris_corners(const GrayImage& img, const HarrisParams& params = {});

/// The raw response map (zero on the 3-pixel border where the window does
/// not fit). Exposed so evaluations can rank candidate pixels directly.
Eigen::ArrayXXf harris_response(const GrayImage& img, float k = 0.04f);

}  // namespace dpt
