#pragma once

#include "deeppt/image.hpp"

#include <Eigen/Core>

#include <vector>

namespace dpt {

/// Coarse-to-fine image stack; level 0 is full resolution, each next level
/// is the 2x2 block mean at floor(half) extents. Arrays index (y, x).
struct Pyramid {
  std::vector<Eigen::ArrayXXf> levels;
  int count() const { return static_cast<int>(levels.size()); }
};

Pyramid build_pyramid(const GrayImage& img, int levels);

struct LkParams {
  int window = 11;       // full width, odd
  int iterations = 20;   // per level
  float eps = 0.01f;     // update-norm stop
  int levels = 3;        // pyramid depth used by callers
  float fb_threshold = 1.0f;
};

struct LkResult {
  Eigen::Vector2f point = Eigen::Vector2f::Zero();
  bool converged = false;
};

/// True when the tracking window around p fits inside every pyramid level.
bool lk_point_valid(const Pyramid& pyr, Eigen::Vector2f p, const LkParams& params = {});

/// Translation-only pyramidal Lucas-Kanade. Gradients come from central
/// differences on the template image; the 2x2 normal equations are rejected
/// as singular when the minimum eigenvalue drops below 1e-6 * window^2.
LkResult lk_track_point(const Pyramid& pyr_t, const Pyramid& pyr_t1, Eigen::Vector2f p,
                        const LkParams& params = {});

struct FbResult {
  Eigen::Vector2f point = Eigen::Vector2f::Zero();
  bool reliable = false;
  float fb_error = 0.f;
};

/// Forward track p -> p', backward track p' -> p''; the forward result is
/// reliable iff both legs converge and |p - p''| stays under fb_threshold.
FbResult fb_track(const Pyramid& pyr_t, const Pyramid& pyr_t1, Eigen::Vector2f p,
                  const LkParams& params = {});

/// Bilinear lookup with (x, y) pixel coordinates.
float sample_bilinear(const Eigen::ArrayXXf& img, float x, float y);

}  // namespace dpt
