#include "deeppt/klt.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace dpt {

Pyramid build_pyramid(const GrayImage& img, int levels) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  Pyramid pyr;
  Eigen::ArrayXXf base(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) base(y, x) = static_cast<float>(img.at(x, y));
  pyr.levels.push_back(std::move(base));
  for (int l = 1; l < levels; ++l) {
    const Eigen::ArrayXXf& prev = pyr.levels.back();
    const Eigen::Index h = prev.rows() / 2, w = prev.cols() / 2;
    if (h < 1 || w < 1)
      throw std::invalid_argument("image too small for " + std::to_string(levels) +
                                  " pyramid levels");
    Eigen::ArrayXXf next(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x)
        next(y, x) = 0.25f * (prev(2 * y, 2 * x) + prev(2 * y, 2 * x + 1) +
                              prev(2 * y + 1, 2 * x) + prev(2 * y + 1, 2 * x + 1));
    pyr.levels.push_back(std::move(next));
  }
  return pyr;
}

float sample_bilinear(const Eigen::ArrayXXf& img, float x, float y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float a = img(y0, x0), b = img(y0, x0 + 1);
  const float c = img(y0 + 1, x0), d = img(y0 + 1, x0 + 1);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

namespace {

bool window_inside(const Eigen::ArrayXXf& img, float cx, float cy, int radius) {
  // one extra pixel for central differences and bilinear floor+1 access
  return cx - radius >= 1.f && cy - radius >= 1.f &&
         cx + radius < static_cast<float>(img.cols()) - 2.f &&
         cy + radius < static_cast<float>(img.rows()) - 2.f;
}

}  // namespace

bool lk_point_valid(const Pyramid& pyr, Eigen::Vector2f p, const LkParams& params) {
  const int radius = params.window / 2;
  for (int level = 0; level < pyr.count(); ++level) {
    const float scale = 1.f / static_cast<float>(1 << level);
    if (!window_inside(pyr.levels[static_cast<size_t>(level)], p.x() * scale, p.y() * scale,
                       radius))
      return false;
  }
  return true;
}

LkResult lk_track_point(const Pyramid& pyr_t, const Pyramid& pyr_t1, Eigen::Vector2f p,
                        const LkParams& params) {
  if (pyr_t.count() != pyr_t1.count() || pyr_t.count() < 1)
    throw std::invalid_argument("pyramids must have matching levels");
  const int radius = params.window / 2;
  {
    const float scale0 = 1.f / static_cast<float>(1 << (pyr_t.count() - 1));
    if (!window_inside(pyr_t.levels[0], p.x(), p.y(), radius) ||
        !window_inside(pyr_t.levels.back(), p.x() * scale0, p.y() * scale0, radius))
      throw std::invalid_argument("point too close to the border for the LK window");
  }
  const float min_eig_threshold =
      1e-6f * static_cast<float>(params.window) * static_cast<float>(params.window);

  Eigen::Vector2f d = Eigen::Vector2f::Zero();  // displacement at the current level
  LkResult result;
  result.point = p;
  for (int level = pyr_t.count() - 1; level >= 0; --level) {
    const Eigen::ArrayXXf& i0 = pyr_t.levels[static_cast<size_t>(level)];
    const Eigen::ArrayXXf& i1 = pyr_t1.levels[static_cast<size_t>(level)];
    const float scale = 1.f / static_cast<float>(1 << level);
    const Eigen::Vector2f c = p * scale;

    if (!window_inside(i0, c.x(), c.y(), radius)) {
      if (level == 0) return result;  // cannot even evaluate: not converged
      d *= 2.f;
      continue;
    }

    // gradients and template values at fixed positions around c
    const int n = params.window * params.window;
    Eigen::Matrix2f g = Eigen::Matrix2f::Zero();
    std::vector<float> gx(static_cast<size_t>(n)), gy(static_cast<size_t>(n)),
        t0(static_cast<size_t>(n));
    int idx = 0;
    for (int wy = -radius; wy <= radius; ++wy)
      for (int wx = -radius; wx <= radius; ++wx, ++idx) {
        const float x = c.x() + static_cast<float>(wx);
        const float y = c.y() + static_cast<float>(wy);
        const float dx = 0.5f * (sample_bilinear(i0, x + 1, y) - sample_bilinear(i0, x - 1, y));
        const float dy = 0.5f * (sample_bilinear(i0, x, y + 1) - sample_bilinear(i0, x, y - 1));
        gx[static_cast<size_t>(idx)] = dx;
        gy[static_cast<size_t>(idx)] = dy;
        t0[static_cast<size_t>(idx)] = sample_bilinear(i0, x, y);
        g(0, 0) += dx * dx;
        g(0, 1) += dx * dy;
        g(1, 0) += dx * dy;
        g(1, 1) += dy * dy;
      }

    const float tr = g(0, 0) + g(1, 1);
    const float det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    const float min_eig = 0.5f * (tr - std::sqrt(std::max(0.f, tr * tr - 4 * det)));
    if (min_eig < min_eig_threshold) {
      if (level == 0) return result;  // singular normal equations
      d *= 2.f;
      continue;
    }
    const Eigen::Matrix2f g_inv = g.inverse();

    bool level_converged = false;
    for (int it = 0; it < params.iterations; ++it) {
      if (!window_inside(i1, c.x() + d.x(), c.y() + d.y(), radius)) break;
      Eigen::Vector2f b = Eigen::Vector2f::Zero();
      idx = 0;
      for (int wy = -radius; wy <= radius; ++wy)
        for (int wx = -radius; wx <= radius; ++wx, ++idx) {
          const float diff = t0[static_cast<size_t>(idx)] -
                             sample_bilinear(i1, c.x() + d.x() + static_cast<float>(wx),
                                             c.y() + d.y() + static_cast<float>(wy));
          b.x() += diff * gx[static_cast<size_t>(idx)];
          b.y() += diff * gy[static_cast<size_t>(idx)];
        }
      const Eigen::Vector2f step = g_inv * b;
      d += step;
      if (step.norm() < params.eps) {
        level_converged = true;
        break;
      }
    }
    if (level == 0) {
      result.converged = level_converged;
      break;
    }
    d *= 2.f;
  }
  result.point = p + d;
  return result;
}

FbResult fb_track(const Pyramid& pyr_t, const Pyramid& pyr_t1, Eigen::Vector2f p,
                  const LkParams& params) {
  FbResult out;
  const LkResult fwd = lk_track_point(pyr_t, pyr_t1, p, params);
  out.point = fwd.point;
  if (!fwd.converged) return out;

  LkResult bwd;
  try {
    bwd = lk_track_point(pyr_t1, pyr_t, fwd.point, params);
  } catch (const std::invalid_argument&) {
    return out;  // forward landed too close to the border to verify
  }
  out.fb_error = (p - bwd.point).norm();
  out.reliable = bwd.converged && out.fb_error <= params.fb_threshold;
  return out;
}

}  // namespace dpt
