#include "deeppt/harris.hpp"

#include <algorithm>
#include <stdexcept>

namespace dpt {

namespace {

// rows = y, cols = x
Eigen::ArrayXXf to_array(const GrayImage& img) {
  Eigen::ArrayXXf a(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) a(y, x) = static_cast<float>(img.at(x, y));
  return a;
}

Eigen::ArrayXXf box5(const Eigen::ArrayXXf& a) {
  // 5x5 box sum, valid only at margin >= 2; border left zero
  Eigen::ArrayXXf out = Eigen::ArrayXXf::Zero(a.rows(), a.cols());
  for (Eigen::Index y = 2; y < a.rows() - 2; ++y)
    for (Eigen::Index x = 2; x < a.cols() - 2; ++x)
      out(y, x) = a.block(y - 2, x - 2, 5, 5).sum();
  return out;
}

}  // namespace

Eigen::ArrayXXf harris_response(const GrayImage& img, float k) {
  if (img.width < 7 || img.height < 7)
    throw std::invalid_argument("image too small for the Harris window");
  const Eigen::ArrayXXf a = to_array(img);
  const Eigen::Index h = a.rows(), w = a.cols();

  Eigen::ArrayXXf ix = Eigen::ArrayXXf::Zero(h, w), iy = Eigen::ArrayXXf::Zero(h, w);
  for (Eigen::Index y = 1; y < h - 1; ++y)
    for (Eigen::Index x = 1; x < w - 1; ++x) {
      ix(y, x) = (a(y - 1, x + 1) + 2 * a(y, x + 1) + a(y + 1, x + 1)) -
                 (a(y - 1, x - 1) + 2 * a(y, x - 1) + a(y + 1, x - 1));
      iy(y, x) = (a(y + 1, x - 1) + 2 * a(y + 1, x) + a(y + 1, x + 1)) -
                 (a(y - 1, x - 1) + 2 * a(y - 1, x) + a(y - 1, x + 1));
    }

  const Eigen::ArrayXXf sxx = box5(ix * ix);
  const Eigen::ArrayXXf syy = box5(iy * iy);
  const Eigen::ArrayXXf sxy = box5(ix * iy);

  Eigen::ArrayXXf r = Eigen::ArrayXXf::Zero(h, w);
  for (Eigen::Index y = 3; y < h - 3; ++y)
    for (Eigen::Index x = 3; x < w - 3; ++x) {
      const float det = sxx(y, x) * syy(y, x) - sxy(y, x) * sxy(y, x);
      const float tr = sxx(y, x) + syy(y, x);
      r(y, x) = det - k * tr * tr;
    }
  return r;
}

std::vector<Corner> harris_corners(const GrayImage& img, const HarrisParams& params) {
  const Eigen::ArrayXXf r = harris_response(img, params.k);
  const float peak = r.maxCoeff();
  if (peak <= 0.f) return {};
  const float threshold = params.rel_threshold * peak;
  const int rad = std::max(params.nms_radius, 1);

  std::vector<Corner> candidates;
  for (Eigen::Index y = 3; y < r.rows() - 3; ++y)
    for (Eigen::Index x = 3; x < r.cols() - 3; ++x) {
      const float v = r(y, x);
      if (v <= threshold || v <= 0.f) continue;
      // local maximum over the Chebyshev window; row-major-first wins ties
      bool is_max = true;
      for (Eigen::Index dy = -rad; dy <= rad && is_max; ++dy)
        for (Eigen::Index dx = -rad; dx <= rad && is_max; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const Eigen::Index ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= r.rows() || nx >= r.cols()) continue;
          const float nv = r(ny, nx);
          if (nv > v || (nv == v && (ny < y || (ny == y && nx < x)))) is_max = false;
        }
      if (is_max)
        candidates.push_back({static_cast<int>(x), static_cast<int>(y), v});
    }

  std::sort(candidates.begin(), candidates.end(), [](const Corner& a, const Corner& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  // greedy suppression: never emit two corners closer than the radius
  std::vector<Corner> kept;
  for (const Corner& c : candidates) {
    bool clear = true;
    for (const Corner& k : kept) {
      if (std::max(std::abs(k.x - c.x), std::abs(k.y - c.y)) < rad) {
        clear = false;
        break;
      }
    }
    if (clear) kept.push_back(c);
  }
  return kept;
}

}  // namespace dpt
