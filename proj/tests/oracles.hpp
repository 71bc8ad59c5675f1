#pragma once

// Independent reference implementations the tests check the library
// against. Everything here is deliberately naive: straight loops and 64-bit
// accumulation, no shared code with the paths under test.

#include "deeppt/image.hpp"
#include "deeppt/kitti.hpp"
#include "deeppt/layers.hpp"
#include "deeppt/tensor.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// Direct six-loop valid 3x3 convolution, accumulating in double regardless
// of the input scalar type.
template <typename S>
dpt::Tensor<double> naive_conv3x3(const dpt::Tensor<S>& input,
                                  const dpt::ConvLayerParams<S>& layer) {
  const int ic = input.extent(0), h = input.extent(1), w = input.extent(2);
  const int oc = layer.out_channels();
  const int oh = h - 2, ow = w - 2;
  dpt::Tensor<double> out({oc, oh, ow});
  for (int o = 0; o < oc; ++o)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = static_cast<double>(layer.biases(o));
        for (int i = 0; i < ic; ++i)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
              acc += static_cast<double>(input.at(i, oy + ky, ox + kx)) *
                     static_cast<double>(
                         layer.kernels[((static_cast<Eigen::Index>(o) * ic + i) * 3 + ky) * 3 +
                                       kx]);
        out.at(o, oy, ox) = acc;
      }
  return out;
}

// Central finite differences of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x0,
                                 double h = 1e-3) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Test-only inverse of the flow decoding: quantizes (u, v, valid) into the
// 16-bit three-channel container.
inline dpt::Rgb16Image encode_kitti_flow(const dpt::FlowField& f) {
  dpt::Rgb16Image img(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const size_t i = f.idx(x, y);
      img.at(x, y, 0) = static_cast<uint16_t>(std::lround(f.u[i] * 64.0 + 32768.0));
      img.at(x, y, 1) = static_cast<uint16_t>(std::lround(f.v[i] * 64.0 + 32768.0));
      img.at(x, y, 2) = f.valid[i] ? 1 : 0;
    }
  return img;
}

// Smooth float texture plus a bilinear warp by a real-valued shift, for the
// LK ground-truth pairs.
inline Eigen::ArrayXXf smooth_texture(int height, int width, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(0.f, 255.f);
  Eigen::ArrayXXf noise(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) noise(y, x) = dist(rng);
  Eigen::ArrayXXf out(height, width);
  for (int pass = 0; pass < 3; ++pass) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        float sum = 0;
        int n = 0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= height || nx >= width) continue;
            sum += noise(ny, nx);
            ++n;
          }
        out(y, x) = sum / static_cast<float>(n);
      }
    noise = out;
  }
  return out;
}

inline Eigen::ArrayXXf warp_by_shift(const Eigen::ArrayXXf& src, float tx, float ty) {
  // dst(x, y) = src(x - tx, y - ty); border pixels clamp
  Eigen::ArrayXXf dst(src.rows(), src.cols());
  for (Eigen::Index y = 0; y < src.rows(); ++y)
    for (Eigen::Index x = 0; x < src.cols(); ++x) {
      float sx = static_cast<float>(x) - tx;
      float sy = static_cast<float>(y) - ty;
      sx = std::clamp(sx, 0.f, static_cast<float>(src.cols() - 1));
      sy = std::clamp(sy, 0.f, static_cast<float>(src.rows() - 1));
      const int x0 = std::min(static_cast<int>(sx), static_cast<int>(src.cols()) - 2);
      const int y0 = std::min(static_cast<int>(sy), static_cast<int>(src.rows()) - 2);
      const float fx = sx - static_cast<float>(x0), fy = sy - static_cast<float>(y0);
      dst(y, x) = (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x0 + 1)) +
                  fy * ((1 - fx) * src(y0 + 1, x0) + fx * src(y0 + 1, x0 + 1));
    }
  return dst;
}

inline dpt::GrayImage to_gray(const Eigen::ArrayXXf& a) {
  dpt::GrayImage img(static_cast<int>(a.cols()), static_cast<int>(a.rows()));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      img.at(x, y) = static_cast<uint8_t>(std::clamp(std::lround(a(y, x)), 0l, 255l));
  return img;
}

}  // namespace oracle
