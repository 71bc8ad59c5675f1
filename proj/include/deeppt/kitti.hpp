#pragma once

#include "deeppt/image.hpp"

#include <string>
#include <vector>

namespace dpt {

/// Per-pixel ground-truth displacement. Pixels with valid == false carry no
/// flow claim and are skipped by every consumer.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u, v;
  std::vector<uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        u(static_cast<size_t>(w) * h, 0.f),
        v(static_cast<size_t>(w) * h, 0.f),
        valid(static_cast<size_t>(w) * h, 0) {}

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  bool is_valid(int x, int y) const { return valid[idx(x, y)] != 0; }
};

/// u = (ch1 - 2^15)/64, v = (ch2 - 2^15)/64, valid = (ch3 == 1).
FlowField decode_kitti_flow(const Rgb16Image& img);

/// Loads and decodes a flow PNG; rejects non-16-bit or non-3-channel files.
FlowField load_kitti_flow(const std::string& path);

}  // namespace dpt
