#include "deeppt/kitti.hpp"

namespace dpt {

FlowField decode_kitti_flow(const Rgb16Image& img) {
  FlowField f(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const size_t i = f.idx(x, y);
      f.u[i] = (static_cast<float>(img.at(x, y, 0)) - 32768.f) / 64.f;
      f.v[i] = (static_cast<float>(img.at(x, y, 1)) - 32768.f) / 64.f;
      f.valid[i] = img.at(x, y, 2) == 1 ? 1 : 0;
    }
  return f;
}

FlowField load_kitti_flow(const std::string& path) {
  return decode_kitti_flow(load_png_rgb16(path));
}

}  // namespace dpt
