#pragma once

#include "deeppt/harris.hpp"
#include "deeppt/image.hpp"
#include "deeppt/kitti.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dpt {

inline constexpr int kTemplateSize = 19;
inline constexpr int kSearchSize = 55;
inline constexpr int kMapSize = 37;            // kSearchSize - kTemplateSize + 1
inline constexpr int kMapCenter = 18;          // index of displacement (0,0)
inline constexpr int kMaxDisplacement = 18;    // window bound on |dx|, |dy|
inline constexpr int kPatchMargin = 27;        // half of the search window

/// One training/evaluation pair: a 19x19 template around a point in frame t,
/// the 55x55 search window at the same position in frame t+1, and the
/// integer ground-truth displacement. Patches are raw luminance; the network
/// front end normalizes them. (x, y) records the source pixel when known; it
/// is not part of the cached record format.
struct TrackingSample {
  std::array<uint8_t, kTemplateSize * kTemplateSize> tmpl{};
  std::array<uint8_t, kSearchSize * kSearchSize> search{};
  int8_t dx = 0;
  int8_t dy = 0;
  int x = 0;
  int y = 0;
};

struct SampleGenReport {
  int accepted = 0;
  int rejected_invalid_flow = 0;
  int rejected_motion = 0;
  int rejected_margin = 0;
};

/// Cuts samples around `corners`, keeping only points with valid flow,
/// integer-rounded displacement within the 37x37 window, and full patch
/// margins in both frames. Rounding is half away from zero.
std::vector<TrackingSample> generate_tracking_samples(const GrayImage& img_t,
                                                      const GrayImage& img_t1,
                                                      const FlowField& flow,
                                                      const std::vector<Corner>& corners,
                                                      int max_samples,
                                                      SampleGenReport* report = nullptr);

/// Smoothed-noise texture pairs related by an exact integer shift; ground
/// truth is exact by construction. Images are `image_size`^2 (>= 93).
std::vector<TrackingSample> make_synthetic_translations(int count, uint32_t seed,
                                                        int image_size = 96);

/// The texture generator behind make_synthetic_translations.
GrayImage make_noise_texture(int width, int height, uint32_t seed);

/// Binary sample cache: magic "DPTS", count u64 little-endian, then per
/// record template bytes (361), search bytes (3025), dx i8, dy i8.
void save_samples(const std::vector<TrackingSample>& samples, const std::string& path);
std::vector<TrackingSample> load_samples(const std::string& path);

}  // namespace dpt
