#include "deeppt/samples.hpp"

#include "deeppt/serialize.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace dpt {

namespace {

void copy_patch(const GrayImage& img, int cx, int cy, int size, uint8_t* dst) {
  const int r = size / 2;
  for (int y = 0; y < size; ++y)
    std::memcpy(dst + static_cast<size_t>(y) * size,
                &img.pixels[static_cast<size_t>(cy - r + y) * img.width + (cx - r)],
                static_cast<size_t>(size));
}

int round_half_away(float v) { return static_cast<int>(std::lround(v)); }

}  // namespace

std::vector<TrackingSample> generate_tracking_samples(const GrayImage& img_t,
                                                      const GrayImage& img_t1,
                                                      const FlowField& flow,
                                                      const std::vector<Corner>& corners,
                                                      int max_samples,
                                                      SampleGenReport* report) {
  if (img_t.width != flow.width || img_t.height != flow.height ||
      img_t1.width != flow.width || img_t1.height != flow.height)
    throw std::invalid_argument("images and flow field must share extents");

  SampleGenReport rep;
  std::vector<TrackingSample> out;
  for (const Corner& c : corners) {
    if (max_samples >= 0 && static_cast<int>(out.size()) >= max_samples) break;
    if (!img_t.inside(c.x, c.y) || !flow.is_valid(c.x, c.y)) {
      ++rep.rejected_invalid_flow;
      continue;
    }
    const size_t i = flow.idx(c.x, c.y);
    const int dx = round_half_away(flow.u[i]);
    const int dy = round_half_away(flow.v[i]);
    if (std::abs(dx) > kMaxDisplacement || std::abs(dy) > kMaxDisplacement) {
      ++rep.rejected_motion;
      continue;
    }
    if (c.x < kPatchMargin || c.y < kPatchMargin || c.x >= img_t.width - kPatchMargin ||
        c.y >= img_t.height - kPatchMargin) {
      ++rep.rejected_margin;
      continue;
    }
    TrackingSample s;
    copy_patch(img_t, c.x, c.y, kTemplateSize, s.tmpl.data());
    copy_patch(img_t1, c.x, c.y, kSearchSize, s.search.data());
    s.dx = static_cast<int8_t>(dx);
    s.dy = static_cast<int8_t>(dy);
    s.x = c.x;
    s.y = c.y;
    out.push_back(s);
    ++rep.accepted;
  }
  if (report) *report = rep;
  return out;
}

GrayImage make_noise_texture(int width, int height, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> dist(0, 255);
  std::vector<float> a(static_cast<size_t>(width) * height);
  for (auto& v : a) v = static_cast<float>(dist(rng));

  // two box-blur passes, radius 2, clamped at the borders
  std::vector<float> b(a.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        float sum = 0;
        int n = 0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= height || nx >= width) continue;
            sum += a[static_cast<size_t>(ny) * width + nx];
            ++n;
          }
        b[static_cast<size_t>(y) * width + x] = sum / static_cast<float>(n);
      }
    std::swap(a, b);
  }

  float lo = a[0], hi = a[0];
  for (float v : a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float scale = hi > lo ? 255.f / (hi - lo) : 0.f;
  GrayImage img(width, height);
  for (size_t i = 0; i < a.size(); ++i)
    img.pixels[i] = static_cast<uint8_t>(std::lround((a[i] - lo) * scale));
  return img;
}

std::vector<TrackingSample> make_synthetic_translations(int count, uint32_t seed,
                                                        int image_size) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (image_size < 93)
    throw std::invalid_argument("image size must be >= 93 so shifted windows stay in bounds");

  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> shift(-kMaxDisplacement, kMaxDisplacement);
  std::uniform_int_distribution<uint32_t> tex_seed;

  std::vector<TrackingSample> out;
  out.reserve(static_cast<size_t>(count));
  const int c = image_size / 2;
  for (int i = 0; i < count; ++i) {
    const GrayImage a = make_noise_texture(image_size, image_size, tex_seed(rng));
    const int dx = shift(rng), dy = shift(rng);

    GrayImage b(image_size, image_size);
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        const int sx = x - dx, sy = y - dy;
        b.at(x, y) = a.inside(sx, sy) ? a.at(sx, sy) : 0;
      }

    TrackingSample s;
    copy_patch(a, c, c, kTemplateSize, s.tmpl.data());
    copy_patch(b, c, c, kSearchSize, s.search.data());
    s.dx = static_cast<int8_t>(dx);
    s.dy = static_cast<int8_t>(dy);
    s.x = c;
    s.y = c;
    out.push_back(s);
  }
  return out;
}

namespace {
constexpr char kSampleMagic[4] = {'D', 'P', 'T', 'S'};
}  // namespace

void save_samples(const std::vector<TrackingSample>& samples, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(kSampleMagic, 4);
  const uint64_t count = samples.size();
  uint8_t cnt[8];
  for (int i = 0; i < 8; ++i) cnt[i] = static_cast<uint8_t>((count >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(cnt), 8);
  for (const TrackingSample& s : samples) {
    f.write(reinterpret_cast<const char*>(s.tmpl.data()), s.tmpl.size());
    f.write(reinterpret_cast<const char*>(s.search.data()), s.search.size());
    f.put(static_cast<char>(s.dx));
    f.put(static_cast<char>(s.dy));
  }
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<TrackingSample> load_samples(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, kSampleMagic, 4) != 0)
    throw CorruptFileError(path + ": bad sample-cache magic, expected 'DPTS'");
  uint8_t cnt[8];
  f.read(reinterpret_cast<char*>(cnt), 8);
  if (f.gcount() != 8) throw CorruptFileError(path + ": truncated sample cache");
  uint64_t count = 0;
  for (int i = 0; i < 8; ++i) count |= static_cast<uint64_t>(cnt[i]) << (8 * i);

  std::vector<TrackingSample> out;
  out.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    TrackingSample s;
    f.read(reinterpret_cast<char*>(s.tmpl.data()), static_cast<std::streamsize>(s.tmpl.size()));
    f.read(reinterpret_cast<char*>(s.search.data()),
           static_cast<std::streamsize>(s.search.size()));
    int t = f.get();
    int d = f.get();
    if (!f || t == EOF || d == EOF) throw CorruptFileError(path + ": truncated sample cache");
    s.dx = static_cast<int8_t>(static_cast<uint8_t>(t));
    s.dy = static_cast<int8_t>(static_cast<uint8_t>(d));
    out.push_back(s);
  }
  return out;
}

}  // namespace dpt
