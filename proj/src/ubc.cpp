#include "deeppt/ubc.hpp"

#include "deeppt/serialize.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace dpt {

GrayImage UbcDataset::extract_patch(int index) const {
  if (index < 0 || index >= patch_count())
    throw std::invalid_argument("patch index out of range");
  constexpr int per_montage = kUbcMontageGrid * kUbcMontageGrid;
  const int m = index / per_montage;
  const int within = index % per_montage;
  const int row = within / kUbcMontageGrid;
  const int col = within % kUbcMontageGrid;
  const GrayImage& montage = montages[static_cast<size_t>(m)];
  GrayImage patch(kUbcPatchSize, kUbcPatchSize);
  for (int y = 0; y < kUbcPatchSize; ++y)
    for (int x = 0; x < kUbcPatchSize; ++x)
      patch.at(x, y) = montage.at(col * kUbcPatchSize + x, row * kUbcPatchSize + y);
  return patch;
}

UbcDataset parse_ubc_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root))
    throw std::runtime_error(dir + " is not a directory");

  UbcDataset ds;
  std::ifstream info(root / "info.txt");
  if (!info) throw std::runtime_error(dir + ": missing info.txt");
  std::string line;
  while (std::getline(info, line)) {
    std::istringstream ss(line);
    int id;
    if (ss >> id) ds.point_id.push_back(id);
  }

  std::vector<fs::path> montage_paths;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("patches", 0) == 0 &&
        (name.ends_with(".bmp") || name.ends_with(".png")))
      montage_paths.push_back(e.path());
  }
  std::sort(montage_paths.begin(), montage_paths.end());

  constexpr int montage_px = kUbcMontageGrid * kUbcPatchSize;
  for (const auto& p : montage_paths) {
    GrayImage m = load_gray_image(p.string());
    if (m.width != montage_px || m.height != montage_px)
      throw CorruptFileError(p.string() + ": montage must be 1024x1024");
    ds.montages.push_back(std::move(m));
  }

  constexpr int per_montage = kUbcMontageGrid * kUbcMontageGrid;
  const int capacity = static_cast<int>(ds.montages.size()) * per_montage;
  if (ds.patch_count() > capacity || ds.patch_count() <= capacity - per_montage)
    throw CorruptFileError(dir + ": info.txt lists " + std::to_string(ds.patch_count()) +
                           " patches but montages hold " + std::to_string(capacity));
  return ds;
}

std::vector<MatchPairLine> load_match_pair_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<MatchPairLine> out;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    MatchPairLine m;
    int unused1, unused2;
    if (ss >> m.patch1 >> m.point1 >> unused1 >> m.patch2 >> m.point2 >> unused2)
      out.push_back(m);
  }
  return out;
}

std::vector<PatchPair> load_match_pairs(const UbcDataset& ds, const std::string& path) {
  std::vector<PatchPair> pairs;
  for (const MatchPairLine& l : load_match_pair_lines(path)) {
    PatchPair p;
    p.a = ds.extract_patch(l.patch1);
    p.b = ds.extract_patch(l.patch2);
    p.match = l.match();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

GrayImage center_crop(const GrayImage& patch, int size) {
  if (size < 1 || size > patch.width || size > patch.height)
    throw std::invalid_argument("crop size exceeds patch extents");
  const int ox = (patch.width - size) / 2;
  const int oy = (patch.height - size) / 2;
  GrayImage out(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(x, y) = patch.at(ox + x, oy + y);
  return out;
}

}  // namespace dpt
