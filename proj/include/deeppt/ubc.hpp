#pragma once

#include "deeppt/image.hpp"

#include <string>
#include <vector>

namespace dpt {

inline constexpr int kUbcPatchSize = 64;
inline constexpr int kUbcMontageGrid = 16;  // 16x16 patches per 1024x1024 montage

/// Two 64x64 patches and whether they view the same 3-D point.
struct PatchPair {
  GrayImage a, b;
  bool match = false;
};

/// A patch-montage dataset: interest-point patches packed row-major into
/// 1024x1024 bitmaps, with info.txt naming each patch's 3-D point.
struct UbcDataset {
  std::vector<GrayImage> montages;
  std::vector<int> point_id;  // per patch, from info.txt

  int patch_count() const { return static_cast<int>(point_id.size()); }
  GrayImage extract_patch(int index) const;
};

/// Reads info.txt plus every patches*.bmp montage in the directory. The
/// info line count must fit the montage capacity (within the last montage).
UbcDataset parse_ubc_dataset(const std::string& dir);

struct MatchPairLine {
  int patch1 = 0, point1 = 0, patch2 = 0, point2 = 0;
  bool match() const { return point1 == point2; }
};

/// m50_*.txt rows: patchID1 3DpointID1 unused patchID2 3DpointID2 unused.
std::vector<MatchPairLine> load_match_pair_lines(const std::string& path);

/// Resolves a match file into concrete labeled patch pairs.
std::vector<PatchPair> load_match_pairs(const UbcDataset& ds, const std::string& path);

/// Central size x size crop; offset is floor((64 - size)/2).
GrayImage center_crop(const GrayImage& patch, int size);

}  // namespace dpt
