#include "deeppt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace dpt {

std::vector<double> pixel_accuracy(const std::vector<PredictionRecord>& records,
                                   const std::vector<double>& thresholds) {
  if (records.empty()) throw std::invalid_argument("pixel_accuracy needs records");
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    size_t hits = 0;
    for (const PredictionRecord& r : records)
      if ((r.predicted - r.ground_truth).norm() <= t) ++hits;
    out.push_back(static_cast<double>(hits) / static_cast<double>(records.size()));
  }
  return out;
}

double error_at_95_recall(const std::vector<double>& scores,
                          const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("score/label counts differ");
  const size_t n_match = static_cast<size_t>(
      std::count(labels.begin(), labels.end(), static_cast<uint8_t>(1)));
  const size_t n_non = labels.size() - n_match;
  if (n_match == 0 || n_non == 0)
    throw std::invalid_argument("error_at_95_recall needs both classes");

  // sort by score descending; sweep thresholds from strict to lenient
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });

  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    // admit every pair tied at this score value together
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]]) ++tp;
      else ++fp;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(n_match);
    if (recall >= 0.95)
      return 100.0 * static_cast<double>(fp) / static_cast<double>(n_non);
  }
  return 100.0;  // unreachable for well-formed inputs: full sweep has recall 1
}

Eigen::Vector2d apply_homography(const Homography& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) <= 1e-12)
    throw std::domain_error("point maps to the vanishing line");
  return {q.x() / q.z(), q.y() / q.z()};
}

BackprojectionReport backprojection_report(const std::vector<Correspondence>& pairs,
                                           const std::map<int, Homography>& homographies,
                                           double inlier_threshold) {
  if (pairs.empty()) throw std::invalid_argument("backprojection_report needs pairs");
  if (inlier_threshold <= 0) throw std::invalid_argument("inlier threshold must be > 0");

  std::map<int, Homography> inverses;
  for (const auto& [id, h] : homographies) {
    if (std::abs(h.determinant()) <= 1e-12)
      throw std::invalid_argument("homography for patch " + std::to_string(id) +
                                  " is singular");
    inverses[id] = h.inverse();
  }

  std::vector<double> errors;
  errors.reserve(pairs.size());
  for (const Correspondence& c : pairs) {
    auto it = inverses.find(c.patch_id);
    if (it == inverses.end())
      throw std::invalid_argument("no homography for patch " + std::to_string(c.patch_id));
    errors.push_back((apply_homography(it->second, c.curr) - c.prev).norm());
  }

  BackprojectionReport rep;
  rep.pair_count = static_cast<int>(errors.size());
  rep.inlier_threshold = inlier_threshold;
  const double n = static_cast<double>(errors.size());
  rep.mean_error = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  double sq = 0;
  size_t inliers = 0;
  for (double e : errors) {
    sq += (e - rep.mean_error) * (e - rep.mean_error);
    if (e < inlier_threshold) ++inliers;
  }
  rep.std_error = std::sqrt(sq / n);
  rep.inlier_percent = 100.0 * static_cast<double>(inliers) / n;
  return rep;
}

const std::vector<ReferenceRow>& reference_backprojection_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"Lowe's", 4.66, 4.24, 34.0}, {"AMA", 2.49, 2.42, 40.0},
      {"Cho", 3.56, 3.35, 39.0},    {"HMA", 2.84, 2.64, 39.0},
      {"Deep-PT", 2.71, 2.81, 82.0},
  };
  return rows;
}

std::vector<Correspondence> load_correspondences(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<Correspondence> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Correspondence c;
    if (!(ss >> c.prev.x() >> c.prev.y() >> c.curr.x() >> c.curr.y() >> c.patch_id))
      throw std::runtime_error(path + ": malformed correspondence line '" + line + "'");
    out.push_back(c);
  }
  return out;
}

std::map<int, Homography> load_homographies(const std::string& dir) {
  std::map<int, Homography> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    constexpr const char* prefix = "homography_";
    if (name.rfind(prefix, 0) != 0 || !name.ends_with(".txt")) continue;
    const int id = std::stoi(name.substr(std::string(prefix).size()));
    std::ifstream f(e.path());
    Homography h;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (!(f >> h(r, c)))
          throw std::runtime_error(e.path().string() + ": expected 9 reals");
    out[id] = h;
  }
  return out;
}

}  // namespace dpt
