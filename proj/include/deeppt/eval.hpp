#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <map>
#include <string>
#include <vector>

namespace dpt {

struct PredictionRecord {
  Eigen::Vector2d predicted;
  Eigen::Vector2d ground_truth;
};

/// Fraction of records with ||predicted - ground_truth||_2 <= t, per
/// threshold t.
std::vector<double> pixel_accuracy(const std::vector<PredictionRecord>& records,
                                   const std::vector<double>& thresholds);

/// False-positive rate (percent) at the strictest score threshold that
/// still accepts at least 95% of the true matches. Scores are
/// higher-is-more-match; acceptance is score >= threshold.
double error_at_95_recall(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

using Homography = Eigen::Matrix3d;

/// Projective transform with division by the third coordinate; rejects
/// points on the vanishing line.
Eigen::Vector2d apply_homography(const Homography& h, const Eigen::Vector2d& p);

struct Correspondence {
  Eigen::Vector2d prev;
  Eigen::Vector2d curr;
  int patch_id = 0;
};

struct BackprojectionReport {
  double mean_error = 0;
  double std_error = 0;  // population
  double inlier_percent = 0;
  double inlier_threshold = 0;
  int pair_count = 0;
};

/// Back-projects each current point through the inverse of its patch
/// homography and measures the Euclidean gap to the previous point.
/// Inliers are errors strictly below the threshold.
BackprojectionReport backprojection_report(const std::vector<Correspondence>& pairs,
                                           const std::map<int, Homography>& homographies,
                                           double inlier_threshold = 5.0);

struct ReferenceRow {
  std::string method;
  double mean_error;
  double std_error;
  double inlier_percent;
};

/// Published MIS-protocol results, for side-by-side display only; nothing
/// in this repository reproduces them.
const std::vector<ReferenceRow>& reference_backprojection_rows();

/// `x_prev y_prev x_curr y_curr patch_id` per line.
std::vector<Correspondence> load_correspondences(const std::string& path);

/// One file per patch id named homography_<id>.txt holding 9 reals,
/// row-major.
std::map<int, Homography> load_homographies(const std::string& dir);

}  // namespace dpt
