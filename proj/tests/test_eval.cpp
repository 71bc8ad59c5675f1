#include "deeppt/eval.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace dpt;
namespace fs = std::filesystem;

namespace {

// brute-force sweep: for every distinct threshold compute (recall, fpr) by
// direct counting; report fpr at the strictest threshold with recall >= 0.95
double error_at_95_recall_bruteforce(const std::vector<double>& scores,
                                     const std::vector<uint8_t>& labels) {
  size_t n_match = 0, n_non = 0;
  for (uint8_t l : labels) (l ? n_match : n_non)++;
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  for (double t : thresholds) {
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) (labels[i] ? tp : fp)++;
    if (static_cast<double>(tp) / static_cast<double>(n_match) >= 0.95)
      return 100.0 * static_cast<double>(fp) / static_cast<double>(n_non);
  }
  return 100.0;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("pixel accuracy: exact hits, counting, monotonicity") {
  std::vector<PredictionRecord> exact(5);
  for (auto& r : exact) {
    r.predicted = {3.0, -4.0};
    r.ground_truth = {3.0, -4.0};
  }
  for (double a : pixel_accuracy(exact, {1, 2, 3})) CHECK(a == 1.0);

  std::vector<PredictionRecord> spread(4);
  const double errs[4] = {0.5, 1.5, 2.5, 10.0};
  for (int i = 0; i < 4; ++i) {
    spread[static_cast<size_t>(i)].predicted = {errs[i], 0.0};
    spread[static_cast<size_t>(i)].ground_truth = {0.0, 0.0};
  }
  const auto acc = pixel_accuracy(spread, {1, 2, 3});
  CHECK(acc[0] == doctest::Approx(0.25));
  CHECK(acc[1] == doctest::Approx(0.50));
  CHECK(acc[2] == doctest::Approx(0.75));

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-6, 6);
  std::vector<PredictionRecord> random(60);
  for (auto& r : random) {
    r.predicted = {d(rng), d(rng)};
    r.ground_truth = {d(rng), d(rng)};
  }
  const auto curve = pixel_accuracy(random, {0.5, 1, 2, 3, 5, 8, 20});
  for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
  CHECK(curve.front() >= 0.0);
  CHECK(curve.back() <= 1.0);

  CHECK_THROWS_AS(pixel_accuracy({}, {1}), std::invalid_argument);
}

TEST_CASE("error at 95% recall: separable, tied, and degenerate score sets") {
  // perfectly separable
  std::vector<double> s1 = {0.9, 0.8, 0.7, 0.2, 0.1};
  std::vector<uint8_t> l1 = {1, 1, 1, 0, 0};
  CHECK(error_at_95_recall(s1, l1) == 0.0);

  // 20 matches at 1.0, 10 non-matches at 1.0, 10 non-matches at 0.0:
  // admitting all matches catches half the non-matches
  std::vector<double> s2;
  std::vector<uint8_t> l2;
  for (int i = 0; i < 20; ++i) { s2.push_back(1.0); l2.push_back(1); }
  for (int i = 0; i < 10; ++i) { s2.push_back(1.0); l2.push_back(0); }
  for (int i = 0; i < 10; ++i) { s2.push_back(0.0); l2.push_back(0); }
  CHECK(error_at_95_recall(s2, l2) == 50.0);

  // all scores equal: everything is admitted together
  std::vector<double> s3(12, 0.4);
  std::vector<uint8_t> l3(12, 0);
  for (int i = 0; i < 6; ++i) l3[static_cast<size_t>(i)] = 1;
  CHECK(error_at_95_recall(s3, l3) == 100.0);

  std::vector<double> s4 = {0.1, 0.2};
  std::vector<uint8_t> l4 = {1, 1};
  CHECK_THROWS_AS(error_at_95_recall(s4, l4), std::invalid_argument);
}

TEST_CASE("error at 95% recall equals the exhaustive sweep on random sets") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> match_score(0.3, 1.0);
  std::uniform_real_distribution<double> non_score(0.0, 0.7);
  std::uniform_int_distribution<int> n_match(5, 60), n_non(5, 60);
  std::uniform_int_distribution<int> quant(1, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores;
    std::vector<uint8_t> labels;
    const int q = quant(rng);  // quantized scores force plenty of ties
    for (int i = n_match(rng); i > 0; --i) {
      scores.push_back(std::round(match_score(rng) * q) / q);
      labels.push_back(1);
    }
    for (int i = n_non(rng); i > 0; --i) {
      scores.push_back(std::round(non_score(rng) * q) / q);
      labels.push_back(0);
    }
    CHECK(error_at_95_recall(scores, labels) ==
          error_at_95_recall_bruteforce(scores, labels));
  }
}

TEST_CASE("apply_homography: identity, translation, 3-vector oracle") {
  const Eigen::Vector2d p(3.5, -2.25);
  CHECK((apply_homography(Homography::Identity(), p) - p).norm() == 0.0);

  Homography t = Homography::Identity();
  t(0, 2) = 4.0;
  t(1, 2) = -1.5;
  const Eigen::Vector2d q = apply_homography(t, p);
  CHECK(q.x() == doctest::Approx(7.5));
  CHECK(q.y() == doctest::Approx(-3.75));

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Homography h = Homography::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h(r, c) += 0.3 * d(rng);
    const Eigen::Vector2d x(5 * d(rng), 5 * d(rng));
    const Eigen::Vector2d y = apply_homography(h, x);
    // direct 3-vector computation
    const double w = h(2, 0) * x.x() + h(2, 1) * x.y() + h(2, 2);
    const double u = (h(0, 0) * x.x() + h(0, 1) * x.y() + h(0, 2)) / w;
    const double v = (h(1, 0) * x.x() + h(1, 1) * x.y() + h(1, 2)) / w;
    CHECK(std::abs(y.x() - u) < 1e-9);
    CHECK(std::abs(y.y() - v) < 1e-9);

    // inverse round trip away from the vanishing line
    const Eigen::Vector2d back = apply_homography(h.inverse(), y);
    CHECK((back - x).norm() < 1e-6);
  }

  Homography vanish = Homography::Identity();
  vanish(2, 2) = 0.0;
  vanish(2, 0) = 1.0;
  CHECK_THROWS_AS(apply_homography(vanish, {0.0, 5.0}), std::domain_error);
}

TEST_CASE("backprojection report: exact pairs and hand-counted stats") {
  std::map<int, Homography> hs;
  hs[0] = Homography::Identity();

  std::vector<Correspondence> perfect(6);
  for (int i = 0; i < 6; ++i) {
    perfect[static_cast<size_t>(i)] = {{double(i), double(2 * i)}, {double(i), double(2 * i)}, 0};
  }
  BackprojectionReport r = backprojection_report(perfect, hs, 5.0);
  CHECK(r.mean_error == 0.0);
  CHECK(r.std_error == 0.0);
  CHECK(r.inlier_percent == 100.0);

  // two pairs with errors 1 and 3 against threshold 2
  std::vector<Correspondence> two = {
      {{0.0, 0.0}, {1.0, 0.0}, 0},
      {{0.0, 0.0}, {0.0, 3.0}, 0},
  };
  BackprojectionReport r2 = backprojection_report(two, hs, 2.0);
  CHECK(r2.mean_error == doctest::Approx(2.0));
  CHECK(r2.std_error == doctest::Approx(1.0));
  CHECK(r2.inlier_percent == doctest::Approx(50.0));

  std::map<int, Homography> singular;
  singular[0] = Homography::Zero();
  CHECK_THROWS_AS(backprojection_report(two, singular, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(backprojection_report(two, hs, 0.0), std::invalid_argument);
}

TEST_CASE("reference rows are present for side-by-side display") {
  const auto& rows = reference_backprojection_rows();
  REQUIRE(rows.size() == 5);
  CHECK(rows.back().method == "Deep-PT");
  CHECK(rows.back().mean_error == doctest::Approx(2.71));
  CHECK(rows.back().std_error == doctest::Approx(2.81));
  CHECK(rows.back().inlier_percent == doctest::Approx(82.0));
}

TEST_CASE("correspondence and homography files round trip") {
  const fs::path dir = fs::temp_directory_path() / "dpt_eval";
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "corr.txt");
    f << "# comment line\n";
    f << "1.5 2.5 3.5 4.5 7\n";
    f << "0 0 1 1 2\n";
  }
  auto corr = load_correspondences((dir / "corr.txt").string());
  REQUIRE(corr.size() == 2);
  CHECK(corr[0].prev.x() == 1.5);
  CHECK(corr[0].patch_id == 7);

  {
    std::ofstream f(dir / "homography_7.txt");
    f << "1 0 2  0 1 3  0 0 1\n";
  }
  auto hs = load_homographies(dir.string());
  REQUIRE(hs.count(7) == 1);
  CHECK(hs[7](0, 2) == 2.0);
  CHECK(hs[7](1, 2) == 3.0);
  fs::remove_all(dir);
}

}  // TEST_SUITE
