#pragma once

#include "deeppt/network.hpp"
#include "deeppt/optim.hpp"
#include "deeppt/scoremap.hpp"
#include "deeppt/tracker.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace dpt {

inline constexpr const char* kScoreHeadName = "score";
inline constexpr const char* kDetectorHeadName = "detector";

/// 1369 -> 512 -> 256 -> 2 on the vectorized score map.
std::vector<DenseLayerParams<float>> make_score_head(uint32_t seed = 2);

/// 128-in (or the stack's final width) -> 64 -> 2 on the template feature.
std::vector<DenseLayerParams<float>> make_detector_head(int feature_width = 128,
                                                        uint32_t seed = 3);

/// Class-1 ("match") probability of the two-way softmax over the head's
/// logits for a vectorized score map.
float match_score(const std::vector<DenseLayerParams<float>>& head, const ScoreMapF& score);

/// Class-1 ("trackable") probability for a template feature vector.
float trackability_score(const std::vector<DenseLayerParams<float>>& head,
                         const VecX<float>& feature);

/// A labeled pair for the score head: template-sized patch against a
/// search-sized patch.
struct ScorePairSample {
  std::array<uint8_t, kTemplateSize * kTemplateSize> patch_a{};
  std::array<uint8_t, kSearchSize * kSearchSize> patch_b{};
  bool match = false;
};

struct HeadTrainResult {
  std::vector<double> mean_loss;       // per epoch
  bool single_class_warning = false;   // degenerate label set, training proceeded
};

/// Trains params.heads["score"] by two-class cross-entropy on score maps.
/// Conv parameters are never touched: features are computed once with the
/// frozen stack and only the head sees the optimizer.
HeadTrainResult train_score_head(NetworkParams<float>& params,
                                 std::span<const ScorePairSample> pairs,
                                 const TrainConfig& config, int threads = 1);

/// Tracker-derived supervision for the detector: positive iff the tracker's
/// prediction lands within 3 px (Euclidean) of the ground truth.
struct LabeledPoint {
  int x = 0;
  int y = 0;
  bool positive = false;
  int sample_index = 0;  // into the sample set the label came from
};

struct DetectorLabels {
  std::vector<LabeledPoint> points;       // balanced: equal class counts
  bool degenerate_balance = false;        // one class was empty
  int positives_before_balance = 0;
  int negatives_before_balance = 0;
};

inline constexpr double kCorrectTrackRadius = 3.0;

/// Runs the tracker over the samples, labels each point by the 3-pixel
/// criterion, and subsamples the majority class down to the minority count
/// (seeded). With a single-class outcome everything is kept and
/// degenerate_balance is set.
DetectorLabels generate_detector_labels(const std::vector<ConvLayerParams<float>>& convs,
                                        std::span<const TrackingSample> samples,
                                        uint32_t seed, int threads = 1);

/// Label/balance stage alone, for scripted predictions.
DetectorLabels balance_labels(const std::vector<LabeledPoint>& raw, uint32_t seed);

/// Trains params.heads["detector"] on the labeled points' template features;
/// conv parameters stay frozen exactly as in train_score_head.
HeadTrainResult train_detector_head(NetworkParams<float>& params,
                                    std::span<const TrackingSample> samples,
                                    const DetectorLabels& labels, const TrainConfig& config,
                                    int threads = 1);

/// Shared core: two-class cross-entropy training of a dense head on fixed
/// feature vectors. Exposed for tests and reused by both heads.
HeadTrainResult train_head_on_features(std::vector<DenseLayerParams<float>>& head,
                                       const MatX<float>& features,  // one column per example
                                       std::span<const uint8_t> labels,
                                       const TrainConfig& config);

/// Head forward on a raw feature vector -> class-1 probability.
float head_probability(const std::vector<DenseLayerParams<float>>& head,
                       const VecX<float>& input);

}  // namespace dpt
