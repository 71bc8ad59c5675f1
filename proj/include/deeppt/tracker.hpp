#pragma once

#include "deeppt/network.hpp"
#include "deeppt/optim.hpp"
#include "deeppt/samples.hpp"
#include "deeppt/scoremap.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dpt {

/// Channel widths of the nine-layer feature stack. Each layer is a valid
/// 3x3 convolution, ReLU after all but the last, so the receptive field is
/// 19x19 and a 55x55 window yields the 37x37 map.
inline const std::vector<int> kDefaultConvWidths = {16, 16, 32, 32, 64, 64, 96, 96, 128};

std::vector<ConvLayerParams<float>> make_tracker_convs(
    const std::vector<int>& widths = kDefaultConvWidths, uint32_t seed = 1);

/// Luminance scaled to [0,1] with the patch mean removed, applied to each
/// patch independently.
Tensorf normalize_patch(const uint8_t* pixels, int size);
Tensorf normalize_patch(std::span<const uint8_t> pixels, int size);

/// 128-vector (or the configured final width) for a 19x19 patch.
VecX<float> extract_template_features(const std::vector<ConvLayerParams<float>>& convs,
                                      const Tensorf& patch19);

/// (final width, 37, 37) feature map for a 55x55 window, through the same
/// (shared) conv parameters as the template branch.
Tensorf extract_search_features(const std::vector<ConvLayerParams<float>>& convs,
                                const Tensorf& patch55);

/// Normalization plus both branches plus correlation for one sample.
ScoreMapF score_sample(const std::vector<ConvLayerParams<float>>& convs,
                       const TrackingSample& sample);

struct EpochLog {
  std::vector<double> mean_loss;  // one entry per epoch
};

/// Mini-batch Adam training of the conv stack on tracking samples with
/// seeded shuffling. Gradients within a batch reduce in sample order, so
/// results are identical for any thread count.
EpochLog train_tracker(std::vector<ConvLayerParams<float>>& convs,
                       std::span<const TrackingSample> samples, const TrainConfig& config,
                       int threads = 1);

/// Fraction of samples whose predicted displacement lies within
/// `pixel_radius` (Euclidean) of the ground truth.
double tracker_accuracy(const std::vector<ConvLayerParams<float>>& convs,
                        std::span<const TrackingSample> samples, double pixel_radius,
                        int threads = 1);

}  // namespace dpt
