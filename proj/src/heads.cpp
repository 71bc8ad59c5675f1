#include "deeppt/heads.hpp"

#include "deeppt/threading.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dpt {

std::vector<DenseLayerParams<float>> make_score_head(uint32_t seed) {
  return make_mlp<float>({kMapSize * kMapSize, 512, 256, 2}, seed);
}

std::vector<DenseLayerParams<float>> make_detector_head(int feature_width, uint32_t seed) {
  return make_mlp<float>({feature_width, 64, 2}, seed);
}

float head_probability(const std::vector<DenseLayerParams<float>>& head,
                       const VecX<float>& input) {
  const Topology topo = mlp_topology(static_cast<int>(head.size()));
  Tensorf x({static_cast<int>(input.size())}, input);
  Tensorf logits = network_forward<float>({}, head, topo, x);
  const VecX<float> p = softmax(logits.vec());
  return p(1);
}

float match_score(const std::vector<DenseLayerParams<float>>& head, const ScoreMapF& score) {
  check_map_extents(score, "score map");
  RowMatX<float> row_major = score;
  Eigen::Map<const VecX<float>> v(row_major.data(), row_major.size());
  return head_probability(head, v);
}

float trackability_score(const std::vector<DenseLayerParams<float>>& head,
                         const VecX<float>& feature) {
  return head_probability(head, feature);
}

HeadTrainResult train_head_on_features(std::vector<DenseLayerParams<float>>& head,
                                       const MatX<float>& features,
                                       std::span<const uint8_t> labels,
                                       const TrainConfig& config) {
  config.validate();
  if (features.cols() == 0) throw std::invalid_argument("training needs at least one example");
  if (static_cast<size_t>(features.cols()) != labels.size())
    throw std::invalid_argument("feature/label counts differ");

  HeadTrainResult result;
  const size_t positives = static_cast<size_t>(
      std::count(labels.begin(), labels.end(), static_cast<uint8_t>(1)));
  if (positives == 0 || positives == labels.size()) result.single_class_warning = true;

  const Topology topo = mlp_topology(static_cast<int>(head.size()));
  ParamViews<float> params = dense_param_views(head);
  AdamState<float> state = AdamState<float>::zeros_like(params);

  std::vector<DenseGrads<float>> acc(head.size());
  auto reset_acc = [&] {
    for (size_t i = 0; i < head.size(); ++i) {
      acc[i].weights = MatX<float>::Zero(head[i].weights.rows(), head[i].weights.cols());
      acc[i].biases = VecX<float>::Zero(head[i].biases.size());
    }
  };

  std::mt19937 rng(config.seed);
  std::vector<size_t> order(static_cast<size_t>(features.cols()));
  std::iota(order.begin(), order.end(), size_t{0});

  int64_t iteration = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t count = std::min<size_t>(config.batch_size, order.size() - start);
      reset_acc();
      const float inv = 1.f / static_cast<float>(count);
      for (size_t k = 0; k < count; ++k) {
        const size_t idx = order[start + k];
        ForwardCache<float> cache;
        Tensorf x({static_cast<int>(features.rows())}, features.col(static_cast<Eigen::Index>(idx)));
        Tensorf logits = network_forward<float>({}, head, topo, x, &cache);
        VecX<float> target = VecX<float>::Zero(2);
        target(labels[idx] ? 1 : 0) = 1.f;
        CrossEntropyResult<float> ce = softmax_cross_entropy<float>(logits.vec(), target);
        epoch_loss += ce.loss;
        Tensorf g({2}, ce.score_grad);
        StackGradients<float> sg = network_backward<float>({}, head, topo, cache, g);
        for (size_t i = 0; i < head.size(); ++i) {
          acc[i].weights += inv * sg.dense[i].weights;
          acc[i].biases += inv * sg.dense[i].biases;
        }
      }
      adam_update(params, dense_grad_views(acc), state, config, epoch, iteration);
      ++iteration;
    }
    result.mean_loss.push_back(epoch_loss / static_cast<double>(features.cols()));
  }
  return result;
}

HeadTrainResult train_score_head(NetworkParams<float>& params,
                                 std::span<const ScorePairSample> pairs,
                                 const TrainConfig& config, int threads) {
  if (pairs.empty()) throw std::invalid_argument("training needs at least one pair");
  auto head_it = params.heads.find(kScoreHeadName);
  if (head_it == params.heads.end())
    throw std::invalid_argument("params have no '" + std::string(kScoreHeadName) + "' head");

  // conv stack frozen: score maps are computed once, up front
  const Eigen::Index cells = static_cast<Eigen::Index>(kMapSize) * kMapSize;
  MatX<float> features(cells, static_cast<Eigen::Index>(pairs.size()));
  std::vector<uint8_t> labels(pairs.size());
  parallel_for(static_cast<long>(pairs.size()), threads, [&](long i) {
    const ScorePairSample& p = pairs[static_cast<size_t>(i)];
    const VecX<float> tf = extract_template_features(
        params.conv, normalize_patch(p.patch_a.data(), kTemplateSize));
    const Tensorf sf = extract_search_features(
        params.conv, normalize_patch(p.patch_b.data(), kSearchSize));
    RowMatX<float> score = correlate(tf, sf);
    features.col(i) = Eigen::Map<const VecX<float>>(score.data(), cells);
    labels[static_cast<size_t>(i)] = p.match ? 1 : 0;
  });

  return train_head_on_features(head_it->second, features, labels, config);
}

DetectorLabels balance_labels(const std::vector<LabeledPoint>& raw, uint32_t seed) {
  if (raw.empty()) throw std::invalid_argument("no labeled points to balance");
  std::vector<LabeledPoint> pos, neg;
  for (const LabeledPoint& p : raw) (p.positive ? pos : neg).push_back(p);

  DetectorLabels out;
  out.positives_before_balance = static_cast<int>(pos.size());
  out.negatives_before_balance = static_cast<int>(neg.size());
  if (pos.empty() || neg.empty()) {
    out.degenerate_balance = true;
    out.points = raw;
    return out;
  }
  std::mt19937 rng(seed);
  auto& majority = pos.size() > neg.size() ? pos : neg;
  const size_t target = std::min(pos.size(), neg.size());
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(target);
  out.points = pos;
  out.points.insert(out.points.end(), neg.begin(), neg.end());
  std::sort(out.points.begin(), out.points.end(),
            [](const LabeledPoint& a, const LabeledPoint& b) {
              return a.sample_index < b.sample_index;
            });
  return out;
}

DetectorLabels generate_detector_labels(const std::vector<ConvLayerParams<float>>& convs,
                                        std::span<const TrackingSample> samples,
                                        uint32_t seed, int threads) {
  if (samples.empty()) throw std::invalid_argument("no samples to label");
  std::vector<LabeledPoint> raw(samples.size());
  parallel_for(static_cast<long>(samples.size()), threads, [&](long i) {
    const TrackingSample& s = samples[static_cast<size_t>(i)];
    const Displacement d = predict_displacement(score_sample(convs, s));
    const double ex = d.dx - s.dx, ey = d.dy - s.dy;
    LabeledPoint p;
    p.x = s.x;
    p.y = s.y;
    p.positive = std::sqrt(ex * ex + ey * ey) <= kCorrectTrackRadius;
    p.sample_index = static_cast<int>(i);
    raw[static_cast<size_t>(i)] = p;
  });
  return balance_labels(raw, seed);
}

HeadTrainResult train_detector_head(NetworkParams<float>& params,
                                    std::span<const TrackingSample> samples,
                                    const DetectorLabels& labels, const TrainConfig& config,
                                    int threads) {
  if (labels.points.empty()) throw std::invalid_argument("no labeled points to train on");
  auto head_it = params.heads.find(kDetectorHeadName);
  if (head_it == params.heads.end())
    throw std::invalid_argument("params have no '" + std::string(kDetectorHeadName) + "' head");

  for (const LabeledPoint& p : labels.points)
    if (p.sample_index < 0 || p.sample_index >= static_cast<int>(samples.size()))
      throw std::invalid_argument("label refers to a missing sample");

  const int width = params.conv.back().out_channels();
  MatX<float> features(width, static_cast<Eigen::Index>(labels.points.size()));
  std::vector<uint8_t> y(labels.points.size());
  parallel_for(static_cast<long>(labels.points.size()), threads, [&](long i) {
    const LabeledPoint& p = labels.points[static_cast<size_t>(i)];
    const TrackingSample& s = samples[static_cast<size_t>(p.sample_index)];
    features.col(i) = extract_template_features(
        params.conv, normalize_patch(s.tmpl.data(), kTemplateSize));
    y[static_cast<size_t>(i)] = p.positive ? 1 : 0;
  });

  return train_head_on_features(head_it->second, features, y, config);
}

}  // namespace dpt
