#include "deeppt/tracker.hpp"

#include "deeppt/threading.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dpt {

std::vector<ConvLayerParams<float>> make_tracker_convs(const std::vector<int>& widths,
                                                       uint32_t seed) {
  if (widths.size() != 9)
    throw std::invalid_argument("the feature stack has nine conv layers");
  return make_conv_stack<float>(widths, seed, 1);
}

Tensorf normalize_patch(const uint8_t* pixels, int size) {
  Tensorf t({1, size, size});
  const Eigen::Index n = t.size();
  for (Eigen::Index i = 0; i < n; ++i) t[i] = static_cast<float>(pixels[i]) / 255.f;
  t.vec().array() -= t.vec().mean();
  return t;
}

Tensorf normalize_patch(std::span<const uint8_t> pixels, int size) {
  if (static_cast<int>(pixels.size()) != size * size)
    throw std::invalid_argument("patch byte count does not match extents");
  return normalize_patch(pixels.data(), size);
}

namespace {

void check_patch(const Tensorf& patch, int size, const char* what) {
  if (patch.rank() != 3 || patch.extent(0) != 1 || patch.extent(1) != size ||
      patch.extent(2) != size)
    throw std::invalid_argument(std::string(what) + " must be (1," + std::to_string(size) +
                                "," + std::to_string(size) + ")");
}

}  // namespace

VecX<float> extract_template_features(const std::vector<ConvLayerParams<float>>& convs,
                                      const Tensorf& patch19) {
  check_patch(patch19, kTemplateSize, "template patch");
  const Topology topo = conv_stack_topology(static_cast<int>(convs.size()));
  Tensorf out = network_forward<float>(convs, {}, topo, patch19);
  return out.vec();  // (C,1,1) flattens to C
}

Tensorf extract_search_features(const std::vector<ConvLayerParams<float>>& convs,
                                const Tensorf& patch55) {
  check_patch(patch55, kSearchSize, "search patch");
  const Topology topo = conv_stack_topology(static_cast<int>(convs.size()));
  return network_forward<float>(convs, {}, topo, patch55);
}

ScoreMapF score_sample(const std::vector<ConvLayerParams<float>>& convs,
                       const TrackingSample& sample) {
  const VecX<float> tf =
      extract_template_features(convs, normalize_patch(sample.tmpl.data(), kTemplateSize));
  const Tensorf sf =
      extract_search_features(convs, normalize_patch(sample.search.data(), kSearchSize));
  return correlate(tf, sf);
}

namespace {

struct SampleGrads {
  StackGradients<float> tmpl_branch;
  StackGradients<float> search_branch;
  double loss = 0;
};

// Forward both branches, correlate, loss, then backprop through the shared
// stack. The two branches' parameter gradients are summed by the caller.
SampleGrads sample_gradients(const std::vector<ConvLayerParams<float>>& convs,
                             const Topology& topo, const TrackingSample& sample) {
  SampleGrads out;
  ForwardCache<float> tmpl_cache, search_cache;
  const Tensorf tmpl_in = normalize_patch(sample.tmpl.data(), kTemplateSize);
  const Tensorf search_in = normalize_patch(sample.search.data(), kSearchSize);
  Tensorf tmpl_out = network_forward<float>(convs, {}, topo, tmpl_in, &tmpl_cache);
  Tensorf search_out = network_forward<float>(convs, {}, topo, search_in, &search_cache);

  const VecX<float> tf = tmpl_out.vec();
  const ScoreMapF score = correlate(tf, search_out);
  const ScoreMapF target =
      build_target_distribution<float>({sample.dx, sample.dy});
  TrackerLossResult<float> lr = tracker_loss(score, target);
  out.loss = lr.loss;

  VecX<float> grad_tmpl;
  Tensorf grad_search;
  correlate_backward(tf, search_out, lr.score_grad, grad_tmpl, grad_search);

  const int c = search_out.extent(0);
  Tensorf grad_tmpl_t({c, 1, 1}, grad_tmpl);
  out.tmpl_branch = network_backward<float>(convs, {}, topo, tmpl_cache, grad_tmpl_t);
  out.search_branch = network_backward<float>(convs, {}, topo, search_cache, grad_search);
  return out;
}

void accumulate(std::vector<ConvGrads<float>>& acc, const StackGradients<float>& g,
                float scale) {
  for (size_t i = 0; i < acc.size(); ++i) {
    acc[i].kernels.vec() += scale * g.conv[i].kernels.vec();
    acc[i].biases += scale * g.conv[i].biases;
  }
}

}  // namespace

EpochLog train_tracker(std::vector<ConvLayerParams<float>>& convs,
                       std::span<const TrackingSample> samples, const TrainConfig& config,
                       int threads) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("training needs at least one sample");

  const Topology topo = conv_stack_topology(static_cast<int>(convs.size()));
  ParamViews<float> params = conv_param_views(convs);
  AdamState<float> state = AdamState<float>::zeros_like(params);

  std::vector<ConvGrads<float>> acc(convs.size());
  for (size_t i = 0; i < convs.size(); ++i) {
    acc[i].kernels = Tensorf(convs[i].kernels.shape());
    acc[i].biases = VecX<float>::Zero(convs[i].biases.size());
  }

  std::mt19937 rng(config.seed);
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  EpochLog log;
  int64_t iteration = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t count = std::min<size_t>(config.batch_size, order.size() - start);
      std::vector<SampleGrads> slots(count);
      parallel_for(static_cast<long>(count), threads, [&](long i) {
        slots[static_cast<size_t>(i)] =
            sample_gradients(convs, topo, samples[order[start + static_cast<size_t>(i)]]);
      });
      for (auto& g : acc) {
        g.kernels.vec().setZero();
        g.biases.setZero();
      }
      const float inv = 1.f / static_cast<float>(count);
      for (const SampleGrads& s : slots) {
        accumulate(acc, s.tmpl_branch, inv);
        accumulate(acc, s.search_branch, inv);
        epoch_loss += s.loss;
      }
      adam_update(params, conv_grad_views(acc), state, config, epoch, iteration);
      ++iteration;
    }
    log.mean_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  return log;
}

double tracker_accuracy(const std::vector<ConvLayerParams<float>>& convs,
                        std::span<const TrackingSample> samples, double pixel_radius,
                        int threads) {
  if (samples.empty()) throw std::invalid_argument("accuracy needs at least one sample");
  std::vector<uint8_t> hits(samples.size(), 0);
  parallel_for(static_cast<long>(samples.size()), threads, [&](long i) {
    const TrackingSample& s = samples[static_cast<size_t>(i)];
    const Displacement d = predict_displacement(score_sample(convs, s));
    const double ex = d.dx - s.dx, ey = d.dy - s.dy;
    hits[static_cast<size_t>(i)] = std::sqrt(ex * ex + ey * ey) <= pixel_radius ? 1 : 0;
  });
  return std::accumulate(hits.begin(), hits.end(), 0.0) / static_cast<double>(samples.size());
}

}  // namespace dpt
