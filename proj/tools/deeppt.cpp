// deeppt: train, run, and evaluate the correlation feature tracker.
//
// Every command writes its fully resolved configuration (flags over config
// file over defaults) plus the seed into the run directory, so a run can be
// reproduced bit-exactly with --threads 1.

#include "deeppt/eval.hpp"
#include "deeppt/harris.hpp"
#include "deeppt/heads.hpp"
#include "deeppt/image.hpp"
#include "deeppt/kitti.hpp"
#include "deeppt/klt.hpp"
#include "deeppt/pipeline.hpp"
#include "deeppt/samples.hpp"
#include "deeppt/serialize.hpp"
#include "deeppt/threading.hpp"
#include "deeppt/tracker.hpp"
#include "deeppt/ubc.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpt;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binds each option to a JSON-applicable setter so a --config file can fill
// in anything the command line left at its default.
class OptionSet {
public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* opt = app_->add_option(flag, var, desc);
    Entry e;
    e.opt = opt;
    e.apply = [&var](const json& j) { var = j.get<T>(); };
    e.read = [&var]() { return json(var); };
    entries_[key_of(flag)] = std::move(e);
    return opt;
  }

  CLI::Option* add_flag(const std::string& flag, bool& var, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(flag, var, desc);
    Entry e;
    e.opt = opt;
    e.apply = [&var](const json& j) { var = j.get<bool>(); };
    e.read = [&var]() { return json(var); };
    entries_[key_of(flag)] = std::move(e);
    return opt;
  }

  void apply_config(const json& cfg) {
    if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = entries_.find(key);
      if (it == entries_.end())
        throw UsageError("unknown config key '" + key + "' for command " + app_->get_name());
      if (it->second.opt->count() == 0) {
        try {
          it->second.apply(value);
        } catch (const json::exception&) {
          throw UsageError("config key '" + key + "' has the wrong type");
        }
      }
    }
  }

  json resolved() const {
    json out = json::object();
    for (const auto& [key, e] : entries_) out[key] = e.read();
    return out;
  }

private:
  static std::string key_of(const std::string& flag) {
    std::string first = flag.substr(0, flag.find(','));
    const size_t pos = first.find_first_not_of('-');
    return first.substr(pos == std::string::npos ? 0 : pos);
  }

  struct Entry {
    CLI::Option* opt = nullptr;
    std::function<void(const json&)> apply;
    std::function<json()> read;
  };
  CLI::App* app_;
  std::map<std::string, Entry> entries_;
};

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw UsageError("malformed config file '" + path + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
}

fs::path prepare_out_dir(const std::string& out_dir, const std::string& command,
                         const json& resolved) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  json cfg;
  cfg["command"] = command;
  cfg["options"] = resolved;
  write_json(dir / "resolved_config.json", cfg);
  return dir;
}

std::vector<int> parse_width_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::string data_root_default(const char* subdir) {
  if (const char* env = std::getenv("DEEPPT_DATA")) return (fs::path(env) / subdir).string();
  return {};
}

NetworkParams<float> load_weights_or_fail(const std::string& path, const char* stage) {
  if (path.empty() || !fs::exists(path))
    throw PreconditionError(std::string(stage) +
                            " needs --weights pointing at an existing DPT1 file");
  return load_params(path);
}

std::vector<GrayImage> load_frame_dir(const std::string& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".pgm" || ext == ".bmp") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<GrayImage> frames;
  for (const auto& p : paths) frames.push_back(load_gray_image(p.string()));
  if (frames.empty()) throw std::runtime_error("no frames found in '" + dir + "'");
  return frames;
}

// KITTI-style directory walk: <root>[/training]/image_2 (or image_0) with
// NNNNNN_10/_11 pairs and flow_noc (or flow_occ) ground truth.
struct KittiPair {
  GrayImage img_t, img_t1;
  FlowField flow;
  int index = 0;
};

class KittiWalker {
public:
  explicit KittiWalker(const std::string& root) {
    if (root.empty())
      throw PreconditionError("no dataset directory given (--kitti or DEEPPT_DATA)");
    const fs::path base = fs::exists(fs::path(root) / "training")
                              ? fs::path(root) / "training"
                              : fs::path(root);
    for (const char* d : {"image_2", "image_0", "colored_0"})
      if (fs::is_directory(base / d)) {
        image_dir_ = base / d;
        break;
      }
    for (const char* d : {"flow_noc", "flow_occ"})
      if (fs::is_directory(base / d)) {
        flow_dir_ = base / d;
        break;
      }
    if (image_dir_.empty() || flow_dir_.empty())
      throw std::runtime_error("'" + root + "' has no image_*/flow_* dataset layout");
  }

  bool load(int index, KittiPair& pair) const {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d_10.png", index);
    const fs::path img0 = image_dir_ / name;
    const fs::path flow = flow_dir_ / name;
    std::snprintf(name, sizeof(name), "%06d_11.png", index);
    const fs::path img1 = image_dir_ / name;
    if (!fs::exists(img0) || !fs::exists(img1) || !fs::exists(flow)) return false;
    pair.img_t = load_gray_image(img0.string());
    pair.img_t1 = load_gray_image(img1.string());
    pair.flow = load_kitti_flow(flow.string());
    pair.index = index;
    return true;
  }

private:
  fs::path image_dir_, flow_dir_;
};

void print_accuracy_table(std::ostream& out, const std::string& name,
                          const std::vector<double>& thresholds,
                          const std::vector<double>& acc) {
  out << std::left << std::setw(10) << name << std::fixed;
  for (size_t i = 0; i < thresholds.size(); ++i)
    out << "  " << std::setprecision(0) << thresholds[i] << "px " << std::setprecision(2)
        << 100.0 * acc[i] << "%";
  out << "\n";
  out.unsetf(std::ios_base::floatfield);
  out.precision(6);
}

void write_loss_log(const fs::path& path, const std::vector<double>& losses) {
  std::ofstream f(path, std::ios::trunc);
  for (size_t i = 0; i < losses.size(); ++i)
    f << i << " " << std::setprecision(10) << losses[i] << "\n";
}

// ---- command implementations ----

int cmd_gen_synthetic(int count, uint32_t seed, int image_size, const std::string& out_dir,
                      const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "gen-synthetic", resolved);
  auto samples = make_synthetic_translations(count, seed, image_size);
  save_samples(samples, (dir / "samples.dpts").string());
  json metrics;
  metrics["samples"] = samples.size();
  write_json(dir / "metrics.json", metrics);
  std::cout << "wrote " << samples.size() << " samples to "
            << (dir / "samples.dpts").string() << "\n";
  return 0;
}

int cmd_gen_samples(const std::string& kitti, int max_pairs, int max_per_pair,
                    double harris_threshold, int nms_radius, const std::string& out_dir,
                    const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "gen-samples", resolved);
  KittiWalker walker(kitti);
  HarrisParams hp;
  hp.rel_threshold = static_cast<float>(harris_threshold);
  hp.nms_radius = nms_radius;

  std::vector<TrackingSample> all;
  SampleGenReport totals;
  KittiPair pair;
  int pairs_used = 0;
  for (int index = 0; pairs_used < max_pairs && index < max_pairs + 400; ++index) {
    if (!walker.load(index, pair)) continue;
    ++pairs_used;
    const auto corners = harris_corners(pair.img_t, hp);
    SampleGenReport rep;
    auto samples = generate_tracking_samples(pair.img_t, pair.img_t1, pair.flow, corners,
                                             max_per_pair, &rep);
    all.insert(all.end(), samples.begin(), samples.end());
    totals.accepted += rep.accepted;
    totals.rejected_invalid_flow += rep.rejected_invalid_flow;
    totals.rejected_motion += rep.rejected_motion;
    totals.rejected_margin += rep.rejected_margin;
  }
  if (all.empty()) throw std::runtime_error("no samples generated; check the dataset layout");
  save_samples(all, (dir / "samples.dpts").string());

  json metrics;
  metrics["pairs"] = pairs_used;
  metrics["samples"] = all.size();
  metrics["rejected_invalid_flow"] = totals.rejected_invalid_flow;
  metrics["rejected_motion"] = totals.rejected_motion;
  metrics["rejected_margin"] = totals.rejected_margin;
  write_json(dir / "metrics.json", metrics);
  std::cout << "wrote " << all.size() << " samples from " << pairs_used << " image pairs\n";
  return 0;
}

int cmd_train_tracker(const std::string& samples_path, const std::string& widths_csv,
                      const TrainConfig& cfg, double holdout, int threads,
                      const std::string& out_dir, const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "train-tracker", resolved);
  auto samples = load_samples(samples_path);
  if (samples.empty()) throw std::runtime_error("sample cache is empty");

  auto convs = make_tracker_convs(parse_width_list(widths_csv), cfg.seed);

  size_t train_count = samples.size();
  if (holdout > 0 && holdout < 1)
    train_count = samples.size() -
                  static_cast<size_t>(holdout * static_cast<double>(samples.size()));
  if (train_count == 0) throw std::runtime_error("holdout fraction leaves no training data");

  std::span<const TrackingSample> train_span(samples.data(), train_count);
  const EpochLog log = train_tracker(convs, train_span, cfg, threads);

  NetworkParams<float> params;
  params.conv = std::move(convs);
  save_params(params, (dir / "weights.dpt").string());
  write_loss_log(dir / "loss_log.txt", log.mean_loss);

  json metrics;
  metrics["epochs"] = log.mean_loss.size();
  metrics["first_epoch_loss"] = log.mean_loss.front();
  metrics["final_epoch_loss"] = log.mean_loss.back();
  metrics["train_samples"] = train_count;
  if (train_count < samples.size()) {
    std::span<const TrackingSample> held(samples.data() + train_count,
                                         samples.size() - train_count);
    metrics["holdout_samples"] = held.size();
    metrics["holdout_accuracy_1px"] = tracker_accuracy(params.conv, held, 1.0, threads);
    metrics["holdout_accuracy_3px"] = tracker_accuracy(params.conv, held, 3.0, threads);
  }
  write_json(dir / "metrics.json", metrics);
  std::cout << "final epoch loss " << log.mean_loss.back() << " (first "
            << log.mean_loss.front() << ")\n";
  if (metrics.contains("holdout_accuracy_1px"))
    std::cout << "holdout accuracy: 1px "
              << 100.0 * metrics["holdout_accuracy_1px"].get<double>() << "%, 3px "
              << 100.0 * metrics["holdout_accuracy_3px"].get<double>() << "%\n";
  return 0;
}

int cmd_train_score(const std::string& weights, const std::string& ubc_dir,
                    const std::string& pairs_file, int max_pairs, const TrainConfig& cfg,
                    int threads, const std::string& out_dir, const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "train-score", resolved);
  NetworkParams<float> params = load_weights_or_fail(weights, "train-score");
  if (params.conv.empty())
    throw PreconditionError("the weights file carries no conv stack to freeze");
  if (!params.heads.count(kScoreHeadName))
    params.heads[kScoreHeadName] = make_score_head(cfg.seed + 1);

  if (ubc_dir.empty())
    throw PreconditionError("train-score needs --ubc (or DEEPPT_DATA)");
  UbcDataset ds = parse_ubc_dataset(ubc_dir);
  auto lines = load_match_pair_lines((fs::path(ubc_dir) / pairs_file).string());
  if (max_pairs > 0 && static_cast<int>(lines.size()) > max_pairs)
    lines.resize(static_cast<size_t>(max_pairs));
  if (lines.empty()) throw std::runtime_error("no match pairs found");

  std::vector<ScorePairSample> pairs;
  pairs.reserve(lines.size());
  for (const auto& l : lines) {
    ScorePairSample p;
    const GrayImage a = center_crop(ds.extract_patch(l.patch1), kTemplateSize);
    const GrayImage b = center_crop(ds.extract_patch(l.patch2), kSearchSize);
    std::copy(a.pixels.begin(), a.pixels.end(), p.patch_a.begin());
    std::copy(b.pixels.begin(), b.pixels.end(), p.patch_b.begin());
    p.match = l.match();
    pairs.push_back(p);
  }

  const HeadTrainResult log = train_score_head(params, pairs, cfg, threads);
  save_params(params, (dir / "weights.dpt").string());
  write_loss_log(dir / "loss_log.txt", log.mean_loss);

  json metrics;
  metrics["pairs"] = pairs.size();
  metrics["first_epoch_loss"] = log.mean_loss.front();
  metrics["final_epoch_loss"] = log.mean_loss.back();
  metrics["single_class_warning"] = log.single_class_warning;
  write_json(dir / "metrics.json", metrics);
  if (log.single_class_warning)
    std::cerr << "warning: training pairs hold a single class\n";
  std::cout << "score head trained on " << pairs.size() << " pairs; final loss "
            << log.mean_loss.back() << "\n";
  return 0;
}

int cmd_train_detector(const std::string& weights, const std::string& samples_path,
                       const TrainConfig& cfg, int threads, const std::string& out_dir,
                       const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "train-detector", resolved);
  NetworkParams<float> params = load_weights_or_fail(weights, "train-detector");
  if (params.conv.empty())
    throw PreconditionError("the weights file carries no conv stack to freeze");
  if (!params.heads.count(kDetectorHeadName))
    params.heads[kDetectorHeadName] =
        make_detector_head(params.conv.back().out_channels(), cfg.seed + 2);

  auto samples = load_samples(samples_path);
  DetectorLabels labels = generate_detector_labels(params.conv, samples, cfg.seed, threads);
  if (labels.degenerate_balance)
    std::cerr << "warning: single-class labels; balancing skipped\n";

  const HeadTrainResult log = train_detector_head(params, samples, labels, cfg, threads);
  save_params(params, (dir / "weights.dpt").string());
  write_loss_log(dir / "loss_log.txt", log.mean_loss);

  json metrics;
  metrics["labeled_points"] = labels.points.size();
  metrics["positives_before_balance"] = labels.positives_before_balance;
  metrics["negatives_before_balance"] = labels.negatives_before_balance;
  metrics["degenerate_balance"] = labels.degenerate_balance;
  metrics["final_epoch_loss"] = log.mean_loss.back();
  write_json(dir / "metrics.json", metrics);
  std::cout << "detector head trained on " << labels.points.size() << " points\n";
  return 0;
}

int cmd_track(const std::string& weights, const std::string& frames_dir,
              const PipelineConfig& cfg, bool overlays, int threads,
              const std::string& out_dir, const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "track", resolved);
  NetworkParams<float> nets = load_weights_or_fail(weights, "track");
  if (!nets.heads.count(kScoreHeadName) || !nets.heads.count(kDetectorHeadName))
    throw PreconditionError("track needs weights holding both the score and detector heads");

  const std::vector<GrayImage> frames = load_frame_dir(frames_dir);
  SequenceResult result = run_sequence(frames, nets, cfg, threads);

  {
    std::ofstream table(dir / "track_table.txt", std::ios::trunc);
    write_track_table(table, result.state);
  }
  if (overlays) {
    fs::create_directories(dir / "overlays");
    for (size_t f = 0; f < frames.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04zu.png", f);
      save_png_rgb8(render_overlay(frames[f], result.state, static_cast<int>(f)),
                    (dir / "overlays" / name).string());
    }
  }

  json metrics;
  metrics["frames"] = frames.size();
  metrics["tracks"] = result.state.tracks.size();
  metrics["live"] = result.state.live_count();
  int reinits = 0;
  for (const auto& s : result.steps) reinits += s.reinitialized ? 1 : 0;
  metrics["reinitializations"] = reinits;
  write_json(dir / "metrics.json", metrics);
  std::cout << "tracked " << result.state.tracks.size() << " features over "
            << frames.size() << " frames (" << result.state.live_count()
            << " live at the end)\n";
  return 0;
}

int cmd_eval_kitti(const std::string& weights, const std::string& kitti, bool with_klt,
                   const std::string& thresholds_csv, int max_pairs, int max_points,
                   double harris_threshold, int threads, const std::string& out_dir,
                   const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "eval-kitti", resolved);
  NetworkParams<float> nets = load_weights_or_fail(weights, "eval-kitti");
  const std::vector<double> thresholds = parse_double_list(thresholds_csv);

  KittiWalker walker(kitti);
  HarrisParams hp;
  hp.rel_threshold = static_cast<float>(harris_threshold);

  std::vector<PredictionRecord> deep_records, klt_records;
  int reliable = 0, klt_total = 0;
  KittiPair pair;
  int pairs_used = 0;
  for (int index = 0; pairs_used < max_pairs && index < max_pairs + 400; ++index) {
    if (!walker.load(index, pair)) continue;
    ++pairs_used;
    const auto corners = harris_corners(pair.img_t, hp);
    SampleGenReport rep;
    const int per_pair_cap =
        max_points > 0 ? max_points - static_cast<int>(deep_records.size()) : -1;
    if (max_points > 0 && per_pair_cap <= 0) break;
    auto samples = generate_tracking_samples(pair.img_t, pair.img_t1, pair.flow, corners,
                                             per_pair_cap, &rep);
    Pyramid pyr_t, pyr_t1;
    if (with_klt) {
      pyr_t = build_pyramid(pair.img_t, 3);
      pyr_t1 = build_pyramid(pair.img_t1, 3);
      // both trackers must see the same point set
      std::erase_if(samples, [&](const TrackingSample& s) {
        return !lk_point_valid(pyr_t, {float(s.x), float(s.y)});
      });
    }
    std::vector<Displacement> preds(samples.size());
    parallel_for(static_cast<long>(samples.size()), threads, [&](long i) {
      preds[static_cast<size_t>(i)] =
          predict_displacement(score_sample(nets.conv, samples[static_cast<size_t>(i)]));
    });
    for (size_t i = 0; i < samples.size(); ++i) {
      const TrackingSample& s = samples[i];
      const size_t fi = pair.flow.idx(s.x, s.y);
      PredictionRecord r;
      r.ground_truth = {pair.flow.u[fi], pair.flow.v[fi]};
      r.predicted = {static_cast<double>(preds[i].dx), static_cast<double>(preds[i].dy)};
      deep_records.push_back(r);
      if (with_klt) {
        const FbResult fb = fb_track(pyr_t, pyr_t1, {float(s.x), float(s.y)});
        PredictionRecord k;
        k.ground_truth = r.ground_truth;
        k.predicted = {double(fb.point.x()) - s.x, double(fb.point.y()) - s.y};
        klt_records.push_back(k);
        ++klt_total;
        if (fb.reliable) ++reliable;
      }
    }
  }
  if (deep_records.empty()) throw std::runtime_error("no evaluation points were generated");

  json metrics;
  metrics["points"] = deep_records.size();
  metrics["thresholds"] = thresholds;
  const auto deep_acc = pixel_accuracy(deep_records, thresholds);
  metrics["tracker_accuracy"] = deep_acc;
  std::cout << "accuracy over " << deep_records.size() << " points\n";
  print_accuracy_table(std::cout, "tracker", thresholds, deep_acc);
  if (with_klt) {
    const auto klt_acc = pixel_accuracy(klt_records, thresholds);
    metrics["klt_accuracy"] = klt_acc;
    metrics["klt_reliable_fraction"] =
        klt_total ? static_cast<double>(reliable) / klt_total : 0.0;
    print_accuracy_table(std::cout, "fb-klt", thresholds, klt_acc);
  }
  write_json(dir / "metrics.json", metrics);
  return 0;
}

int cmd_eval_ubc(const std::string& weights, const std::string& ubc_dir,
                 const std::string& pairs_file, int max_pairs, int threads,
                 const std::string& out_dir, const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "eval-ubc", resolved);
  NetworkParams<float> nets = load_weights_or_fail(weights, "eval-ubc");
  auto head_it = nets.heads.find(kScoreHeadName);
  if (head_it == nets.heads.end())
    throw PreconditionError("eval-ubc needs weights holding the score head");

  if (ubc_dir.empty()) throw PreconditionError("eval-ubc needs --ubc (or DEEPPT_DATA)");
  UbcDataset ds = parse_ubc_dataset(ubc_dir);
  auto lines = load_match_pair_lines((fs::path(ubc_dir) / pairs_file).string());
  if (max_pairs > 0 && static_cast<int>(lines.size()) > max_pairs)
    lines.resize(static_cast<size_t>(max_pairs));
  if (lines.empty()) throw std::runtime_error("no match pairs found");

  std::vector<double> scores(lines.size());
  std::vector<uint8_t> labels(lines.size());
  parallel_for(static_cast<long>(lines.size()), threads, [&](long i) {
    const auto& l = lines[static_cast<size_t>(i)];
    const GrayImage a = center_crop(ds.extract_patch(l.patch1), kTemplateSize);
    const GrayImage b = center_crop(ds.extract_patch(l.patch2), kSearchSize);
    const VecX<float> tf =
        extract_template_features(nets.conv, normalize_patch(a.pixels, kTemplateSize));
    const Tensorf sf =
        extract_search_features(nets.conv, normalize_patch(b.pixels, kSearchSize));
    scores[static_cast<size_t>(i)] = match_score(head_it->second, correlate(tf, sf));
    labels[static_cast<size_t>(i)] = l.match() ? 1 : 0;
  });

  const double err95 = error_at_95_recall(scores, labels);
  json metrics;
  metrics["pairs"] = lines.size();
  metrics["dataset"] = ubc_dir;
  metrics["pairs_file"] = pairs_file;
  metrics["error_at_95_recall_percent"] = err95;
  write_json(dir / "metrics.json", metrics);
  std::cout << "evaluated " << ubc_dir << " / " << pairs_file << "\n";
  std::cout << "error at 95% recall: " << std::fixed << std::setprecision(2) << err95
            << "%\n";
  return 0;
}

int cmd_eval_backproj(const std::string& corr_file, const std::string& homography_dir,
                      double inlier_threshold, bool show_reference,
                      const std::string& out_dir, const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "eval-backproj", resolved);
  const auto pairs = load_correspondences(corr_file);
  const auto hs = load_homographies(homography_dir);
  const BackprojectionReport rep = backprojection_report(pairs, hs, inlier_threshold);

  std::cout << std::fixed << std::setprecision(2);
  std::cout << "back-projection over " << rep.pair_count << " pairs (inlier threshold "
            << rep.inlier_threshold << " px)\n";
  std::cout << std::left << std::setw(12) << "this run" << rep.mean_error << " +/- "
            << rep.std_error << "   " << rep.inlier_percent << "% inliers\n";
  if (show_reference) {
    for (const auto& row : reference_backprojection_rows())
      std::cout << std::left << std::setw(12) << row.method << row.mean_error << " +/- "
                << row.std_error << "   " << row.inlier_percent << "% inliers (reference)\n";
  }

  json metrics;
  metrics["pairs"] = rep.pair_count;
  metrics["mean_error"] = rep.mean_error;
  metrics["std_error"] = rep.std_error;
  metrics["inlier_percent"] = rep.inlier_percent;
  metrics["inlier_threshold"] = rep.inlier_threshold;
  if (show_reference) {
    json rows = json::array();
    for (const auto& row : reference_backprojection_rows())
      rows.push_back({{"method", row.method},
                      {"mean_error", row.mean_error},
                      {"std_error", row.std_error},
                      {"inlier_percent", row.inlier_percent}});
    metrics["reference_rows"] = rows;
  }
  write_json(dir / "metrics.json", metrics);
  return 0;
}

int cmd_visualize(const std::string& frames_dir, const std::string& table_path,
                  const std::string& out_dir, const json& resolved) {
  const fs::path dir = prepare_out_dir(out_dir, "visualize", resolved);
  const std::vector<GrayImage> frames = load_frame_dir(frames_dir);

  std::ifstream table(table_path);
  if (!table) throw std::runtime_error("cannot open '" + table_path + "'");
  std::map<int, Track> tracks;
  std::string line;
  int max_frame = 0;
  while (std::getline(table, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int frame, id;
    float x, y, score;
    std::string status;
    if (!(ss >> frame >> id >> x >> y >> score >> status))
      throw std::runtime_error("malformed track table line: " + line);
    Track& t = tracks.try_emplace(id).first->second;
    if (t.history.empty()) {
      t.id = id;
      t.start_frame = frame;
    }
    t.history.push_back({x, y, score});
    if (status == "dropped")
      t.status = TrackStatus::dropped;
    else if (status == "out_of_bounds")
      t.status = TrackStatus::out_of_bounds;
    max_frame = std::max(max_frame, frame);
  }

  TrackerState state;
  state.frame_index = max_frame;
  for (auto& [id, t] : tracks) state.tracks.push_back(std::move(t));

  fs::create_directories(dir / "overlays");
  for (size_t f = 0; f < frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", f);
    save_png_rgb8(render_overlay(frames[f], state, static_cast<int>(f)),
                  (dir / "overlays" / name).string());
  }
  std::cout << "wrote " << frames.size() << " overlays\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"correlation feature tracker: training, tracking, and evaluation"};
  app.require_subcommand(0, 1);

  struct {
    std::string config, out_dir = "run";
    int threads = 1;
    int count = 2000, image_size = 96;
    uint32_t seed = 1;
    std::string kitti = data_root_default("kitti"), ubc = data_root_default("ubc");
    int max_pairs = 200, max_per_pair = 256, max_points = 0;
    double harris_threshold = 0.01;
    int harris_nms = 5;
    std::string samples, weights, widths = "16,16,32,32,64,64,96,96,128";
    std::string pairs_file = "m50_100000_100000_0.txt";
    double holdout = 0.0;
    int min_live = 100, max_tracks = 500, nms_radius = 5, stride = 2;
    double score_threshold = 0.5, detector_threshold = 0.5;
    bool overlays = true, with_klt = true, reference = true;
    std::string frames, table, thresholds = "1,2,3";
    std::string correspondences, homographies;
    double inlier_threshold = 5.0;
  } o;

  TrainConfig tracker_cfg = TrainConfig::tracker_defaults();
  TrainConfig score_cfg = TrainConfig::score_defaults();
  TrainConfig detector_cfg = TrainConfig::score_defaults();

  std::map<CLI::App*, std::unique_ptr<OptionSet>> optsets;
  auto make_sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    auto os = std::make_unique<OptionSet>(sub);
    os->add("--config", o.config, "JSON config file; flags override its values");
    os->add("--out-dir", o.out_dir, "run directory for outputs");
    OptionSet* raw = os.get();
    optsets[sub] = std::move(os);
    return std::pair<CLI::App*, OptionSet*>(sub, raw);
  };

  auto add_train_options = [&o](OptionSet* os, TrainConfig& cfg) {
    os->add("--lr", cfg.base_lr, "base learning rate");
    os->add("--lr-decay", cfg.lr_decay, "per-iteration learning-rate decay");
    os->add("--weight-decay", cfg.weight_decay, "L2 coefficient");
    os->add("--momentum", cfg.momentum, "first-moment coefficient");
    os->add("--step-factor", cfg.step_factor, "stepped learning-rate factor");
    os->add("--step-interval", cfg.step_interval_epochs, "epochs per stepped drop");
    os->add("--step-start", cfg.step_start_epoch, "first epoch of stepped drops");
    os->add("--epochs", cfg.epochs, "training epochs");
    os->add("--batch-size", cfg.batch_size, "mini-batch size");
    os->add("--seed", cfg.seed, "RNG seed");
    os->add("--threads", o.threads, "worker threads (1 = serial)");
  };

  auto [gen_syn, gen_syn_os] = make_sub("gen-synthetic", "generate shifted-texture samples");
  gen_syn_os->add("--count", o.count, "number of samples");
  gen_syn_os->add("--seed", o.seed, "RNG seed");
  gen_syn_os->add("--image-size", o.image_size, "texture size (>= 93)");

  auto [gen_smp, gen_smp_os] = make_sub("gen-samples", "cut training samples from flow data");
  gen_smp_os->add("--kitti", o.kitti, "flow dataset root");
  gen_smp_os->add("--max-pairs", o.max_pairs, "image pairs to use");
  gen_smp_os->add("--max-per-pair", o.max_per_pair, "sample cap per pair");
  gen_smp_os->add("--harris-threshold", o.harris_threshold, "corner response fraction");
  gen_smp_os->add("--nms-radius", o.harris_nms, "corner suppression radius");

  auto [train_trk, train_trk_os] = make_sub("train-tracker", "train the conv stack");
  train_trk_os->add("--samples", o.samples, "sample cache (.dpts)")->required();
  train_trk_os->add("--widths", o.widths, "conv channel widths, comma separated");
  train_trk_os->add("--holdout", o.holdout, "fraction of samples held out");
  add_train_options(train_trk_os, tracker_cfg);

  auto [train_sc, train_sc_os] = make_sub("train-score", "train the match-score head");
  train_sc_os->add("--weights", o.weights, "DPT1 weights with the frozen conv stack");
  train_sc_os->add("--ubc", o.ubc, "patch dataset directory");
  train_sc_os->add("--pairs-file", o.pairs_file, "match-pair file inside the dataset");
  train_sc_os->add("--max-pairs", o.max_pairs, "pair cap");
  add_train_options(train_sc_os, score_cfg);

  auto [train_det, train_det_os] = make_sub("train-detector", "train the trackability head");
  train_det_os->add("--weights", o.weights, "DPT1 weights with the frozen conv stack");
  train_det_os->add("--samples", o.samples, "sample cache the labels come from");
  add_train_options(train_det_os, detector_cfg);

  auto [track_cmd, track_os] = make_sub("track", "run the detect-track-reinitialize loop");
  track_os->add("--weights", o.weights, "DPT1 weights with conv stack and both heads");
  track_os->add("--frames", o.frames, "directory of ordered frames")->required();
  track_os->add("--min-live", o.min_live, "re-detect below this live count");
  track_os->add("--score-threshold", o.score_threshold, "drop gate");
  track_os->add("--detector-threshold", o.detector_threshold, "detection gate");
  track_os->add("--max-tracks", o.max_tracks, "track cap");
  track_os->add("--nms-radius", o.nms_radius, "detection spacing");
  track_os->add("--stride", o.stride, "detector scan stride");
  track_os->add_flag("--overlays,!--no-overlays", o.overlays, "write overlay PNGs");
  track_os->add("--threads", o.threads, "worker threads (1 = serial)");
  track_os->add("--seed", o.seed, "recorded for reproducibility");

  auto [ev_kitti, ev_kitti_os] =
      make_sub("eval-kitti", "pixel accuracy against flow ground truth");
  ev_kitti_os->add("--weights", o.weights, "DPT1 weights");
  ev_kitti_os->add("--kitti", o.kitti, "flow dataset root");
  ev_kitti_os->add_flag("--klt,!--no-klt", o.with_klt, "also run the LK baseline");
  ev_kitti_os->add("--thresholds", o.thresholds, "accuracy thresholds, comma separated");
  ev_kitti_os->add("--max-pairs", o.max_pairs, "image pairs to use");
  ev_kitti_os->add("--max-points", o.max_points, "stop after this many points (0 = all)");
  ev_kitti_os->add("--harris-threshold", o.harris_threshold, "corner response fraction");
  ev_kitti_os->add("--threads", o.threads, "worker threads (1 = serial)");

  auto [ev_ubc, ev_ubc_os] = make_sub("eval-ubc", "patch-matching error at 95% recall");
  ev_ubc_os->add("--weights", o.weights, "DPT1 weights with the score head");
  ev_ubc_os->add("--ubc", o.ubc, "patch dataset directory");
  ev_ubc_os->add("--pairs-file", o.pairs_file, "match-pair file inside the dataset");
  ev_ubc_os->add("--max-pairs", o.max_pairs, "pair cap");
  ev_ubc_os->add("--threads", o.threads, "worker threads (1 = serial)");

  auto [ev_bp, ev_bp_os] = make_sub("eval-backproj", "homography back-projection error");
  ev_bp_os->add("--correspondences", o.correspondences,
                "file of x_prev y_prev x_curr y_curr patch_id lines")
      ->required();
  ev_bp_os->add("--homographies", o.homographies, "directory of homography_<id>.txt files")
      ->required();
  ev_bp_os->add("--inlier-threshold", o.inlier_threshold, "inlier radius in pixels");
  ev_bp_os->add_flag("--reference,!--no-reference", o.reference,
                     "print published reference rows");

  auto [vis, vis_os] = make_sub("visualize", "render overlays from a track table");
  vis_os->add("--frames", o.frames, "directory of ordered frames")->required();
  vis_os->add("--table", o.table, "track table file")->required();

  if (argc <= 1) {
    std::cout << app.help();
    return kExitUsage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  if (!sub) {
    std::cout << app.help();
    return kExitUsage;
  }

  try {
    OptionSet* os = optsets.at(sub).get();
    if (!o.config.empty()) os->apply_config(load_config_file(o.config));
    const json resolved = os->resolved();

    if (sub == gen_syn)
      return cmd_gen_synthetic(o.count, o.seed, o.image_size, o.out_dir, resolved);
    if (sub == gen_smp)
      return cmd_gen_samples(o.kitti, o.max_pairs, o.max_per_pair, o.harris_threshold,
                             o.harris_nms, o.out_dir, resolved);
    if (sub == train_trk)
      return cmd_train_tracker(o.samples, o.widths, tracker_cfg, o.holdout, o.threads,
                               o.out_dir, resolved);
    if (sub == train_sc)
      return cmd_train_score(o.weights, o.ubc, o.pairs_file, o.max_pairs, score_cfg,
                             o.threads, o.out_dir, resolved);
    if (sub == train_det)
      return cmd_train_detector(o.weights, o.samples, detector_cfg, o.threads, o.out_dir,
                                resolved);
    if (sub == track_cmd) {
      PipelineConfig cfg;
      cfg.min_live_tracks = o.min_live;
      cfg.score_threshold = static_cast<float>(o.score_threshold);
      cfg.detector_threshold = static_cast<float>(o.detector_threshold);
      cfg.max_tracks = o.max_tracks;
      cfg.nms_radius = o.nms_radius;
      cfg.scan_stride = o.stride;
      return cmd_track(o.weights, o.frames, cfg, o.overlays, o.threads, o.out_dir, resolved);
    }
    if (sub == ev_kitti)
      return cmd_eval_kitti(o.weights, o.kitti, o.with_klt, o.thresholds, o.max_pairs,
                            o.max_points, o.harris_threshold, o.threads, o.out_dir,
                            resolved);
    if (sub == ev_ubc)
      return cmd_eval_ubc(o.weights, o.ubc, o.pairs_file, o.max_pairs, o.threads, o.out_dir,
                          resolved);
    if (sub == ev_bp)
      return cmd_eval_backproj(o.correspondences, o.homographies, o.inlier_threshold,
                               o.reference, o.out_dir, resolved);
    if (sub == vis) return cmd_visualize(o.frames, o.table, o.out_dir, resolved);
    std::cerr << "error: unhandled command\n";
    return kExitRuntime;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
