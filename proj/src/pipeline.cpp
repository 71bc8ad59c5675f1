#include "deeppt/pipeline.hpp"

#include "deeppt/threading.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace dpt {

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::live: return "live";
    case TrackStatus::dropped: return "dropped";
    case TrackStatus::out_of_bounds: return "out_of_bounds";
  }
  return "?";
}

void PipelineConfig::validate() const {
  if (min_live_tracks > max_tracks)
    throw std::invalid_argument("min live tracks cannot exceed max tracks");
  if (score_threshold < 0 || score_threshold > 1 || detector_threshold < 0 ||
      detector_threshold > 1)
    throw std::invalid_argument("thresholds must lie in [0,1]");
  if (scan_stride < 1) throw std::invalid_argument("scan stride must be >= 1");
  if (max_tracks < 1) throw std::invalid_argument("max tracks must be >= 1");
}

int TrackerState::live_count() const {
  int n = 0;
  for (const Track& t : tracks)
    if (t.status == TrackStatus::live) ++n;
  return n;
}

namespace {

bool inside_margins(const GrayImage& frame, int x, int y) {
  return x >= kPatchMargin && y >= kPatchMargin && x < frame.width - kPatchMargin &&
         y < frame.height - kPatchMargin;
}

struct Candidate {
  int x, y;
  float score;
};

// Stride scan inside the margins; every candidate gets a trackability score
// from the detector head over its template feature.
std::vector<Candidate> scan_detector(const GrayImage& frame, const NetworkParams<float>& nets,
                                     const PipelineConfig& config, int threads) {
  const auto head_it = nets.heads.find(kDetectorHeadName);
  if (head_it == nets.heads.end())
    throw std::invalid_argument("nets have no detector head");
  std::vector<std::pair<int, int>> coords;
  for (int y = kPatchMargin; y < frame.height - kPatchMargin; y += config.scan_stride)
    for (int x = kPatchMargin; x < frame.width - kPatchMargin; x += config.scan_stride)
      coords.emplace_back(x, y);

  std::vector<float> scores(coords.size());
  parallel_for(static_cast<long>(coords.size()), threads, [&](long i) {
    const auto [x, y] = coords[static_cast<size_t>(i)];
    std::array<uint8_t, kTemplateSize * kTemplateSize> patch;
    const int r = kTemplateSize / 2;
    for (int py = 0; py < kTemplateSize; ++py)
      for (int px = 0; px < kTemplateSize; ++px)
        patch[static_cast<size_t>(py) * kTemplateSize + px] =
            frame.at(x - r + px, y - r + py);
    const VecX<float> feat = extract_template_features(
        nets.conv, normalize_patch(patch.data(), kTemplateSize));
    scores[static_cast<size_t>(i)] = trackability_score(head_it->second, feat);
  });

  std::vector<Candidate> out;
  for (size_t i = 0; i < coords.size(); ++i)
    if (scores[i] >= config.detector_threshold)
      out.push_back({coords[i].first, coords[i].second, scores[i]});
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return out;
}

bool near_any(int x, int y, const std::vector<std::pair<int, int>>& taken, int radius) {
  for (const auto& [tx, ty] : taken)
    if (std::max(std::abs(tx - x), std::abs(ty - y)) < radius) return true;
  return false;
}

// Appends new tracks for the best candidates that clear the NMS radius
// against both existing live tracks and one another.
int add_detections(TrackerState& state, const std::vector<Candidate>& candidates,
                   const PipelineConfig& config, int frame_index) {
  std::vector<std::pair<int, int>> occupied;
  for (const Track& t : state.tracks)
    if (t.status == TrackStatus::live)
      occupied.emplace_back(static_cast<int>(std::lround(t.history.back().x)),
                            static_cast<int>(std::lround(t.history.back().y)));
  int live = state.live_count();
  int added = 0;
  for (const Candidate& c : candidates) {
    if (live >= config.max_tracks) break;
    if (near_any(c.x, c.y, occupied, config.nms_radius)) continue;
    Track t;
    t.id = state.next_id++;
    t.start_frame = frame_index;
    t.history.push_back({static_cast<float>(c.x), static_cast<float>(c.y), c.score});
    state.tracks.push_back(std::move(t));
    occupied.emplace_back(c.x, c.y);
    ++live;
    ++added;
  }
  return added;
}

}  // namespace

TrackerState initialize_tracks(const GrayImage& frame, const NetworkParams<float>& nets,
                               const PipelineConfig& config, int threads) {
  config.validate();
  if (frame.width < 2 * kPatchMargin + 1 || frame.height < 2 * kPatchMargin + 1)
    throw std::invalid_argument("frame too small for the 55x55 search margins");
  TrackerState state;
  const std::vector<Candidate> candidates = scan_detector(frame, nets, config, threads);
  add_detections(state, candidates, config, 0);
  return state;
}

StepReport track_step(TrackerState& state, const GrayImage& frame_t,
                      const GrayImage& frame_t1, const NetworkParams<float>& nets,
                      const PipelineConfig& config, int threads) {
  config.validate();
  if (frame_t.width != frame_t1.width || frame_t.height != frame_t1.height)
    throw std::invalid_argument("consecutive frames must share extents");
  const auto score_head_it = nets.heads.find(kScoreHeadName);
  if (score_head_it == nets.heads.end())
    throw std::invalid_argument("nets have no score head");

  std::vector<size_t> live_idx;
  for (size_t i = 0; i < state.tracks.size(); ++i)
    if (state.tracks[i].status == TrackStatus::live) live_idx.push_back(i);

  struct Advance {
    Displacement d;
    float score;
  };
  std::vector<Advance> advances(live_idx.size());
  parallel_for(static_cast<long>(live_idx.size()), threads, [&](long i) {
    const Track& t = state.tracks[live_idx[static_cast<size_t>(i)]];
    const int x = static_cast<int>(std::lround(t.history.back().x));
    const int y = static_cast<int>(std::lround(t.history.back().y));
    TrackingSample s;
    const int tr = kTemplateSize / 2, sr = kSearchSize / 2;
    for (int py = 0; py < kTemplateSize; ++py)
      for (int px = 0; px < kTemplateSize; ++px)
        s.tmpl[static_cast<size_t>(py) * kTemplateSize + px] =
            frame_t.at(x - tr + px, y - tr + py);
    for (int py = 0; py < kSearchSize; ++py)
      for (int px = 0; px < kSearchSize; ++px)
        s.search[static_cast<size_t>(py) * kSearchSize + px] =
            frame_t1.at(x - sr + px, y - sr + py);
    const ScoreMapF score_map = score_sample(nets.conv, s);
    advances[static_cast<size_t>(i)] = {predict_displacement(score_map),
                                        match_score(score_head_it->second, score_map)};
  });

  // state mutation happens after the parallel phase, in track order
  StepReport report;
  const int next_frame = state.frame_index + 1;
  for (size_t i = 0; i < live_idx.size(); ++i) {
    Track& t = state.tracks[live_idx[i]];
    const Advance& a = advances[i];
    if (a.score < config.score_threshold) {
      t.status = TrackStatus::dropped;
      ++report.dropped;
      continue;
    }
    const int nx = static_cast<int>(std::lround(t.history.back().x)) + a.d.dx;
    const int ny = static_cast<int>(std::lround(t.history.back().y)) + a.d.dy;
    if (!inside_margins(frame_t1, nx, ny)) {
      t.status = TrackStatus::out_of_bounds;
      ++report.out_of_bounds;
      continue;
    }
    t.history.push_back({static_cast<float>(nx), static_cast<float>(ny), a.score});
    ++report.tracked;
  }
  state.frame_index = next_frame;

  if (state.live_count() < config.min_live_tracks) {
    report.reinitialized = true;
    const std::vector<Candidate> candidates =
        scan_detector(frame_t1, nets, config, threads);
    report.added = add_detections(state, candidates, config, next_frame);
  }
  return report;
}

SequenceResult run_sequence(std::span<const GrayImage> frames,
                            const NetworkParams<float>& nets, const PipelineConfig& config,
                            int threads) {
  if (frames.size() < 2)
    throw std::invalid_argument("a sequence needs at least two frames");
  SequenceResult result;
  result.state = initialize_tracks(frames[0], nets, config, threads);
  for (size_t f = 0; f + 1 < frames.size(); ++f)
    result.steps.push_back(
        track_step(result.state, frames[f], frames[f + 1], nets, config, threads));
  return result;
}

void write_track_table(std::ostream& out, const TrackerState& state) {
  int dropped = 0, oob = 0;
  for (const Track& t : state.tracks) {
    for (size_t i = 0; i < t.history.size(); ++i) {
      const Track::Position& p = t.history[i];
      const bool final_row = i + 1 == t.history.size();
      out << (t.start_frame + static_cast<int>(i)) << " " << t.id << " " << p.x << " "
          << p.y << " " << p.score << " "
          << (final_row ? to_string(t.status) : "live") << "\n";
    }
    if (t.status == TrackStatus::dropped) ++dropped;
    if (t.status == TrackStatus::out_of_bounds) ++oob;
  }
  out << "# frames=" << state.frame_index + 1 << " tracks=" << state.tracks.size()
      << " live=" << state.live_count() << " dropped=" << dropped << " out_of_bounds=" << oob
      << "\n";
}

namespace {

void draw_dot(RgbImage& img, int x, int y, uint8_t r, uint8_t g, uint8_t b) {
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int px = x + dx, py = y + dy;
      if (px < 0 || py < 0 || px >= img.width || py >= img.height) continue;
      uint8_t* p = img.at(px, py);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
}

void draw_line(RgbImage& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
               uint8_t b) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (x0 >= 0 && y0 >= 0 && x0 < img.width && y0 < img.height) {
      uint8_t* p = img.at(x0, y0);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

RgbImage render_overlay(const GrayImage& frame, const TrackerState& state, int frame_index) {
  RgbImage img = RgbImage::from_gray(frame);
  for (const Track& t : state.tracks) {
    const int rel = frame_index - t.start_frame;
    if (rel < 0 || rel >= static_cast<int>(t.history.size())) {
      // a track that ended before this frame: mark its failure point in red
      if (t.status != TrackStatus::live && !t.history.empty() &&
          t.last_frame() + 1 == frame_index) {
        const Track::Position& p = t.history.back();
        draw_dot(img, static_cast<int>(p.x), static_cast<int>(p.y), 220, 30, 30);
      }
      continue;
    }
    const Track::Position& p = t.history[static_cast<size_t>(rel)];
    const bool ok = t.status == TrackStatus::live || frame_index < t.last_frame();
    const uint8_t r = ok ? 30 : 220;
    const uint8_t g = ok ? 200 : 30;
    if (rel > 0) {
      const Track::Position& q = t.history[static_cast<size_t>(rel - 1)];
      draw_line(img, static_cast<int>(q.x), static_cast<int>(q.y), static_cast<int>(p.x),
                static_cast<int>(p.y), r, g, 30);
    }
    draw_dot(img, static_cast<int>(p.x), static_cast<int>(p.y), r, g, 30);
  }
  return img;
}

}  // namespace dpt
