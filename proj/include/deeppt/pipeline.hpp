#pragma once

#include "deeppt/heads.hpp"
#include "deeppt/image.hpp"
#include "deeppt/network.hpp"
#include "deeppt/tracker.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace dpt {

enum class TrackStatus { live, dropped, out_of_bounds };

const char* to_string(TrackStatus s);

/// One feature's life: id, per-frame positions with the score that admitted
/// them, and an absorbing terminal status. History is append-only.
struct Track {
  int id = 0;
  int start_frame = 0;
  struct Position {
    float x = 0, y = 0;
    float score = 0;  // detector score at birth, match score afterwards
  };
  std::vector<Position> history;
  TrackStatus status = TrackStatus::live;

  float last_score() const { return history.empty() ? 0.f : history.back().score; }
  int last_frame() const { return start_frame + static_cast<int>(history.size()) - 1; }
};

struct PipelineConfig {
  int min_live_tracks = 100;      // re-detect when live count falls below this
  float score_threshold = 0.5f;   // drop gate on the match score
  float detector_threshold = 0.5f;
  int max_tracks = 500;
  int nms_radius = 5;
  int scan_stride = 2;

  void validate() const;
};

struct TrackerState {
  std::vector<Track> tracks;
  int next_id = 0;
  int frame_index = 0;

  int live_count() const;
};

struct StepReport {
  int tracked = 0;
  int dropped = 0;
  int out_of_bounds = 0;
  int added = 0;
  bool reinitialized = false;
};

/// Detector scan over the frame at the configured stride: candidates above
/// the detector threshold, score-ordered NMS, capped at max_tracks.
TrackerState initialize_tracks(const GrayImage& frame, const NetworkParams<float>& nets,
                               const PipelineConfig& config, int threads = 1);

/// Advances every live track from frame t to frame t+1, drops low-score
/// tracks, retires tracks pushed outside the margins, then re-runs the
/// detector on frame t+1 if the live count fell below the configured
/// minimum.
StepReport track_step(TrackerState& state, const GrayImage& frame_t,
                      const GrayImage& frame_t1, const NetworkParams<float>& nets,
                      const PipelineConfig& config, int threads = 1);

struct SequenceResult {
  TrackerState state;
  std::vector<StepReport> steps;
};

SequenceResult run_sequence(std::span<const GrayImage> frames,
                            const NetworkParams<float>& nets, const PipelineConfig& config,
                            int threads = 1);

/// `frame id x y score status` per line, then a `#` summary line.
void write_track_table(std::ostream& out, const TrackerState& state);

/// Green marks for live tracks, red for dropped or out-of-bounds ones, with
/// a motion segment from the previous position.
RgbImage render_overlay(const GrayImage& frame, const TrackerState& state, int frame_index);

}  // namespace dpt
