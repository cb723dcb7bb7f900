#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sevo/frontend.hpp"
#include "sevo/geometry.hpp"

namespace sevo {

enum class EdgeKind : uint8_t { Temporal, Static };

// Measurement edge of the patch graph. The patch is identified by
// (host_frame, patch_slot); temporal edges point at another left keyframe,
// static edges at the host's own right frame (target_frame == host_frame).
struct Edge {
  EdgeKind kind = EdgeKind::Temporal;
  int host_frame = -1;
  int patch_slot = -1;
  int target_frame = -1;
  FlowMeasurement flow;       // temporal edges
  DisparityMeasurement disp;  // static edges
};

struct Keyframe {
  int id = -1;          // monotone frame id
  double timestamp = 0;  // seconds
  SE3Pose pose;          // left camera to world
  FeaturePyramid left_pyramid;
  FeaturePyramid right_pyramid;
  std::vector<Patch> patches;  // exactly patches_per_frame slots

  int valid_patch_count() const {
    int n = 0;
    for (const Patch& p : patches) n += p.valid ? 1 : 0;
    return n;
  }
};

struct GraphConfig {
  int window_size = 10;       // n: max keyframes kept after management
  int patches_per_frame = 96;  // m
  int edge_radius = 3;        // temporal edges span at most this window gap
  double tau_flow = 12.0;     // px; keyframe-removal flow threshold
};

// Sliding window of keyframes plus the temporal (C) and static (S)
// measurement edges between them. Single-writer: one tracking loop mutates
// it; snapshots may be read concurrently.
struct PatchGraph {
  GraphConfig config;
  StereoRig rig;
  std::vector<Keyframe> window;  // ordered oldest to newest
  std::vector<Edge> edges;
  int next_frame_id = 0;

  int window_position(int frame_id) const {
    for (size_t i = 0; i < window.size(); ++i) {
      if (window[i].id == frame_id) return static_cast<int>(i);
    }
    return -1;
  }
  const Keyframe* find_frame(int frame_id) const {
    const int pos = window_position(frame_id);
    return pos < 0 ? nullptr : &window[pos];
  }
  Keyframe* find_frame(int frame_id) {
    const int pos = window_position(frame_id);
    return pos < 0 ? nullptr : &window[pos];
  }
};

// Constant-velocity pose prediction: with at least two keyframes the last
// relative motion is replayed; with one the last pose is copied; an empty
// graph predicts identity (the first frame anchors the world).
SE3Pose motion_model_predict(const PatchGraph& graph);

// Appends a keyframe at the predicted pose, creates one static edge per
// valid new patch, and creates bidirectional temporal edges between the new
// frame and every window frame within edge_radius. Each new temporal
// measurement is produced by track_patch seeded with the constant-depth
// reprojection of the patch center; confidences are assigned from the
// median residual of this frame's batch.
void add_frame(PatchGraph& graph, double timestamp, FeaturePyramid left_pyramid,
               FeaturePyramid right_pyramid, std::vector<Patch> patches,
               std::vector<DisparityMeasurement> static_measurements,
               const FrontendConfig& frontend_cfg);

// Mean distance, over patches hosted in frame a (counted from the newest,
// 0-based) carrying a valid track into frame b, between the tracked
// position and the patch center. Throws NoSharedMeasurements when no valid
// track connects the two frames.
double window_flow_magnitude(const PatchGraph& graph, int a_from_newest, int b_from_newest);

struct RemovalEvent {
  bool removed = false;
  int frame_id = -1;
  int window_pos = -1;
  bool removed_oldest = false;
  double flow = 0;  // NaN when no shared measurements existed
};

// Keyframe rule, applied once the window holds window_size + 1 frames: if
// the flow magnitude between the n-5 and n-3 frames (0-indexed from the
// oldest) is below tau_flow the n-4 frame is removed, otherwise the oldest
// frame is discarded. Edges touching the removed frame are deleted.
RemovalEvent manage_keyframes(PatchGraph& graph);

// Diagnostics: frames, poses, patch/edge counts, residual statistics.
std::string graph_snapshot(const PatchGraph& graph);

// Throws if any edge references a frame outside the window or a patch slot
// out of range.
void check_graph_integrity(const PatchGraph& graph);

}  // namespace sevo
