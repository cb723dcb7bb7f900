#pragma once

#include <string>
#include <vector>

#include "sevo/config.hpp"
#include "sevo/event_io.hpp"
#include "sevo/patch_graph.hpp"

namespace sevo {

struct PipelineInput {
  std::vector<Event> left, right;
  CalibrationFile calib;
  RectificationLut lut_left, lut_right;  // identity when the calibration names none
};

// Loads events, calibration, and rectification tables (lut paths are
// resolved relative to the calibration file). Throws EmptyStream when
// either event file holds no events.
PipelineInput load_pipeline_input(const std::string& events_left_path,
                                  const std::string& events_right_path,
                                  const std::string& calib_path, EventFileFormat format);

struct FrameDiagnostics {
  int frame_id = -1;
  double timestamp = 0;  // seconds (window center)
  size_t events_left = 0, events_right = 0;
  int patches_valid = 0;
  int temporal_edges = 0;
  double ba_cost = -1;  // robustified cost after the solve, -1 when skipped
  int ba_dropped = 0;
  double track_ms = 0;  // tracking stage: features through keyframe management
  double total_ms = 0;
  bool empty_window = false;
};

struct PipelineResult {
  Trajectory trajectory;  // newest keyframe pose per processed window
  std::vector<FrameDiagnostics> frames;
  size_t windows_total = 0;
  int exit_code = 0;  // 0 ok; 3 tracking diverged (partial trajectory kept)
  std::string error_code;
};

// Full tracking loop: window -> voxelize -> select/encode -> static stereo
// depth -> patch graph update -> two-iteration bundle adjustment ->
// keyframe management, streaming the newest keyframe pose per window.
// Pre-processing (windowing + voxelization) runs on a producer thread and
// hands normalized voxel pairs over through a bounded ordered queue.
// Deterministic for fixed inputs, config, and seed.
PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config,
                            const std::string& voxel_dump_dir = "");

void write_diagnostics_csv(const std::string& path, const PipelineResult& result);

}  // namespace sevo
