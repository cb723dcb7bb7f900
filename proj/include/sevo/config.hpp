#pragma once

#include <cstdint>
#include <string>

#include "sevo/ba.hpp"
#include "sevo/frontend.hpp"
#include "sevo/patch_graph.hpp"

namespace sevo {

// All tunables of the tracking pipeline, loadable from a key-value file.
struct PipelineConfig {
  // pre-processing
  double delta_t_ms = 50.0;            // voxel window length
  std::string window_mode = "duration";  // "duration" | "count" (alternative slicer)
  int window_count = 300000;           // events per window in count mode

  // frontend
  int stride = 4;
  int feature_dim = kFeatureChannels;
  int max_disparity = 64;  // level0 cells
  double tau_match = 0.3;
  double search_radius = 2.0;
  int zncc_window = 7;
  std::string backend = "feature_dot";  // "feature_dot" | "zncc"

  // patch graph
  int n = 10;  // keyframe window
  int m = 96;  // patches per frame
  int p = 3;   // patch edge length (3 is the only supported value)
  int r_edge = 3;
  double tau_flow = 12.0;

  // bundle adjustment
  double huber_px = 4.0;
  double sigma_px = 1.0;
  double damping = 1e-4;
  int ba_iterations = 2;

  uint64_t seed = 0;

  FrontendConfig frontend() const;
  GraphConfig graph() const;
  BaConfig ba() const;
  void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
void write_pipeline_config(const std::string& path, const PipelineConfig& config);

}  // namespace sevo
