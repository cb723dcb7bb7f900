#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sevo/event_io.hpp"
#include "sevo/geometry.hpp"

namespace sevo {

// Infinite textured plane with a seeded band-limited value-noise
// log-intensity field over its local (u, v) frame.
struct PlaneSpec {
  Vec3 point = Vec3(0, 0, 4);   // any point on the plane, world frame
  Vec3 normal = Vec3(0, 0, 1);  // unit normal
  uint64_t texture_seed = 1;
  double base_log_intensity = 0.5;
  double amplitude = 0.5;      // log-intensity peak deviation
  double feature_scale = 4.0;  // noise lattice cells per meter
  int octaves = 2;
};

struct SyntheticScene {
  std::vector<PlaneSpec> planes;
  double background_log_intensity = 0.0;  // rays that miss every plane
  double illumination_ramp = 0.0;         // added log intensity per second
};

// Contrast-threshold sensor model parameters.
struct EventGenConfig {
  double contrast = 0.2;  // log-intensity units
  int width = 320, height = 240;
  double supersample_hz = 2000.0;
  double timestamp_jitter_us = 0.0;  // per-event gaussian jitter
  double contrast_sigma = 0.0;       // per-crossing threshold noise
  double background_rate = 0.0;      // noise events / pixel / second
  uint64_t seed = 0;
};

using TrajectoryFn = std::function<SE3Pose(double)>;  // seconds -> left pose

// Single-octave value noise in [-1, 1] on the unit lattice.
double value_noise(double u, double v, uint64_t seed);

// Multi-octave plane texture (log intensity).
double plane_texture(const PlaneSpec& plane, double u, double v);

// Per-pixel ray casting against the nearest plane; deterministic given the
// scene seeds. `out` is resized to height*width, row-major.
void render_log_intensity(const SyntheticScene& scene, const SE3Pose& pose,
                          const PinholeIntrinsics& K, double t, std::vector<double>* out);

// Metric depth (camera z) of the scene point behind `pixel`, or a negative
// value when the ray misses every plane.
double scene_depth(const SyntheticScene& scene, const SE3Pose& pose,
                   const PinholeIntrinsics& K, const Vec2& pixel);

struct GroundTruth {
  SyntheticScene scene;
  PinholeIntrinsics intrinsics;
  TrajectoryFn pose_fn;   // continuous left-camera trajectory
  Trajectory trajectory;  // sampled for file interchange

  double depth_at(double t, const Vec2& pixel) const {
    return scene_depth(scene, pose_fn(t), intrinsics, pixel);
  }
};

struct StereoEventStreams {
  std::vector<Event> left, right;
};

// Reference-level contrast-threshold simulation: per pixel, the log
// intensity is sampled at the supersampling rate and an event fires each
// time the signal crosses one more threshold step away from the level of
// the last emission, with the timestamp linearly interpolated between
// samples. Streams are time-sorted; per-pixel timestamps strictly increase.
StereoEventStreams generate_events(const SyntheticScene& scene, const TrajectoryFn& pose_fn,
                                   double duration_s, const StereoRig& rig,
                                   const EventGenConfig& cfg, GroundTruth* gt = nullptr);

enum class Preset { Lateral, Forward, Orbit, HdrRamp };

Preset parse_preset(const std::string& name);
const char* preset_name(Preset preset);

// Fully-specified synthetic sequence: scene, motion, rig, and generator
// settings for one benchmark preset.
struct PresetSpec {
  SyntheticScene scene;
  TrajectoryFn pose_fn;
  StereoRig rig;
  EventGenConfig gen;
  double duration_s = 10.0;
};

PresetSpec make_preset(Preset preset, uint64_t seed, int width = 320, int height = 240,
                       double duration_s = 10.0, double supersample_hz = 250.0);

struct BenchmarkFiles {
  std::string events_left, events_right, calibration, gt_trajectory;
};

// Writes the binary event streams, the calibration file (identity
// rectification), and the ground-truth TUM trajectory; byte-identical
// across runs with the same arguments.
BenchmarkFiles make_benchmark_sequence(Preset preset, uint64_t seed, const std::string& out_dir,
                                       int width = 320, int height = 240,
                                       double duration_s = 10.0, double supersample_hz = 250.0);

}  // namespace sevo
