#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sevo/geometry.hpp"

namespace sevo {

// One asynchronous brightness-change measurement.
struct Event {
  uint64_t t = 0;    // microseconds
  uint16_t x = 0;    // column
  uint16_t y = 0;    // row
  int8_t polarity = 1;  // +1 or -1
};

// Event after the rectification map; coordinates are real-valued.
struct RectifiedEvent {
  uint64_t t = 0;
  float x = 0;
  float y = 0;
  int8_t polarity = 1;
};

enum class EventFileFormat { Text, Binary };

// Text: one "t_us x y p" line per event, p in {0,1} (0 encodes negative).
// Binary: packed little-endian records of (u64 t_us, u16 x, u16 y, i8 p),
// 13 bytes each, p in {-1,+1}.
std::vector<Event> parse_event_file(const std::string& path, EventFileFormat format,
                                    uint64_t sort_slack_us = 1000);
void write_event_file(const std::string& path, const std::vector<Event>& events,
                      EventFileFormat format);

// Dense per-pixel rectification map: entry [y][x] holds the rectified
// (x, y) target of source pixel (x, y).
struct RectificationLut {
  int width = 0, height = 0;
  std::vector<float> x_map;  // height*width
  std::vector<float> y_map;

  static RectificationLut identity(int width, int height);
  float x_at(int x, int y) const { return x_map[static_cast<size_t>(y) * width + x]; }
  float y_at(int x, int y) const { return y_map[static_cast<size_t>(y) * width + x]; }
};

RectificationLut read_lut_file(const std::string& path);
void write_lut_file(const std::string& path, const RectificationLut& lut);

struct RectifyStats {
  size_t dropped_out_of_bounds = 0;
};

// Applies the lut to each event; events mapping outside
// [0, W-1] x [0, H-1] are dropped. Timestamps and polarities pass through.
std::vector<RectifiedEvent> rectify_events(const std::vector<Event>& events,
                                           const RectificationLut& lut,
                                           RectifyStats* stats = nullptr);

struct EventWindow {
  uint64_t t_start = 0, t_end = 0;  // microseconds, half-open [t_start, t_end)
  std::vector<RectifiedEvent> left;
  std::vector<RectifiedEvent> right;
  bool empty() const { return left.empty() && right.empty(); }
};

// Single-consumer fold turning two time-sorted streams into consecutive
// half-open windows [t0 + k*dt, t0 + (k+1)*dt). Empty windows are emitted
// so the frame cadence stays uniform.
class WindowCursor {
 public:
  WindowCursor(const std::vector<RectifiedEvent>& left, const std::vector<RectifiedEvent>& right,
               uint64_t dt_us, uint64_t t0_us);

  std::optional<EventWindow> next();

 private:
  const std::vector<RectifiedEvent>& left_;
  const std::vector<RectifiedEvent>& right_;
  uint64_t dt_, t0_;
  uint64_t t_last_ = 0;  // max event time + 1 (emission horizon)
  size_t li_ = 0, ri_ = 0;
  uint64_t k_ = 0;
};

std::vector<EventWindow> window_events(const std::vector<RectifiedEvent>& left,
                                       const std::vector<RectifiedEvent>& right,
                                       uint64_t dt_us, uint64_t t0_us);

// TUM interchange format: "timestamp tx ty tz qx qy qz qw" per line,
// '#' comments. Quaternions farther than 1e-3 from unit norm are rejected.
Trajectory read_trajectory(const std::string& path);
void write_trajectory(const Trajectory& traj, const std::string& path);

std::string format_trajectory_line(const TrajectorySample& sample);

struct CalibrationFile {
  PinholeIntrinsics intrinsics;
  double baseline = 0;  // meters
  std::string lut_left_path;   // optional; relative to the calibration file
  std::string lut_right_path;

  StereoRig rig() const { return StereoRig{intrinsics, baseline}; }
};

// Key-value text file with keys fx, fy, cx, cy, width, height, baseline_m
// and optional lut_left / lut_right paths.
CalibrationFile read_calibration(const std::string& path);
void write_calibration(const std::string& path, const CalibrationFile& calib);

}  // namespace sevo
