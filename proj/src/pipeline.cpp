#include "sevo/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "sevo/ba.hpp"
#include "sevo/voxel.hpp"

namespace sevo {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t frame) {
  uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (frame + 1));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  return x ^ (x >> 31);
}

struct FramePayload {
  size_t index = 0;
  uint64_t t_start = 0, t_end = 0;
  size_t events_left = 0, events_right = 0;
  VoxelGrid left, right;
  bool empty = false;
  bool last = false;
};

// Bounded single-producer single-consumer hand-off preserving order.
class PayloadQueue {
 public:
  explicit PayloadQueue(size_t capacity) : capacity_(capacity) {}

  void push(FramePayload&& payload) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_; });
    queue_.push_back(std::move(payload));
    not_empty_.notify_one();
  }

  FramePayload pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty(); });
    FramePayload payload = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return payload;
  }

 private:
  size_t capacity_;
  std::deque<FramePayload> queue_;
  std::mutex mutex_;
  std::condition_variable not_empty_, not_full_;
};

// Count-mode slicing: a window closes once the combined stream carries
// window_count events (alternative to the fixed-duration slicer).
std::vector<EventWindow> window_by_count(const std::vector<RectifiedEvent>& left,
                                         const std::vector<RectifiedEvent>& right,
                                         size_t count_per_window) {
  std::vector<EventWindow> windows;
  size_t li = 0, ri = 0;
  while (li < left.size() || ri < right.size()) {
    EventWindow w;
    w.t_start = std::min(li < left.size() ? left[li].t : ~0ULL,
                         ri < right.size() ? right[ri].t : ~0ULL);
    size_t taken = 0;
    uint64_t t_last = w.t_start;
    while (taken < count_per_window && (li < left.size() || ri < right.size())) {
      const uint64_t tl = li < left.size() ? left[li].t : ~0ULL;
      const uint64_t tr = ri < right.size() ? right[ri].t : ~0ULL;
      if (tl <= tr) {
        w.left.push_back(left[li++]);
        t_last = tl;
      } else {
        w.right.push_back(right[ri++]);
        t_last = tr;
      }
      ++taken;
    }
    w.t_end = t_last + 1;
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace

PipelineInput load_pipeline_input(const std::string& events_left_path,
                                  const std::string& events_right_path,
                                  const std::string& calib_path, EventFileFormat format) {
  PipelineInput input;
  input.left = parse_event_file(events_left_path, format);
  input.right = parse_event_file(events_right_path, format);
  if (input.left.empty() || input.right.empty()) {
    throw Error(ErrorCode::EmptyStream,
                input.left.empty() ? events_left_path : events_right_path);
  }
  input.calib = read_calibration(calib_path);

  namespace fs = std::filesystem;
  const fs::path base = fs::path(calib_path).parent_path();
  const int W = input.calib.intrinsics.width, H = input.calib.intrinsics.height;
  auto load_lut = [&](const std::string& rel) {
    if (rel.empty()) return RectificationLut::identity(W, H);
    RectificationLut lut = read_lut_file((base / rel).string());
    if (lut.width != W || lut.height != H) {
      throw Error(ErrorCode::LutSizeMismatch,
                  rel + " is " + std::to_string(lut.width) + "x" + std::to_string(lut.height) +
                      ", sensor is " + std::to_string(W) + "x" + std::to_string(H));
    }
    return lut;
  };
  input.lut_left = load_lut(input.calib.lut_left_path);
  input.lut_right = load_lut(input.calib.lut_right_path);
  return input;
}

PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config,
                            const std::string& voxel_dump_dir) {
  config.validate();
  if (input.left.empty() || input.right.empty()) {
    throw Error(ErrorCode::EmptyStream, "no events to process");
  }

  const auto left_rect = rectify_events(input.left, input.lut_left);
  const auto right_rect = rectify_events(input.right, input.lut_right);
  if (left_rect.empty() || right_rect.empty()) {
    throw Error(ErrorCode::EmptyStream, "rectification dropped every event");
  }

  const int W = input.calib.intrinsics.width, H = input.calib.intrinsics.height;
  const FrontendConfig fcfg = config.frontend();
  const BaConfig bcfg = config.ba();

  PatchGraph graph;
  graph.config = config.graph();
  graph.rig = input.calib.rig();

  std::vector<EventWindow> count_windows;
  if (config.window_mode == "count") {
    count_windows = window_by_count(left_rect, right_rect, config.window_count);
  }
  const uint64_t dt_us = static_cast<uint64_t>(config.delta_t_ms * 1000.0);
  const uint64_t t0 =
      std::min(left_rect.front().t, right_rect.front().t) / dt_us * dt_us;

  PayloadQueue queue(2);
  std::thread producer([&] {
    auto emit = [&](const EventWindow& w, size_t index) {
      FramePayload payload;
      payload.index = index;
      payload.t_start = w.t_start;
      payload.t_end = w.t_end;
      payload.events_left = w.left.size();
      payload.events_right = w.right.size();
      payload.empty = w.empty();
      if (!payload.empty) {
        payload.left = normalize_voxel_grid(build_voxel_grid(w.left, w.t_start, w.t_end, H, W));
        payload.right =
            normalize_voxel_grid(build_voxel_grid(w.right, w.t_start, w.t_end, H, W));
      }
      queue.push(std::move(payload));
    };
    if (config.window_mode == "count") {
      for (size_t i = 0; i < count_windows.size(); ++i) emit(count_windows[i], i);
    } else {
      WindowCursor cursor(left_rect, right_rect, dt_us, t0);
      size_t index = 0;
      while (auto w = cursor.next()) emit(*w, index++);
    }
    FramePayload sentinel;
    sentinel.last = true;
    queue.push(std::move(sentinel));
  });

  PipelineResult result;
  int low_validity_streak = 0;
  bool diverged = false;

  using Clock = std::chrono::steady_clock;
  while (true) {
    FramePayload payload = queue.pop();
    if (payload.last) break;
    ++result.windows_total;
    if (diverged) continue;  // drain the queue so the producer can finish

    const auto t_total0 = Clock::now();
    FrameDiagnostics diag;
    diag.timestamp = (payload.t_start + payload.t_end) / 2 * 1e-6;
    diag.events_left = payload.events_left;
    diag.events_right = payload.events_right;

    if (payload.empty) {
      diag.empty_window = true;
      diag.total_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - t_total0).count();
      result.frames.push_back(diag);
      continue;
    }

    if (!voxel_dump_dir.empty()) {
      namespace fs = std::filesystem;
      const std::string stem = (fs::path(voxel_dump_dir) /
                                ("window_" + std::to_string(payload.index)))
                                   .string();
      write_voxel_dump(stem + "_left.evxl", payload.left);
      write_voxel_dump(stem + "_right.evxl", payload.right);
    }

    const auto t_track0 = Clock::now();

    const ScoreMap scores = compute_score_map(payload.left, config.stride);
    SelectionResult selection =
        select_patches(scores, config.m, mix_seed(config.seed, payload.index));
    while (static_cast<int>(selection.patches.size()) < config.m) {
      selection.patches.push_back(Patch{});  // keep exactly m slots
    }

    const FeaturePyramid left_pyr = encode_features(payload.left, config.stride, true);
    const FeaturePyramid right_pyr = encode_features(payload.right, config.stride, false);

    std::vector<DisparityMeasurement> statics(selection.patches.size());
    for (size_t s = 0; s < selection.patches.size(); ++s) {
      Patch& patch = selection.patches[s];
      patch.valid = false;
      if (patch.u[4] == 0 && patch.v[4] == 0) continue;  // filler slot
      DisparityMeasurement dm =
          config.backend == "zncc"
              ? estimate_disparity_zncc(patch, payload.left, payload.right, fcfg)
              : estimate_disparity(patch, left_pyr, right_pyr, fcfg);
      dm.patch_slot = static_cast<int>(s);
      if (!dm.valid || !(dm.disparity_fullres >= kDefaultMinDisparityPx)) continue;
      patch.inverse_depth =
          dm.disparity_fullres / (graph.rig.intrinsics.fx * graph.rig.baseline);
      patch.valid = true;
      statics[s] = dm;
    }

    add_frame(graph, diag.timestamp, left_pyr, right_pyr, std::move(selection.patches),
              std::move(statics), fcfg);

    if (graph.window.size() >= 2) {
      SolveReport report;
      const WindowState solved = solve_window(graph, extract_window_state(graph), bcfg, &report);
      if (!report.aborted) apply_window_state(solved, graph);
      diag.ba_cost = report.iteration_cost.empty() ? report.initial_cost
                                                   : report.iteration_cost.back();
      diag.ba_dropped = report.dropped_blocks;
    }

    manage_keyframes(graph);

    const Keyframe& newest = graph.window.back();
    diag.frame_id = newest.id;
    diag.patches_valid = newest.valid_patch_count();
    for (const Edge& e : graph.edges) {
      diag.temporal_edges += e.kind == EdgeKind::Temporal ? 1 : 0;
    }
    result.trajectory.push_back(TrajectorySample{diag.timestamp, newest.pose});

    diag.track_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_track0).count();
    diag.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_total0).count();
    result.frames.push_back(diag);

    if (diag.patches_valid < config.m / 10) {
      if (++low_validity_streak >= 5) {
        diverged = true;
        result.exit_code = 3;
        result.error_code = "TrackingDiverged";
      }
    } else {
      low_validity_streak = 0;
    }
  }
  producer.join();
  return result;
}

void write_diagnostics_csv(const std::string& path, const PipelineResult& result) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  out << "frame_id,timestamp_s,events_left,events_right,patches_valid,temporal_edges,"
         "ba_cost,ba_dropped,track_ms,total_ms,empty_window\n";
  out.precision(9);
  for (const FrameDiagnostics& d : result.frames) {
    out << d.frame_id << ',' << d.timestamp << ',' << d.events_left << ',' << d.events_right
        << ',' << d.patches_valid << ',' << d.temporal_edges << ',' << d.ba_cost << ','
        << d.ba_dropped << ',' << d.track_ms << ',' << d.total_ms << ','
        << (d.empty_window ? 1 : 0) << '\n';
  }
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

}  // namespace sevo
