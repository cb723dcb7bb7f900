#include "sevo/patch_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sevo {

SE3Pose motion_model_predict(const PatchGraph& graph) {
  const size_t n = graph.window.size();
  if (n == 0) return SE3Pose();
  if (n == 1) return graph.window.back().pose;
  const SE3Pose& prev = graph.window[n - 2].pose;
  const SE3Pose& last = graph.window[n - 1].pose;
  // The prediction feeds back into the next prediction, so rounding drift
  // in R would compound geometrically without the renormalization.
  return (last * (prev.inverse() * last)).orthonormalized();
}

namespace {

// Constant-depth reprojection of a patch center into a target frame.
std::optional<Vec2> reproject_center(const Patch& patch, const SE3Pose& host_pose,
                                     const SE3Pose& target_pose, const PinholeIntrinsics& K) {
  if (!(patch.inverse_depth > 0)) return std::nullopt;
  const Vec3 x_host = backproject(Vec2(patch.center_x(), patch.center_y()),
                                  patch.inverse_depth, K);
  const Vec3 x_world = host_pose * x_host;
  const Vec3 x_target = target_pose.inverse() * x_world;
  if (!x_target.allFinite() || x_target.z() <= kMinProjectionDepth) return std::nullopt;
  const Vec2 uv = project(x_target, K);
  // Written so non-finite coordinates also fail the test.
  if (!(uv.x() >= 0 && uv.x() <= K.width - 1 && uv.y() >= 0 && uv.y() <= K.height - 1)) {
    return std::nullopt;
  }
  return uv;
}

void make_temporal_edge(PatchGraph& graph, const Keyframe& host, int slot,
                        const Keyframe& target, const FrontendConfig& fcfg) {
  const Patch& patch = host.patches[slot];
  Edge edge;
  edge.kind = EdgeKind::Temporal;
  edge.host_frame = host.id;
  edge.patch_slot = slot;
  edge.target_frame = target.id;
  edge.flow.host_frame = host.id;
  edge.flow.patch_slot = slot;
  edge.flow.target_frame = target.id;

  const auto init = reproject_center(patch, host.pose, target.pose, graph.rig.intrinsics);
  if (init) {
    edge.flow = track_patch(patch, host.left_pyramid, target.left_pyramid, *init, fcfg);
    edge.flow.host_frame = host.id;
    edge.flow.patch_slot = slot;
    edge.flow.target_frame = target.id;
  } else {
    edge.flow.status = MeasureStatus::OutOfBounds;
  }
  graph.edges.push_back(edge);
}

}  // namespace

void add_frame(PatchGraph& graph, double timestamp, FeaturePyramid left_pyramid,
               FeaturePyramid right_pyramid, std::vector<Patch> patches,
               std::vector<DisparityMeasurement> static_measurements,
               const FrontendConfig& frontend_cfg) {
  Keyframe kf;
  kf.id = graph.next_frame_id++;
  kf.timestamp = timestamp;
  kf.pose = motion_model_predict(graph);
  kf.left_pyramid = std::move(left_pyramid);
  kf.right_pyramid = std::move(right_pyramid);
  kf.patches = std::move(patches);
  for (Patch& p : kf.patches) p.host_frame = kf.id;

  graph.window.push_back(std::move(kf));
  Keyframe& new_frame = graph.window.back();
  const int new_pos = static_cast<int>(graph.window.size()) - 1;

  // One static edge per valid new patch.
  for (size_t slot = 0; slot < new_frame.patches.size(); ++slot) {
    if (!new_frame.patches[slot].valid) continue;
    Edge edge;
    edge.kind = EdgeKind::Static;
    edge.host_frame = new_frame.id;
    edge.patch_slot = static_cast<int>(slot);
    edge.target_frame = new_frame.id;  // the host's right camera
    if (slot < static_measurements.size()) edge.disp = static_measurements[slot];
    edge.disp.host_frame = new_frame.id;
    edge.disp.patch_slot = static_cast<int>(slot);
    graph.edges.push_back(edge);
  }

  // Bidirectional temporal edges between the new frame and its neighbors.
  const size_t first_new_edge = graph.edges.size();
  for (int pos = 0; pos < new_pos; ++pos) {
    if (new_pos - pos > graph.config.edge_radius) continue;
    Keyframe& other = graph.window[pos];
    for (size_t slot = 0; slot < other.patches.size(); ++slot) {
      if (other.patches[slot].valid) {
        make_temporal_edge(graph, other, static_cast<int>(slot), new_frame, frontend_cfg);
      }
    }
    for (size_t slot = 0; slot < new_frame.patches.size(); ++slot) {
      if (new_frame.patches[slot].valid) {
        make_temporal_edge(graph, new_frame, static_cast<int>(slot), other, frontend_cfg);
      }
    }
  }
  // Confidences come from this frame's batch median; collect pointers only
  // after every push_back (the vector may have reallocated).
  std::vector<FlowMeasurement*> batch;
  for (size_t i = first_new_edge; i < graph.edges.size(); ++i) {
    batch.push_back(&graph.edges[i].flow);
  }
  assign_flow_confidences(batch);
}

double window_flow_magnitude(const PatchGraph& graph, int a_from_newest, int b_from_newest) {
  const int size = static_cast<int>(graph.window.size());
  if (a_from_newest >= size || b_from_newest >= size || a_from_newest < 0 || b_from_newest < 0) {
    throw Error(ErrorCode::InvalidConfig, "flow frames outside the window");
  }
  const Keyframe& frame_a = graph.window[size - 1 - a_from_newest];
  const Keyframe& frame_b = graph.window[size - 1 - b_from_newest];

  double sum = 0;
  int count = 0;
  for (const Edge& e : graph.edges) {
    if (e.kind != EdgeKind::Temporal || e.host_frame != frame_a.id ||
        e.target_frame != frame_b.id || !e.flow.valid) {
      continue;
    }
    const Patch& patch = frame_a.patches[e.patch_slot];
    sum += (e.flow.z_hat - Vec2(patch.center_x(), patch.center_y())).norm();
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::NoSharedMeasurements,
                "no valid tracks between frames " + std::to_string(frame_a.id) + " and " +
                    std::to_string(frame_b.id));
  }
  return sum / count;
}

namespace {

void remove_window_frame(PatchGraph& graph, int pos) {
  const int id = graph.window[pos].id;
  graph.edges.erase(std::remove_if(graph.edges.begin(), graph.edges.end(),
                                   [id](const Edge& e) {
                                     return e.host_frame == id || e.target_frame == id;
                                   }),
                    graph.edges.end());
  graph.window.erase(graph.window.begin() + pos);
}

}  // namespace

RemovalEvent manage_keyframes(PatchGraph& graph) {
  RemovalEvent event;
  const int size = static_cast<int>(graph.window.size());
  const int n = graph.config.window_size;
  if (size <= n) return event;  // precondition gate: nothing exceeded

  int remove_pos = 0;
  bool oldest = true;
  double flow = std::numeric_limits<double>::quiet_NaN();
  if (size > 5 && n >= 5) {
    try {
      flow = window_flow_magnitude(graph, 5, 3);
      if (flow < graph.config.tau_flow) {
        remove_pos = n - 4;
        oldest = false;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSharedMeasurements) throw;
      // Conservative: keep diversity, drop the oldest.
    }
  }

  event.removed = true;
  event.frame_id = graph.window[remove_pos].id;
  event.window_pos = remove_pos;
  event.removed_oldest = oldest;
  event.flow = flow;
  remove_window_frame(graph, remove_pos);
  return event;
}

std::string graph_snapshot(const PatchGraph& graph) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "patch-graph window=" << graph.window.size() << " edges=" << graph.edges.size() << "\n";
  for (const Keyframe& kf : graph.window) {
    Eigen::Quaterniond q(kf.pose.R);
    out << "frame " << kf.id << " t=" << kf.timestamp << " p=[" << kf.pose.p.x() << " "
        << kf.pose.p.y() << " " << kf.pose.p.z() << "] q=[" << q.x() << " " << q.y() << " "
        << q.z() << " " << q.w() << "] valid_patches=" << kf.valid_patch_count() << "\n";
  }
  int temporal = 0, statics = 0, valid_flows = 0;
  double residual_sum = 0, residual_max = 0;
  for (const Edge& e : graph.edges) {
    if (e.kind == EdgeKind::Temporal) {
      ++temporal;
      if (e.flow.valid) {
        ++valid_flows;
        residual_sum += e.flow.residual;
        residual_max = std::max(residual_max, e.flow.residual);
      }
    } else {
      ++statics;
    }
  }
  out << "edges temporal=" << temporal << " static=" << statics
      << " valid_flows=" << valid_flows;
  if (valid_flows > 0) {
    out << " mean_residual=" << residual_sum / valid_flows << " max_residual=" << residual_max;
  }
  out << "\n";
  return out.str();
}

void check_graph_integrity(const PatchGraph& graph) {
  for (const Edge& e : graph.edges) {
    const Keyframe* host = graph.find_frame(e.host_frame);
    const Keyframe* target = graph.find_frame(e.target_frame);
    if (!host || !target) {
      throw Error(ErrorCode::InvalidConfig,
                  "dangling edge reference to frame " +
                      std::to_string(host ? e.target_frame : e.host_frame));
    }
    if (e.patch_slot < 0 || e.patch_slot >= static_cast<int>(host->patches.size())) {
      throw Error(ErrorCode::InvalidConfig, "edge patch slot out of range");
    }
    if (e.kind == EdgeKind::Static && e.host_frame != e.target_frame) {
      throw Error(ErrorCode::InvalidConfig, "static edge must target its host frame");
    }
  }
}

}  // namespace sevo
