#include "sevo/ba.hpp"

#include <cmath>

namespace sevo {

WindowState extract_window_state(const PatchGraph& graph) {
  WindowState state;
  state.frame_ids.reserve(graph.window.size());
  state.poses.reserve(graph.window.size());
  state.inverse_depths.reserve(graph.window.size());
  for (const Keyframe& kf : graph.window) {
    state.frame_ids.push_back(kf.id);
    state.poses.push_back(kf.pose);
    std::vector<double> depths(kf.patches.size(), 0.0);
    for (size_t s = 0; s < kf.patches.size(); ++s) {
      if (kf.patches[s].valid) depths[s] = kf.patches[s].inverse_depth;
    }
    state.inverse_depths.push_back(std::move(depths));
  }
  state.fixed_pose = 0;
  return state;
}

void apply_window_state(const WindowState& state, PatchGraph& graph) {
  for (size_t f = 0; f < state.frame_ids.size(); ++f) {
    Keyframe* kf = graph.find_frame(state.frame_ids[f]);
    if (!kf) continue;
    kf->pose = state.poses[f];
    for (size_t s = 0; s < kf->patches.size() && s < state.inverse_depths[f].size(); ++s) {
      if (kf->patches[s].valid) kf->patches[s].inverse_depth = state.inverse_depths[f][s];
    }
  }
}

double robust_weight(const Vec2& r, double confidence, double huber_px, double sigma_px) {
  double w = confidence / (sigma_px * sigma_px);
  const double norm = r.norm();
  if (norm > huber_px) w *= huber_px / norm;
  return w;
}

namespace {

// Huber rho(|r|), the objective the reweighted quadratic stands in for.
double huber_rho(double norm, double k) {
  return norm <= k ? norm * norm : k * (2.0 * norm - k);
}

struct ProjectedPoint {
  Vec3 x_host, x_world, x_target;
  bool in_front = false;
};

ProjectedPoint chain_point(const Patch& patch, double lambda, const SE3Pose& host_pose,
                           const SE3Pose& target_pose, const PinholeIntrinsics& K) {
  ProjectedPoint p;
  if (!(lambda > 0)) return p;
  p.x_host = Vec3((patch.center_x() - K.cx) / K.fx, (patch.center_y() - K.cy) / K.fy, 1.0) /
             lambda;
  p.x_world = host_pose * p.x_host;
  p.x_target = target_pose.inverse() * p.x_world;
  p.in_front = p.x_target.z() > kMinProjectionDepth;
  return p;
}

}  // namespace

ResidualBlock temporal_residual(const WindowState& state, const PatchGraph& graph,
                                const Edge& edge, const BaConfig& cfg) {
  ResidualBlock block;
  const int host_idx = state.frame_index(edge.host_frame);
  const int target_idx = state.frame_index(edge.target_frame);
  if (host_idx < 0 || target_idx < 0 || host_idx == target_idx) {
    throw Error(ErrorCode::InvalidConfig, "temporal residual needs two distinct window frames");
  }
  const Keyframe* host = graph.find_frame(edge.host_frame);
  const Patch& patch = host->patches[edge.patch_slot];
  const PinholeIntrinsics& K = graph.rig.intrinsics;
  const double lambda = state.inverse_depths[host_idx][edge.patch_slot];

  const ProjectedPoint p =
      chain_point(patch, lambda, state.poses[host_idx], state.poses[target_idx], K);
  if (!p.in_front) return block;  // cheirality drop

  const double z = p.x_target.z();
  const double inv_z = 1.0 / z;
  Eigen::Matrix<double, 2, 3> dpi;
  dpi << K.fx * inv_z, 0, -K.fx * p.x_target.x() * inv_z * inv_z,
      0, K.fy * inv_z, -K.fy * p.x_target.y() * inv_z * inv_z;

  block.r = edge.flow.z_hat - Vec2(K.fx * p.x_target.x() * inv_z + K.cx,
                                   K.fy * p.x_target.y() * inv_z + K.cy);

  const Mat3 Rt_t = state.poses[target_idx].R.transpose();
  Eigen::Matrix<double, 3, 6> dxt_dhost;
  dxt_dhost.leftCols<3>() = Rt_t;
  dxt_dhost.rightCols<3>() = -Rt_t * skew(p.x_world);

  // r = z_hat - pi(x_target): the measurement term is constant, so
  // J = -dpi * dx_target/d(increment).
  block.J_host = -dpi * dxt_dhost;
  block.J_target = dpi * dxt_dhost;  // target enters through the inverse
  block.J_depth = -dpi * (Rt_t * (state.poses[host_idx].R * (-p.x_host / lambda)));
  block.weight = robust_weight(block.r, edge.flow.confidence, cfg.huber_px, cfg.sigma_px);
  block.valid = true;
  return block;
}

ResidualBlock static_residual(const WindowState& state, const PatchGraph& graph,
                              const Edge& edge, const BaConfig& cfg) {
  ResidualBlock block;
  const int host_idx = state.frame_index(edge.host_frame);
  if (host_idx < 0) {
    throw Error(ErrorCode::InvalidConfig, "static residual host outside the window");
  }
  const double lambda = state.inverse_depths[host_idx][edge.patch_slot];
  if (!(lambda > 0)) return block;  // cheirality guard (floored elsewhere)

  const double fxB = graph.rig.intrinsics.fx * graph.rig.baseline;
  block.r = Vec2(edge.disp.disparity_fullres - fxB * lambda, 0.0);
  block.J_depth = Vec2(-fxB, 0.0);
  block.weight = robust_weight(block.r, edge.disp.confidence, cfg.huber_px, cfg.sigma_px);
  block.valid = true;
  return block;
}

double robust_cost(const PatchGraph& graph, const WindowState& state, const BaConfig& cfg,
                   int* dropped_blocks) {
  double cost = 0;
  int dropped = 0;
  for (const Edge& edge : graph.edges) {
    ResidualBlock block;
    if (edge.kind == EdgeKind::Temporal) {
      if (!edge.flow.valid) continue;
      block = temporal_residual(state, graph, edge, cfg);
    } else {
      if (!edge.disp.valid) continue;
      block = static_residual(state, graph, edge, cfg);
    }
    if (!block.valid) {
      ++dropped;
      continue;
    }
    const double conf = edge.kind == EdgeKind::Temporal ? edge.flow.confidence
                                                        : edge.disp.confidence;
    cost += conf / (cfg.sigma_px * cfg.sigma_px) * huber_rho(block.r.norm(), cfg.huber_px);
  }
  if (dropped_blocks) *dropped_blocks = dropped;
  return cost;
}

NormalEquations assemble_normal_equations(const PatchGraph& graph, const WindowState& state,
                                          const BaConfig& cfg) {
  NormalEquations eq;
  const int num_frames = static_cast<int>(state.frame_ids.size());

  eq.pose_col.assign(num_frames, -1);
  int col = 0;
  for (int f = 0; f < num_frames; ++f) {
    if (f == state.fixed_pose) continue;
    eq.pose_col[f] = col;
    col += 6;
  }
  eq.num_pose_params = col;

  eq.depth_col.resize(num_frames);
  int dcol = 0;
  for (int f = 0; f < num_frames; ++f) {
    eq.depth_col[f].assign(state.inverse_depths[f].size(), -1);
    for (size_t s = 0; s < state.inverse_depths[f].size(); ++s) {
      if (state.inverse_depths[f][s] > 0) eq.depth_col[f][s] = dcol++;
    }
  }
  eq.num_depths = dcol;

  eq.Hpp = Eigen::MatrixXd::Zero(eq.num_pose_params, eq.num_pose_params);
  eq.Hpd = Eigen::MatrixXd::Zero(eq.num_pose_params, eq.num_depths);
  eq.Hdd = Eigen::VectorXd::Zero(eq.num_depths);
  eq.gp = Eigen::VectorXd::Zero(eq.num_pose_params);
  eq.gd = Eigen::VectorXd::Zero(eq.num_depths);

  auto add_pose_pose = [&](int col_a, const Mat26& Ja, int col_b, const Mat26& Jb, double w) {
    if (col_a < 0 || col_b < 0) return;
    eq.Hpp.block<6, 6>(col_a, col_b) += w * Ja.transpose() * Jb;
    if (col_a != col_b) {
      eq.Hpp.block<6, 6>(col_b, col_a) += w * Jb.transpose() * Ja;
    }
  };

  for (const Edge& edge : graph.edges) {
    const int host_idx = state.frame_index(edge.host_frame);
    if (host_idx < 0) continue;
    const int d = eq.depth_col[host_idx][edge.patch_slot];

    if (edge.kind == EdgeKind::Temporal) {
      if (!edge.flow.valid || d < 0) continue;
      const ResidualBlock block = temporal_residual(state, graph, edge, cfg);
      if (!block.valid) {
        ++eq.dropped_blocks;
        continue;
      }
      ++eq.temporal_blocks;
      const double w = block.weight;
      const int target_idx = state.frame_index(edge.target_frame);
      const int ch = eq.pose_col[host_idx];
      const int ct = eq.pose_col[target_idx];

      add_pose_pose(ch, block.J_host, ch, block.J_host, w);
      add_pose_pose(ct, block.J_target, ct, block.J_target, w);
      add_pose_pose(ch, block.J_host, ct, block.J_target, w);

      eq.Hdd[d] += w * block.J_depth.squaredNorm();
      if (ch >= 0) {
        eq.Hpd.block<6, 1>(ch, d) += w * block.J_host.transpose() * block.J_depth;
        eq.gp.segment<6>(ch) += w * block.J_host.transpose() * block.r;
      }
      if (ct >= 0) {
        eq.Hpd.block<6, 1>(ct, d) += w * block.J_target.transpose() * block.J_depth;
        eq.gp.segment<6>(ct) += w * block.J_target.transpose() * block.r;
      }
      eq.gd[d] += w * block.J_depth.dot(block.r);
      eq.cost += (edge.flow.confidence / (cfg.sigma_px * cfg.sigma_px)) *
                 huber_rho(block.r.norm(), cfg.huber_px);
    } else {
      if (!edge.disp.valid || d < 0) continue;
      const ResidualBlock block = static_residual(state, graph, edge, cfg);
      if (!block.valid) {
        ++eq.dropped_blocks;
        continue;
      }
      ++eq.static_blocks;
      const double w = block.weight;
      eq.Hdd[d] += w * block.J_depth.squaredNorm();
      eq.gd[d] += w * block.J_depth.dot(block.r);
      eq.cost += (edge.disp.confidence / (cfg.sigma_px * cfg.sigma_px)) *
                 huber_rho(block.r.norm(), cfg.huber_px);
    }
  }
  return eq;
}

bool solve_schur(const NormalEquations& eq, double mu, Eigen::VectorXd* dpose,
                 Eigen::VectorXd* ddepth) {
  const Eigen::VectorXd Hdd_damped = eq.Hdd.array() + mu;
  const Eigen::VectorXd Hdd_inv = Hdd_damped.cwiseInverse();

  Eigen::MatrixXd reduced = eq.Hpp;
  reduced.diagonal().array() += mu;
  if (eq.num_depths > 0) {
    reduced.noalias() -= eq.Hpd * Hdd_inv.asDiagonal() * eq.Hpd.transpose();
  }
  Eigen::VectorXd rhs = -eq.gp;
  if (eq.num_depths > 0) {
    rhs.noalias() += eq.Hpd * (Hdd_inv.asDiagonal() * eq.gd);
  }
  if (!reduced.allFinite() || !rhs.allFinite()) return false;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  if (d.size() > 0 && (!(d.minCoeff() > 0) || !d.allFinite())) return false;

  *dpose = ldlt.solve(rhs);
  if (!dpose->allFinite()) return false;
  if (eq.num_depths > 0) {
    *ddepth = Hdd_inv.asDiagonal() * (-eq.gd - eq.Hpd.transpose() * *dpose);
  } else {
    ddepth->resize(0);
  }
  return true;
}

WindowState retract_state(const WindowState& state, const NormalEquations& eq,
                          const Eigen::VectorXd& dpose, const Eigen::VectorXd& ddepth,
                          double lambda_floor) {
  WindowState out = state;
  for (size_t f = 0; f < state.frame_ids.size(); ++f) {
    const int col = eq.pose_col[f];
    if (col < 0) continue;
    out.poses[f] = se3_exp(dpose.segment<6>(col)) * state.poses[f];
  }
  for (size_t f = 0; f < state.frame_ids.size(); ++f) {
    for (size_t s = 0; s < state.inverse_depths[f].size(); ++s) {
      const int d = eq.depth_col[f][s];
      if (d < 0) continue;
      out.inverse_depths[f][s] = std::max(state.inverse_depths[f][s] + ddepth[d], lambda_floor);
    }
  }
  return out;
}

WindowState solve_window(const PatchGraph& graph, WindowState state, const BaConfig& cfg,
                         SolveReport* report) {
  if (state.frame_ids.size() < 2) {
    throw Error(ErrorCode::InvalidConfig, "window solve needs at least two keyframes");
  }
  SolveReport local;
  SolveReport& rep = report ? *report : local;
  rep = SolveReport();

  double mu = cfg.damping;
  int current_dropped = 0;
  double current_cost = robust_cost(graph, state, cfg, &current_dropped);
  rep.initial_cost = current_cost;

  // A candidate is acceptable only if its robustified cost is finite and
  // non-increasing AND it does not push more blocks through the cheirality
  // boundary: dropped blocks vanish from the cost, so comparing costs over
  // a shrinking block set would reward wild steps.
  auto acceptable = [&](double cost, int dropped) {
    return std::isfinite(cost) && cost <= current_cost + 1e-12 && dropped <= current_dropped;
  };
  // Linearization trust bound: one window motion never needs a pose step
  // near a radian or a meter; larger steps wrap rotations and corrupt the
  // retraction numerically.
  auto step_in_trust_region = [&](const Eigen::VectorXd& dpose) {
    for (int c = 0; c + 6 <= dpose.size(); c += 6) {
      if (!(dpose.segment<6>(c).norm() <= cfg.max_step)) return false;
    }
    return true;
  };

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    NormalEquations eq = assemble_normal_equations(graph, state, cfg);
    rep.temporal_blocks = eq.temporal_blocks;
    rep.static_blocks = eq.static_blocks;
    rep.dropped_blocks += eq.dropped_blocks;
    if (eq.num_pose_params == 0) {
      throw Error(ErrorCode::InvalidConfig, "no free poses in the window");
    }

    Eigen::VectorXd dpose, ddepth;
    if (!solve_schur(eq, mu, &dpose, &ddepth)) {
      rep.aborted = true;
      rep.iteration_cost.push_back(current_cost);
      return state;  // SingularReducedSystem: leave the state untouched
    }

    WindowState candidate = retract_state(state, eq, dpose, ddepth, cfg.lambda_floor);
    int new_dropped = 0;
    double new_cost = std::numeric_limits<double>::infinity();
    if (step_in_trust_region(dpose)) {
      new_cost = robust_cost(graph, candidate, cfg, &new_dropped);
    }
    if (!acceptable(new_cost, new_dropped)) {
      // One retry with stronger damping, then reject the step.
      mu *= 10.0;
      if (solve_schur(eq, mu, &dpose, &ddepth) && step_in_trust_region(dpose)) {
        candidate = retract_state(state, eq, dpose, ddepth, cfg.lambda_floor);
        new_cost = robust_cost(graph, candidate, cfg, &new_dropped);
      }
      if (!acceptable(new_cost, new_dropped)) {
        ++rep.rejected_steps;
        rep.iteration_cost.push_back(current_cost);
        continue;
      }
    }
    state = std::move(candidate);
    current_cost = new_cost;
    current_dropped = new_dropped;
    rep.iteration_cost.push_back(current_cost);

    if (iter == cfg.iterations - 1 && eq.num_pose_params > 0) {
      const Eigen::VectorXd diag = eq.Hpp.diagonal().array() + mu;
      rep.condition_estimate = diag.maxCoeff() / std::max(diag.minCoeff(), 1e-300);
    }
  }
  return state;
}

}  // namespace sevo
