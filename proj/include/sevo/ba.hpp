#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sevo/patch_graph.hpp"

namespace sevo {

using Mat26 = Eigen::Matrix<double, 2, 6>;

struct BaConfig {
  int iterations = 2;
  double damping = 1e-4;       // Levenberg term on both diagonals
  double huber_px = 4.0;       // residual norm where down-weighting starts
  double sigma_px = 1.0;       // nominal measurement sigma
  double lambda_floor = 1e-4;  // inverse-depth lower bound, 1/m
  double max_step = 1.0;       // per-pose tangent-norm bound on one GN step
};

// Optimizable window snapshot: one pose per keyframe plus the inverse depth
// of every patch slot. The oldest pose is gauge-fixed.
struct WindowState {
  std::vector<int> frame_ids;   // oldest to newest
  std::vector<SE3Pose> poses;   // camera-to-world
  std::vector<std::vector<double>> inverse_depths;  // [frame][slot], 0 if invalid
  int fixed_pose = 0;

  int frame_index(int frame_id) const {
    for (size_t i = 0; i < frame_ids.size(); ++i) {
      if (frame_ids[i] == frame_id) return static_cast<int>(i);
    }
    return -1;
  }
};

WindowState extract_window_state(const PatchGraph& graph);
void apply_window_state(const WindowState& state, PatchGraph& graph);

// Linearized measurement. Pose Jacobians are taken w.r.t. left-multiplied
// world-frame increments exp(dxi) * T; depth Jacobian w.r.t. the host
// patch's inverse depth.
struct ResidualBlock {
  Vec2 r = Vec2::Zero();
  Mat26 J_host = Mat26::Zero();
  Mat26 J_target = Mat26::Zero();
  Vec2 J_depth = Vec2::Zero();
  double weight = 0;
  bool valid = false;  // false: dropped (cheirality) this iteration
};

// r = z_hat - pi(T_target^-1 * T_host * pi^-1(center, lambda)): the tracked
// position minus the patch center reprojected into the target left camera.
ResidualBlock temporal_residual(const WindowState& state, const PatchGraph& graph,
                                const Edge& edge, const BaConfig& cfg = {});

// Rectified static residual in disparity form: r_x = measured disparity
// minus fx * baseline * lambda, r_y = 0. The right camera is rigidly
// attached to the host, so the host pose cancels and only the depth
// Jacobian is nonzero.
ResidualBlock static_residual(const WindowState& state, const PatchGraph& graph,
                              const Edge& edge, const BaConfig& cfg = {});

// Scalar isotropic information: confidence / sigma_px^2, Huber-downweighted
// by huber_px/|r| beyond the Huber point.
double robust_weight(const Vec2& r, double confidence, double huber_px = 4.0,
                     double sigma_px = 1.0);

// Robustified total cost at the given state (confidence-weighted Huber).
double robust_cost(const PatchGraph& graph, const WindowState& state, const BaConfig& cfg,
                   int* dropped_blocks = nullptr);

// Normal equations with the state ordered [pose tangents | depths]. The
// depth block is diagonal: every residual touches exactly one depth.
struct NormalEquations {
  Eigen::MatrixXd Hpp;  // pose-pose
  Eigen::MatrixXd Hpd;  // pose-depth
  Eigen::VectorXd Hdd;  // depth-depth diagonal
  Eigen::VectorXd gp, gd;
  std::vector<int> pose_col;  // frame index -> column offset, -1 if fixed
  std::vector<std::vector<int>> depth_col;  // [frame][slot] -> depth index, -1 if absent
  int num_pose_params = 0;
  int num_depths = 0;
  double cost = 0;  // robustified cost at the linearization point
  int dropped_blocks = 0;
  int temporal_blocks = 0;
  int static_blocks = 0;
};

NormalEquations assemble_normal_equations(const PatchGraph& graph, const WindowState& state,
                                          const BaConfig& cfg);

// Gauss-Newton step via Schur elimination of the depth block, with damping
// mu added to both diagonals. Returns false when the reduced pose system is
// not solvable (rank deficient or non-finite).
bool solve_schur(const NormalEquations& eq, double mu, Eigen::VectorXd* dpose,
                 Eigen::VectorXd* ddepth);

// Applies a step: non-fixed poses are retracted by exp(dxi) on the left,
// depths move additively and are floored at lambda_floor.
WindowState retract_state(const WindowState& state, const NormalEquations& eq,
                          const Eigen::VectorXd& dpose, const Eigen::VectorXd& ddepth,
                          double lambda_floor);

struct SolveReport {
  std::vector<double> iteration_cost;  // cost after each iteration
  double initial_cost = 0;
  int temporal_blocks = 0, static_blocks = 0;
  int dropped_blocks = 0;
  int rejected_steps = 0;
  bool aborted = false;  // singular reduced system; state left unchanged
  double condition_estimate = 0;
};

// Two damped Gauss-Newton iterations (by default) over all window edges.
// A step that would increase the robustified cost is retried once with
// 10x damping, then rejected; accepted costs are therefore non-increasing.
WindowState solve_window(const PatchGraph& graph, WindowState state, const BaConfig& cfg = {},
                         SolveReport* report = nullptr);

}  // namespace sevo
