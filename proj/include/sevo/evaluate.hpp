#pragma once

#include <vector>

#include "sevo/geometry.hpp"

namespace sevo {

struct PosePair {
  double t_gt = 0, t_est = 0;
  SE3Pose gt, est;
};

// Greedy nearest-timestamp association within max_dt; each pose is used at
// most once. Throws NoMatches when nothing pairs up.
std::vector<PosePair> associate(const Trajectory& gt, const Trajectory& est,
                                double max_dt = 0.02);

struct AlignmentResult {
  SE3Pose T_align;       // maps estimate positions onto the ground truth
  double scale = 1.0;    // 1 unless sim3 alignment was requested
  double rms_m = 0;      // post-alignment RMS position residual, meters
  bool degenerate = false;  // near-collinear configuration
};

// Closed-form least-squares rigid alignment (centroids + SVD of the cross
// covariance, reflection corrected). SE(3) by default; with_scale enables
// the similarity (sim3) variant for diagnosis only.
AlignmentResult align_trajectories(const std::vector<PosePair>& pairs, bool with_scale = false);

// Absolute trajectory error: RMS translational residual after alignment,
// in centimeters.
double compute_ate_cm(const std::vector<PosePair>& pairs, AlignmentResult* alignment = nullptr,
                      bool with_scale = false);

// Relative pose error: per-interval relative-translation error magnitude
// divided by the interval, RMS over all intervals of length ~delta, in
// cm/s. Throws InsufficientSpan when no interval fits.
double compute_rpe_cm_per_s(const std::vector<PosePair>& pairs, double delta_s = 1.0);

struct MetricReport {
  double ate_cm = 0;
  double rpe_cm_per_s = 0;
  int matched_poses = 0;
  double trajectory_length_m = 0;  // ground-truth path length over matches
};

MetricReport evaluate_trajectories(const Trajectory& gt, const Trajectory& est,
                                   double max_dt = 0.02, double rpe_delta_s = 1.0,
                                   bool with_scale = false);

}  // namespace sevo
