#include "sevo/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace sevo {

std::vector<PosePair> associate(const Trajectory& gt, const Trajectory& est, double max_dt) {
  if (gt.empty() || est.empty()) {
    throw Error(ErrorCode::NoMatches, "empty trajectory");
  }
  struct Candidate {
    double dt;
    size_t gi, ei;
  };
  std::vector<Candidate> candidates;
  size_t lo = 0;
  for (size_t gi = 0; gi < gt.size(); ++gi) {
    while (lo < est.size() && est[lo].t < gt[gi].t - max_dt) ++lo;
    for (size_t ei = lo; ei < est.size() && est[ei].t <= gt[gi].t + max_dt; ++ei) {
      candidates.push_back(Candidate{std::abs(est[ei].t - gt[gi].t), gi, ei});
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::NoMatches, "no timestamp pairs within max_dt");
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.dt < b.dt; });

  std::vector<char> gt_used(gt.size(), 0), est_used(est.size(), 0);
  std::vector<PosePair> pairs;
  for (const Candidate& c : candidates) {
    if (gt_used[c.gi] || est_used[c.ei]) continue;
    gt_used[c.gi] = est_used[c.ei] = 1;
    pairs.push_back(PosePair{gt[c.gi].t, est[c.ei].t, gt[c.gi].pose, est[c.ei].pose});
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const PosePair& a, const PosePair& b) { return a.t_gt < b.t_gt; });
  return pairs;
}

AlignmentResult align_trajectories(const std::vector<PosePair>& pairs, bool with_scale) {
  AlignmentResult result;
  const size_t n = pairs.size();
  if (n < 3) {
    throw Error(ErrorCode::NoMatches, "alignment needs at least 3 matched poses");
  }

  Vec3 mean_est = Vec3::Zero(), mean_gt = Vec3::Zero();
  for (const PosePair& p : pairs) {
    mean_est += p.est.p;
    mean_gt += p.gt.p;
  }
  mean_est /= static_cast<double>(n);
  mean_gt /= static_cast<double>(n);

  Mat3 cross = Mat3::Zero();
  double var_est = 0;
  for (const PosePair& p : pairs) {
    cross += (p.gt.p - mean_gt) * (p.est.p - mean_est).transpose();
    var_est += (p.est.p - mean_est).squaredNorm();
  }
  cross /= static_cast<double>(n);
  var_est /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) {
    S(2, 2) = -1;
  }
  const Mat3 R = svd.matrixU() * S * svd.matrixV().transpose();

  const Eigen::Vector3d sv = svd.singularValues();
  result.degenerate = sv(1) <= 1e-9 * std::max(sv(0), 1e-300);

  double scale = 1.0;
  if (with_scale && var_est > 1e-300) {
    scale = (sv(0) + sv(1) + S(2, 2) * sv(2)) / var_est;
  }
  result.scale = scale;
  result.T_align = SE3Pose(R, mean_gt - scale * (R * mean_est));

  double sq_sum = 0;
  for (const PosePair& p : pairs) {
    const Vec3 mapped = scale * (result.T_align.R * p.est.p) + result.T_align.p;
    sq_sum += (mapped - p.gt.p).squaredNorm();
  }
  result.rms_m = std::sqrt(sq_sum / static_cast<double>(n));
  return result;
}

double compute_ate_cm(const std::vector<PosePair>& pairs, AlignmentResult* alignment,
                      bool with_scale) {
  const AlignmentResult result = align_trajectories(pairs, with_scale);
  if (alignment) *alignment = result;
  return result.rms_m * 100.0;
}

double compute_rpe_cm_per_s(const std::vector<PosePair>& pairs, double delta_s) {
  if (pairs.size() < 2) {
    throw Error(ErrorCode::InsufficientSpan, "need at least two matched poses");
  }
  double sq_sum = 0;
  size_t count = 0;
  size_t j = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const double t_target = pairs[i].t_gt + delta_s;
    if (j < i + 1) j = i + 1;
    while (j < pairs.size() && pairs[j].t_gt < t_target - 1e-9) ++j;
    if (j >= pairs.size()) break;
    const double interval = pairs[j].t_gt - pairs[i].t_gt;
    if (interval > 1.5 * delta_s) continue;  // gap in the matches

    const SE3Pose rel_gt = pairs[i].gt.inverse() * pairs[j].gt;
    const SE3Pose rel_est = pairs[i].est.inverse() * pairs[j].est;
    const SE3Pose err = rel_gt.inverse() * rel_est;
    const double err_per_s = err.p.norm() / interval;
    sq_sum += err_per_s * err_per_s;
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::InsufficientSpan,
                "no matched pose pairs spanning " + std::to_string(delta_s) + " s");
  }
  return std::sqrt(sq_sum / static_cast<double>(count)) * 100.0;
}

MetricReport evaluate_trajectories(const Trajectory& gt, const Trajectory& est, double max_dt,
                                   double rpe_delta_s, bool with_scale) {
  const std::vector<PosePair> pairs = associate(gt, est, max_dt);
  MetricReport report;
  report.matched_poses = static_cast<int>(pairs.size());
  report.ate_cm = compute_ate_cm(pairs, nullptr, with_scale);
  report.rpe_cm_per_s = compute_rpe_cm_per_s(pairs, rpe_delta_s);
  for (size_t i = 1; i < pairs.size(); ++i) {
    report.trajectory_length_m += (pairs[i].gt.p - pairs[i - 1].gt.p).norm();
  }
  return report;
}

}  // namespace sevo
