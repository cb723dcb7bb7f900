#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sevo/error.hpp"

namespace sevo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 skew(const Vec3& w);

// Rigid transform, camera-to-world convention: x_w = R * x_c + p.
struct SE3Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  SE3Pose() = default;
  SE3Pose(const Mat3& rotation, const Vec3& translation) : R(rotation), p(translation) {}

  Vec3 operator*(const Vec3& x) const { return R * x + p; }

  SE3Pose operator*(const SE3Pose& other) const {
    return SE3Pose(R * other.R, R * other.p + p);
  }

  SE3Pose inverse() const {
    Mat3 Rt = R.transpose();
    return SE3Pose(Rt, -(Rt * p));
  }

  // Max deviation of R from orthonormality (used by invariant checks).
  double orthonormality_error() const {
    return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  // Nearest rotation via quaternion renormalization. Recurrences that feed
  // composed poses back into themselves must renormalize, or rounding drift
  // compounds geometrically.
  SE3Pose orthonormalized() const {
    Eigen::Quaterniond q(R);
    q.normalize();
    return SE3Pose(q.toRotationMatrix(), p);
  }
};

// Exponential map of a twist [v; w] (v meters, w radians). Uses a
// second-order Taylor expansion of the rotation coefficients below
// kSmallAngle to avoid cancellation.
inline constexpr double kSmallAngle = 1e-8;
SE3Pose se3_exp(const Vec6& twist);

// Inverse of se3_exp, valid for rotation angles < pi.
Vec6 se3_log(const SE3Pose& pose);

struct PinholeIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

// Rectified stereo pair sharing one set of intrinsics. The right camera
// sits at +baseline along the left camera's x axis, so left-frame points
// map to the right frame by a pure translation of -baseline.
struct StereoRig {
  PinholeIntrinsics intrinsics;
  double baseline = 0;  // meters

  SE3Pose T_right_from_left() const {
    return SE3Pose(Mat3::Identity(), Vec3(-baseline, 0, 0));
  }

  void validate() const;
};

struct TrajectorySample {
  double t = 0;  // seconds
  SE3Pose pose;  // camera-to-world
};

// Timestamps strictly increasing; enforced by the io layer.
using Trajectory = std::vector<TrajectorySample>;

inline constexpr double kMinProjectionDepth = 1e-6;

// Pinhole projection of a camera-frame point. Throws NonPositiveDepth for
// z <= z_min.
Vec2 project(const Vec3& point_cam, const PinholeIntrinsics& K,
             double z_min = kMinProjectionDepth);

// Ray through `pixel` scaled to depth 1/inverse_depth. Throws
// NonPositiveInverseDepth for inverse_depth <= 0.
Vec3 backproject(const Vec2& pixel, double inverse_depth, const PinholeIntrinsics& K);

inline constexpr double kDefaultMinDisparityPx = 0.5;

// inverse_depth = disparity / (fx * baseline). Throws DisparityTooSmall
// below min_disparity_px (point too far away or unmatched).
double triangulate_from_disparity(double disparity_fullres_px, const StereoRig& rig,
                                  double min_disparity_px = kDefaultMinDisparityPx);

}  // namespace sevo
