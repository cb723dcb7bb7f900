#include "sevo/geometry.hpp"

#include <cmath>

namespace sevo {

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(),
       w.z(), 0, -w.x(),
       -w.y(), w.x(), 0;
  return m;
}

SE3Pose se3_exp(const Vec6& twist) {
  const Vec3 v = twist.head<3>();
  const Vec3 w = twist.tail<3>();
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(w);

  // R = I + a*W + b*W^2,  V = I + b*W + c*W^2 with
  // a = sin(t)/t, b = (1-cos(t))/t^2, c = (t-sin(t))/t^3.
  double a, b, c;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }

  const Mat3 W2 = W * W;
  SE3Pose out;
  out.R = Mat3::Identity() + a * W + b * W2;
  out.p = (Mat3::Identity() + b * W + c * W2) * v;
  return out;
}

Vec6 se3_log(const SE3Pose& pose) {
  const Mat3& R = pose.R;
  const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double cos_theta = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double sin_theta = 0.5 * vee.norm();
  const double theta = std::atan2(sin_theta, cos_theta);

  Vec3 w;
  if (theta < kSmallAngle) {
    w = 0.5 * vee;
  } else {
    w = theta / (2.0 * std::sin(theta)) * vee;
  }

  const double theta2 = theta * theta;
  const Mat3 W = skew(w);
  Mat3 v_inv;
  if (theta < kSmallAngle) {
    v_inv = Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * (W * W);
  } else {
    const double k = (1.0 - 0.5 * theta * std::sin(theta) / (1.0 - std::cos(theta))) / theta2;
    v_inv = Mat3::Identity() - 0.5 * W + k * (W * W);
  }

  Vec6 twist;
  twist.head<3>() = v_inv * pose.p;
  twist.tail<3>() = w;
  return twist;
}

void PinholeIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) {
    throw Error(ErrorCode::InvalidConfig, "focal lengths must be positive");
  }
  if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height)) {
    throw Error(ErrorCode::InvalidConfig, "principal point must lie inside the sensor");
  }
}

void StereoRig::validate() const {
  intrinsics.validate();
  if (!(baseline > 0)) {
    throw Error(ErrorCode::InvalidConfig, "baseline must be positive");
  }
}

Vec2 project(const Vec3& point_cam, const PinholeIntrinsics& K, double z_min) {
  const double z = point_cam.z();
  if (!(z > z_min)) {
    throw Error(ErrorCode::NonPositiveDepth,
                "projection depth " + std::to_string(z) + " <= " + std::to_string(z_min));
  }
  return Vec2(K.fx * point_cam.x() / z + K.cx, K.fy * point_cam.y() / z + K.cy);
}

Vec3 backproject(const Vec2& pixel, double inverse_depth, const PinholeIntrinsics& K) {
  if (!(inverse_depth > 0)) {
    throw Error(ErrorCode::NonPositiveInverseDepth,
                "inverse depth " + std::to_string(inverse_depth) + " <= 0");
  }
  const double z = 1.0 / inverse_depth;
  return Vec3((pixel.x() - K.cx) / K.fx * z, (pixel.y() - K.cy) / K.fy * z, z);
}

double triangulate_from_disparity(double disparity_fullres_px, const StereoRig& rig,
                                  double min_disparity_px) {
  if (!(disparity_fullres_px >= min_disparity_px)) {
    throw Error(ErrorCode::DisparityTooSmall,
                "disparity " + std::to_string(disparity_fullres_px) + " px < " +
                    std::to_string(min_disparity_px) + " px");
  }
  return disparity_fullres_px / (rig.intrinsics.fx * rig.baseline);
}

}  // namespace sevo
