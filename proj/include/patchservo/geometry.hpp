#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace patchservo {

/// Rigid camera-to-world transform. A point p_cam maps to the world as
/// rotation * p_cam + translation, so the columns of `rotation` are the
/// camera axes expressed in the world frame.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  /// World point expressed in this camera's frame.
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const {
    return rotation * p_cam + translation;
  }
};

/// Camera-frame velocity screw: linear (m/s) then angular (rad/s).
struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  static Twist from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return {v.head<3>(), v.tail<3>()};
  }
  Eigen::Matrix<double, 6, 1> as_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << linear, angular;
    return v;
  }
  bool is_finite() const { return linear.allFinite() && angular.allFinite(); }
  double norm() const { return as_vector().norm(); }
};

struct CameraIntrinsics {
  double fx = 605.0;
  double fy = 605.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

struct PoseError {
  double translation_m;
  double rotation_deg;
};

Projection project(const CameraIntrinsics& intrinsics, const Eigen::Vector3d& point_cam);

Eigen::Vector2d pixel_to_normalized(const CameraIntrinsics& intrinsics, const Eigen::Vector2d& pixel);

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// SO(3) exponential (Rodrigues).
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w);

/// SO(3) logarithm as a rotation vector with angle in [0, pi].
Eigen::Vector3d so3_log(const Eigen::Matrix3d& rotation);

/// Closed-form SE(3) exponential of a body-frame screw (linear, angular).
Pose se3_exp(const Eigen::Vector3d& linear, const Eigen::Vector3d& angular);

/// Nearest rotation matrix in the Frobenius sense (polar decomposition).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

/// Advances `pose` by the camera-frame twist held constant for `dt` seconds.
Pose integrate_twist(const Pose& pose, const Twist& twist, double dt);

/// Rotation about the camera's own optical axis (right-multiplied).
Pose roll_about_optical_axis(const Pose& pose, double angle_rad);

/// Camera at `eye` whose optical axis points at `target`. With zero roll the
/// image x axis follows world +X as closely as possible and image y (down)
/// follows world -Y, so a target lying in the z=0 plane appears upright.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double roll_rad);

/// Geodesic rotation angle in radians.
double rotation_angle(const Eigen::Matrix3d& rotation);

PoseError pose_error(const Pose& current, const Pose& desired);

/// Pose on the straight-line / geodesic path from `a` (s=0) to `b` (s=1).
Pose interpolate(const Pose& a, const Pose& b, double s);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace patchservo
