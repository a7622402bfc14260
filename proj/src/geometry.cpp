#include "patchservo/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "patchservo/errors.hpp"

namespace patchservo {

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("resolution must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw std::invalid_argument("principal point outside the image");
  }
}

Projection project(const CameraIntrinsics& k, const Eigen::Vector3d& p) {
  if (!(p.z() > 1e-9)) throw NonPositiveDepth("point at z=" + std::to_string(p.z()));
  return {Eigen::Vector2d(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy), p.z()};
}

Eigen::Vector2d pixel_to_normalized(const CameraIntrinsics& k, const Eigen::Vector2d& px) {
  return {(px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy};
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d k = skew(w);
  double a, b;
  if (theta2 < 1e-10) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Pose se3_exp(const Eigen::Vector3d& v, const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d k = skew(w);
  double b, c;
  if (theta2 < 1e-10) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d v_mat = Eigen::Matrix3d::Identity() + b * k + c * k * k;
  Pose out;
  out.rotation = so3_exp(w);
  out.translation = v_mat * v;
  return out;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

Pose integrate_twist(const Pose& pose, const Twist& twist, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  Pose next = pose * se3_exp(twist.linear * dt, twist.angular * dt);
  next.rotation = orthonormalize(next.rotation);
  return next;
}

Pose roll_about_optical_axis(const Pose& pose, double angle_rad) {
  Pose roll;
  roll.rotation = Eigen::AngleAxisd(angle_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  Pose out = pose * roll;
  out.rotation = orthonormalize(out.rotation);
  return out;
}

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double roll_rad) {
  const Eigen::Vector3d dir = target - eye;
  if (dir.norm() <= 1e-9) throw DegenerateLookAt("eye and target coincide");
  const Eigen::Vector3d z = dir.normalized();

  // Image "down" follows world -Y; fall back to world -Z when looking along Y.
  Eigen::Vector3d down(0.0, -1.0, 0.0);
  if (std::abs(z.dot(down)) > 1.0 - 1e-9) down = Eigen::Vector3d(0.0, 0.0, -1.0);
  const Eigen::Vector3d y = (down - down.dot(z) * z).normalized();
  const Eigen::Vector3d x = y.cross(z);

  Pose pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = z;
  pose.translation = eye;
  return roll_rad == 0.0 ? pose : roll_about_optical_axis(pose, roll_rad);
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis_part(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis_part.norm(), 0.5 * (r.trace() - 1.0));
}

PoseError pose_error(const Pose& current, const Pose& desired) {
  return {(current.translation - desired.translation).norm(),
          rad2deg(rotation_angle(desired.rotation.transpose() * current.rotation))};
}

Pose interpolate(const Pose& a, const Pose& b, double s) {
  Pose out;
  out.translation = (1.0 - s) * a.translation + s * b.translation;
  const Eigen::Vector3d w = so3_log(a.rotation.transpose() * b.rotation);
  out.rotation = orthonormalize(a.rotation * so3_exp(s * w));
  return out;
}

}  // namespace patchservo
