#include <gtest/gtest.h>

#include <cmath>

#include "patchservo/errors.hpp"
#include "patchservo/geometry.hpp"
#include "test_support.hpp"

using namespace patchservo;
using patchservo::testing::random_pose;
using patchservo::testing::random_unit;

namespace {

CameraIntrinsics k600() {
  CameraIntrinsics k;
  k.fx = k.fy = 600.0;
  k.cx = 320.0;
  k.cy = 240.0;
  return k;
}

}  // namespace

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Projection p = project(k600(), {0.0, 0.0, 1.0});
  EXPECT_DOUBLE_EQ(p.pixel.x(), 320.0);
  EXPECT_DOUBLE_EQ(p.pixel.y(), 240.0);
  EXPECT_DOUBLE_EQ(p.depth, 1.0);
}

TEST(Project, LateralOffset) {
  const Projection p = project(k600(), {0.1, 0.0, 1.0});
  EXPECT_NEAR(p.pixel.x(), 380.0, 1e-12);
  EXPECT_NEAR(p.pixel.y(), 240.0, 1e-12);
}

TEST(Project, BehindCameraThrows) {
  EXPECT_THROW(project(k600(), {0.0, 0.0, -0.5}), NonPositiveDepth);
  EXPECT_THROW(project(k600(), {0.0, 0.0, 1e-10}), NonPositiveDepth);
}

TEST(PixelToNormalized, Examples) {
  const auto k = k600();
  EXPECT_TRUE(pixel_to_normalized(k, {320.0, 240.0}).isZero());
  EXPECT_TRUE(pixel_to_normalized(k, {920.0, 240.0}).isApprox(Eigen::Vector2d(1.0, 0.0)));
  EXPECT_TRUE(pixel_to_normalized(k, {320.0, 540.0}).isApprox(Eigen::Vector2d(0.0, 0.5)));
}

TEST(PixelToNormalized, InvertsProjection) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> xy(-1.0, 1.0), z(0.1, 5.0);
  const auto k = k600();
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d p(xy(rng), xy(rng), z(rng));
    const Eigen::Vector2d n = pixel_to_normalized(k, project(k, p).pixel);
    EXPECT_NEAR(n.x(), p.x() / p.z(), 1e-12);
    EXPECT_NEAR(n.y(), p.y() / p.z(), 1e-12);
  }
}

TEST(Intrinsics, Validation) {
  CameraIntrinsics k;
  EXPECT_NO_THROW(k.validate());
  k.fx = 0.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = {};
  k.cx = 640.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(IntegrateTwist, ZeroTwistIsIdentity) {
  std::mt19937_64 rng(2);
  const Pose p = random_pose(rng);
  const Pose q = integrate_twist(p, Twist{}, 0.37);
  EXPECT_TRUE(q.rotation.isApprox(p.rotation, 1e-12));
  EXPECT_TRUE(q.translation.isApprox(p.translation, 1e-12));
}

TEST(IntegrateTwist, AdvancesAlongCameraZ) {
  Twist t;
  t.linear = {0.0, 0.0, 0.1};
  const Pose q = integrate_twist(Pose::identity(), t, 1.0);
  EXPECT_TRUE(q.translation.isApprox(Eigen::Vector3d(0.0, 0.0, 0.1), 1e-12));
  EXPECT_TRUE(q.rotation.isIdentity(1e-12));

  // Camera frame, not world frame.
  const Pose down = look_at({0.0, 0.0, 0.6}, Eigen::Vector3d::Zero(), 0.0);
  const Pose r = integrate_twist(down, t, 1.0);
  EXPECT_NEAR(r.translation.z(), 0.5, 1e-12);
}

TEST(IntegrateTwist, HalfTurnTwiceReturns) {
  Twist t;
  t.angular = {0.0, 0.0, kPi};
  const Pose q = integrate_twist(integrate_twist(Pose::identity(), t, 1.0), t, 1.0);
  EXPECT_TRUE(q.rotation.isIdentity(1e-6));
}

TEST(IntegrateTwist, RejectsNonPositiveDt) {
  EXPECT_THROW(integrate_twist(Pose::identity(), Twist{}, 0.0), std::invalid_argument);
}

TEST(IntegrateTwist, SubdivisionConverges) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix<double, 6, 1> v;
    for (int i = 0; i < 6; ++i) v(i) = u(rng);
    if (v.norm() > 1.0) v.normalize();
    const Twist t = Twist::from_vector(v);
    const Pose p = random_pose(rng);
    const double dt = 0.7;
    const Pose whole = integrate_twist(p, t, dt);
    Pose steps = p;
    for (int i = 0; i < 1000; ++i) steps = integrate_twist(steps, t, dt / 1000);
    const double scale = std::max(1.0, whole.translation.norm());
    EXPECT_LT((steps.translation - whole.translation).norm() / scale, 1e-6);
    EXPECT_LT((steps.rotation - whole.rotation).norm(), 1e-6);
  }
}

TEST(IntegrateTwist, StaysOrthonormal) {
  std::mt19937_64 rng(4);
  Pose p = random_pose(rng);
  Twist t;
  t.angular = {0.3, -1.1, 2.0};
  t.linear = {0.1, 0.2, 0.3};
  for (int i = 0; i < 5000; ++i) p = integrate_twist(p, t, 0.05);
  EXPECT_LT((p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-9);
  EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-9);
}

TEST(LookAt, StraightDown) {
  const Pose p = look_at({0.0, 0.0, 0.6}, Eigen::Vector3d::Zero(), 0.0);
  EXPECT_TRUE(p.rotation.col(2).isApprox(Eigen::Vector3d(0.0, 0.0, -1.0), 1e-12));
  EXPECT_TRUE(p.translation.isApprox(Eigen::Vector3d(0.0, 0.0, 0.6)));
  EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-12);
}

TEST(LookAt, RollHalfTurnFlipsX) {
  const Pose a = look_at({0.0, 0.0, 0.6}, Eigen::Vector3d::Zero(), 0.0);
  const Pose b = look_at({0.0, 0.0, 0.6}, Eigen::Vector3d::Zero(), kPi);
  EXPECT_TRUE(b.rotation.col(0).isApprox(-a.rotation.col(0), 1e-12));
  EXPECT_TRUE(b.rotation.col(2).isApprox(a.rotation.col(2), 1e-12));
}

TEST(LookAt, AimsAtTargetFromAnywhere) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d eye(u(rng), u(rng), 0.5 + u(rng));
    const Eigen::Vector3d target(u(rng), u(rng), 0.0);
    const Pose p = look_at(eye, target, u(rng) * kPi);
    EXPECT_TRUE(p.rotation.col(2).isApprox((target - eye).normalized(), 1e-9));
    EXPECT_LT((p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-9);
  }
}

TEST(LookAt, DegenerateThrows) {
  EXPECT_THROW(look_at({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 0.0), DegenerateLookAt);
}

TEST(PoseError, Examples) {
  const Pose a;
  PoseError e = pose_error(a, a);
  EXPECT_EQ(e.translation_m, 0.0);
  EXPECT_EQ(e.rotation_deg, 0.0);

  Pose b;
  b.translation = {0.3, 0.4, 0.0};
  e = pose_error(b, a);
  EXPECT_NEAR(e.translation_m, 0.5, 1e-12);
  EXPECT_NEAR(e.rotation_deg, 0.0, 1e-12);

  Pose c;
  c.rotation = Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  e = pose_error(c, a);
  EXPECT_NEAR(e.translation_m, 0.0, 1e-12);
  EXPECT_NEAR(e.rotation_deg, 90.0, 1e-9);
}

TEST(PoseError, SymmetricAndTriangle) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const PoseError ab = pose_error(a, b), ba = pose_error(b, a);
    const PoseError bc = pose_error(b, c), ac = pose_error(a, c);
    EXPECT_NEAR(ab.rotation_deg, ba.rotation_deg, 1e-9);
    EXPECT_NEAR(ab.translation_m, ba.translation_m, 1e-12);
    EXPECT_LE(ac.rotation_deg, ab.rotation_deg + bc.rotation_deg + 1e-9);
    EXPECT_LE(ac.translation_m, ab.translation_m + bc.translation_m + 1e-9);
  }
}

TEST(PoseError, RotationAngleNearPi) {
  Pose a;
  a.rotation = Eigen::AngleAxisd(kPi - 1e-7, Eigen::Vector3d(1.0, 2.0, -0.5).normalized()).toRotationMatrix();
  EXPECT_NEAR(pose_error(a, Pose{}).rotation_deg, 180.0, 1e-4);
}

TEST(So3, ExpLogRoundTrip) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ang(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d w = random_unit(rng) * ang(rng);
    EXPECT_TRUE(so3_log(so3_exp(w)).isApprox(w, 1e-9));
  }
  EXPECT_TRUE(so3_exp(Eigen::Vector3d::Zero()).isIdentity());
}

TEST(Pose, InverseAndCompose) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    const Pose id = p * p.inverse();
    EXPECT_TRUE(id.rotation.isIdentity(1e-12));
    EXPECT_LT(id.translation.norm(), 1e-12);
    const Eigen::Vector3d x(0.1, -0.2, 0.3);
    EXPECT_TRUE(p.to_world(p.to_camera(x)).isApprox(x, 1e-12));
  }
}

TEST(Interpolate, EndpointsAndMidpoint) {
  Pose a, b;
  b.translation = {1.0, 2.0, 3.0};
  b.rotation = Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Pose m = interpolate(a, b, 0.5);
  EXPECT_TRUE(m.translation.isApprox(Eigen::Vector3d(0.5, 1.0, 1.5)));
  EXPECT_NEAR(pose_error(m, a).rotation_deg, 45.0, 1e-9);
  EXPECT_NEAR(pose_error(m, b).rotation_deg, 45.0, 1e-9);
  EXPECT_TRUE(interpolate(a, b, 1.0).rotation.isApprox(b.rotation, 1e-12));
}

TEST(RollAboutOpticalAxis, KeepsAxis) {
  const Pose p = look_at({0.1, 0.2, 0.6}, {0.0, 0.0, 0.0}, 0.3);
  const Pose q = roll_about_optical_axis(p, 1.2);
  EXPECT_TRUE(q.rotation.col(2).isApprox(p.rotation.col(2), 1e-12));
  EXPECT_NEAR(pose_error(q, p).rotation_deg, rad2deg(1.2), 1e-9);
  EXPECT_TRUE(q.translation.isApprox(p.translation));
}
