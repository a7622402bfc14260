#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "patchservo/errors.hpp"
#include "patchservo/simenv.hpp"

using namespace patchservo;

namespace {

PlanarTarget poster(uint64_t seed = 1) {
  PlanarTarget t;
  t.texture = make_procedural_texture(seed, 150, 200);
  return t;
}

size_t count_valid(const RenderedView& v) {
  return static_cast<size_t>(std::count(v.valid.data.begin(), v.valid.data.end(), uint8_t{1}));
}

/// Kolmogorov survival function for the one-sample KS statistic.
double ks_pvalue(double d, size_t n) {
  const double lambda = (std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(static_cast<double>(n))) * d;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST(Render, FrontoParallelFootprintAndDepth) {
  const PlanarTarget target = poster();
  const CameraIntrinsics k;
  const Pose pose = look_at({0.0, 0.0, 0.6}, Eigen::Vector3d::Zero(), 0.0);
  const RenderedView v = render(target, k, pose);
  ASSERT_EQ(v.rgb.width, k.width);
  ASSERT_EQ(v.rgb.height, k.height);
  EXPECT_NEAR(v.depth_at(320, 240), 0.6, 1e-12);

  // Projected target rectangle: |x - cx| <= fx * 0.3 / 0.6, |y - cy| <= fy * 0.4 / 0.6.
  const double hx = k.fx * 0.3 / 0.6, hy = k.fy * 0.4 / 0.6;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const bool inside = std::abs(x - k.cx) <= hx && std::abs(y - k.cy) <= hy;
      const double margin = std::min(std::abs(std::abs(x - k.cx) - hx), std::abs(std::abs(y - k.cy) - hy));
      if (margin < 1e-6) continue;
      ASSERT_EQ(v.valid.at(x, y), inside) << x << "," << y;
      if (inside) {
        ASSERT_GT(v.depth_at(x, y), 0.0);
      } else {
        ASSERT_TRUE(std::isinf(v.depth_at(x, y)));
      }
    }
  }
}

TEST(Render, DoubleDistanceQuartersArea) {
  // Short focal length so both footprints fit inside the raster.
  CameraIntrinsics k;
  k.fx = k.fy = 200.0;
  const PlanarTarget target = poster();
  const auto near = render(target, k, look_at({0.0, 0.0, 0.6}, Eigen::Vector3d::Zero(), 0.0));
  const auto far = render(target, k, look_at({0.0, 0.0, 1.2}, Eigen::Vector3d::Zero(), 0.0));
  const double ratio = static_cast<double>(count_valid(far)) / static_cast<double>(count_valid(near));
  EXPECT_NEAR(ratio, 0.25, 0.25 * 0.01);
}

TEST(Render, LookingAwaySeesNothing) {
  const auto v = render(poster(), CameraIntrinsics{}, look_at({0.0, 0.0, 0.6}, {0.0, 0.0, 2.0}, 0.0));
  EXPECT_EQ(count_valid(v), 0u);
  EXPECT_EQ(v.valid_fraction(), 0.0);
  EXPECT_FLOAT_EQ(v.rgb.at(10, 10, 0), 0.5f);
}

TEST(Render, CameraInPlaneThrows) {
  Pose p = look_at({0.0, 0.0, 0.6}, {1.0, 0.0, 0.6}, 0.0);
  p.translation.z() = 0.0;
  EXPECT_THROW(render(poster(), CameraIntrinsics{}, p), CameraInPlane);
}

TEST(Render, DepthConsistency) {
  const CameraIntrinsics k;
  const Pose pose = look_at({0.12, -0.08, 0.55}, {0.03, 0.05, 0.0}, 0.7);
  const auto v = render(poster(), k, pose);
  ASSERT_GT(count_valid(v), 1000u);
  for (int y = 0; y < k.height; y += 7) {
    for (int x = 0; x < k.width; x += 7) {
      if (!v.valid.at(x, y)) continue;
      const double z = v.depth_at(x, y);
      const Eigen::Vector2d n = pixel_to_normalized(k, {x, y});
      const Eigen::Vector3d pc(n.x() * z, n.y() * z, z);
      const Projection pr = project(k, pc);
      ASSERT_LT((pr.pixel - Eigen::Vector2d(x, y)).norm(), 0.5);
      ASSERT_NEAR(pose.to_world(pc).z(), 0.0, 1e-9);
    }
  }
}

TEST(Render, Deterministic) {
  const Pose pose = look_at({0.1, 0.0, 0.5}, Eigen::Vector3d::Zero(), 0.2);
  const auto a = render(poster(), CameraIntrinsics{}, pose);
  const auto b = render(poster(), CameraIntrinsics{}, pose);
  EXPECT_TRUE(a.rgb == b.rgb);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.valid.data, b.valid.data);
}

TEST(Render, InvalidTargetRejected) {
  PlanarTarget t = poster();
  t.width_m = 0.0;
  EXPECT_THROW(render(t, CameraIntrinsics{}, Pose{}), std::invalid_argument);
}

TEST(DesiredPose, Defaults) {
  const Pose d = desired_pose(PoseSampleConfig{});
  EXPECT_TRUE(d.translation.isApprox(Eigen::Vector3d(0.0, 0.0, 0.6)));
  EXPECT_TRUE(d.rotation.col(2).isApprox(Eigen::Vector3d(0.0, 0.0, -1.0)));
  const PoseError e = pose_error(d, d);
  EXPECT_EQ(e.translation_m, 0.0);
  EXPECT_EQ(e.rotation_deg, 0.0);
  const auto v = render(poster(), CameraIntrinsics{}, d);
  EXPECT_GT(v.valid_fraction(), 0.5);
}

TEST(Sampler, Deterministic) {
  PoseSampleConfig cfg;
  cfg.seed = 42;
  const auto a = sample_initial_poses(cfg, 50);
  const auto b = sample_initial_poses(cfg, 50);
  ASSERT_EQ(a.size(), 50u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rotation, b[i].rotation);
    EXPECT_EQ(a[i].translation, b[i].translation);
  }
  cfg.seed = 43;
  EXPECT_NE(sample_initial_poses(cfg, 1)[0].translation, a[0].translation);
}

TEST(Sampler, PositionsInsideCuboidAndAimedAtCircles) {
  PoseSampleConfig cfg;
  cfg.seed = 3;
  for (const Pose& p : sample_initial_poses(cfg, 500)) {
    const Eigen::Vector3d off = p.translation - Eigen::Vector3d(0.0, 0.0, cfg.elevation);
    EXPECT_LE(std::abs(off.x()), 0.6 + 1e-12);
    EXPECT_LE(std::abs(off.y()), 0.6 + 1e-12);
    EXPECT_LE(std::abs(off.z()), 0.15 + 1e-12);
    // Optical axis meets the plane on one of the circles.
    const Eigen::Vector3d z = p.rotation.col(2);
    const double s = -p.translation.z() / z.z();
    const double r = (p.translation + s * z).head<2>().norm();
    double best = 1.0;
    for (double c : cfg.look_at_radii) best = std::min(best, std::abs(r - c));
    EXPECT_LT(best, 1e-9);
  }
}

TEST(Sampler, RollUniform) {
  PoseSampleConfig cfg;
  cfg.seed = 5;
  const auto poses = sample_initial_poses(cfg, 500);
  std::vector<double> rolls;
  for (const Pose& p : poses) {
    const Eigen::Vector3d z = p.rotation.col(2);
    const Pose base = look_at(p.translation, p.translation + z, 0.0);
    const Eigen::Matrix3d rz = base.rotation.transpose() * p.rotation;
    rolls.push_back(rad2deg(std::atan2(rz(1, 0), rz(0, 0))));
  }
  std::sort(rolls.begin(), rolls.end());
  EXPECT_GE(rolls.front(), -120.0 - 1e-9);
  EXPECT_LE(rolls.back(), 120.0 + 1e-9);
  double d = 0.0;
  const double n = static_cast<double>(rolls.size());
  for (size_t i = 0; i < rolls.size(); ++i) {
    const double f = (rolls[i] + 120.0) / 240.0;
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  EXPECT_GT(ks_pvalue(d, rolls.size()), 0.01) << "KS statistic " << d;
}

TEST(Sampler, Validation) {
  PoseSampleConfig cfg;
  cfg.cuboid.x() = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.look_at_radii.clear();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_THROW(sample_initial_poses(PoseSampleConfig{}, 0), std::invalid_argument);
}

TEST(ProceduralTexture, DeterministicAndAsymmetric) {
  const Image a = make_procedural_texture(9, 120, 160);
  const Image b = make_procedural_texture(9, 120, 160);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == make_procedural_texture(10, 120, 160));
  for (float v : a.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  // Half-turned copy differs substantially from the original.
  double diff = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) diff += std::abs(a.at(x, y, 0) - a.at(a.width - 1 - x, a.height - 1 - y, 0));
  EXPECT_GT(diff / (a.width * a.height), 0.02);
}

TEST(ProceduralTexture, SmoothingLowersGradients) {
  const Image sharp = make_procedural_texture(4, 120, 160, 0.0);
  const Image soft = make_procedural_texture(4, 120, 160, 4.0);
  auto energy = [](const Image& im) {
    double e = 0.0;
    for (int y = 0; y < im.height; ++y)
      for (int x = 1; x < im.width; ++x) e += std::abs(im.at(x, y, 1) - im.at(x - 1, y, 1));
    return e;
  };
  EXPECT_LT(energy(soft), energy(sharp));
  EXPECT_THROW(make_procedural_texture(1, 0, 10), std::invalid_argument);
  EXPECT_THROW(make_procedural_texture(1, 10, 10, -1.0), std::invalid_argument);
}
