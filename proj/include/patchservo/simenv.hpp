#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "patchservo/geometry.hpp"
#include "patchservo/image.hpp"

namespace patchservo {

/// Textured rectangle in the z=0 plane of the world frame, centred at the
/// origin. `width_m` runs along world X, `height_m` along world Y, and the
/// texture's first row sits at +Y.
struct PlanarTarget {
  Image texture;
  double width_m = 0.6;
  double height_m = 0.8;

  void validate() const;
};

struct RenderedView {
  Image rgb;
  /// Camera-frame z of the hit point; +inf where the ray misses the target.
  std::vector<double> depth;
  Mask valid;

  double depth_at(int x, int y) const { return depth[static_cast<size_t>(y) * rgb.width + x]; }
  double valid_fraction() const;
};

struct RenderOptions {
  std::array<float, 3> background{0.5f, 0.5f, 0.5f};
};

RenderedView render(const PlanarTarget& target, const CameraIntrinsics& intrinsics, const Pose& pose,
                    const RenderOptions& options = {});

/// Initial-pose distribution: positions uniform in a cuboid centred on the
/// desired position, optical axis aimed at a point on one of several circles
/// around the target centre, then rolled uniformly about the optical axis.
struct PoseSampleConfig {
  Eigen::Vector3d cuboid{1.2, 1.2, 0.3};
  std::vector<double> look_at_radii{0.08, 0.16, 0.24, 0.32};
  double roll_range_deg = 120.0;
  double elevation = 0.6;
  uint64_t seed = 0;

  void validate() const;
};

Pose desired_pose(const PoseSampleConfig& cfg);

std::vector<Pose> sample_initial_poses(const PoseSampleConfig& cfg, int n);

/// Seeded synthetic poster: layered colour blobs, bars and rings over a
/// smooth multi-scale background, with no rotational symmetry. A positive
/// `smoothing_px` low-passes the result with a Gaussian of that sigma.
Image make_procedural_texture(uint64_t seed, int width_px = 600, int height_px = 800, double smoothing_px = 0.0);

}  // namespace patchservo
