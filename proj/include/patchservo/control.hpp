#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "patchservo/descriptors.hpp"
#include "patchservo/geometry.hpp"
#include "patchservo/matching.hpp"
#include "patchservo/simenv.hpp"

namespace patchservo {

/// One matched point: current normalised coordinates with depth, and the
/// normalised coordinates of its desired counterpart.
struct FeatureObservation {
  double x = 0.0;
  double y = 0.0;
  double Z = 1.0;
  double desired_x = 0.0;
  double desired_y = 0.0;
};

struct ControllerConfig {
  double gain = 0.5;   // lambda, 1/s
  double alpha = 0.8;  // EMA weight of the newest command
  double dt = 0.05;    // control period, s
  double linear_threshold = 1e-4;   // m/s
  double angular_threshold = 1e-3;  // rad/s
  int settle_iterations = 10;
  int max_iterations = 1500;
  bool rotation_compensation = true;
  /// Consecutive failed matching iterations tolerated before a trial aborts.
  int max_match_failures = 25;

  void validate() const;
};

/// Stacked (x - x*, y - y*) per observation.
Eigen::VectorXd feature_error(std::span<const FeatureObservation> observations);

/// Stacked 2x6 point-feature interaction matrices evaluated at the current
/// coordinates and depths.
Eigen::MatrixXd interaction_matrix(std::span<const FeatureObservation> observations);

struct VelocityCommand {
  Twist twist;
  int rank = 0;
  /// Fewer than six singular values survived truncation.
  bool rank_deficient = false;
};

/// -gain * pinv(L) * e, with singular values below 1e-8 * sigma_max dropped.
VelocityCommand velocity_command(const Eigen::VectorXd& error, const Eigen::MatrixXd& interaction, double gain);

/// Moore-Penrose pseudoinverse with relative singular-value cutoff.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double relative_tolerance, int* rank = nullptr);

Twist ema_filter(const Twist& previous, const Twist& fresh, double alpha);

struct RotationCompensation {
  static constexpr std::array<int, 4> kCandidatesDeg{0, 90, 180, -90};
  /// Angle by which the current image appears rotated relative to the
  /// desired one (image axes, +x toward +y). Rolling the camera about its
  /// optical axis by this angle undoes it.
  int best_deg = 0;
  std::array<double, 4> scores{};
  std::array<size_t, 4> matches{};
};

/// Scores each quarter-turn hypothesis by the mean cosine of the selected
/// correspondences after undoing it on the current image.
RotationCompensation compensate_rotation(const DescriptorGrid& desired, const Image& current,
                                         const Extractor& extractor, const MatcherConfig& matcher, uint64_t seed,
                                         float fill = 0.5f);

/// Everything servo_step needs that stays fixed over a trial.
struct ServoContext {
  const DescriptorGrid* desired = nullptr;
  const Extractor* extractor = nullptr;
  CameraIntrinsics intrinsics;
  MatcherConfig matcher;
  ControllerConfig controller;
};

struct ControllerState {
  std::optional<Twist> smoothed;
  std::mt19937_64 rng;
  /// Selection seed reused every iteration when resampling is disabled.
  std::optional<uint64_t> fixed_selection_seed;

  explicit ControllerState(uint64_t seed = 0) : rng(seed) {}
  uint64_t next_selection_seed(bool resample);
};

struct ServoDiagnostics {
  Twist raw;
  size_t k_used = 0;
  size_t eligible = 0;
  size_t dropped_invalid_depth = 0;
  double mean_cosine = 0.0;
  double error_norm = 0.0;
  int rank = 0;
  bool rank_deficient = false;
  std::vector<Correspondence> pairs;
};

struct ServoStep {
  Twist twist;
  ServoDiagnostics diagnostics;
};

/// Builds the feature observations for a correspondence set. Pairs whose
/// current pixel has no valid depth are dropped.
std::vector<FeatureObservation> observations_from_matches(const CorrespondenceSet& set, const DescriptorGrid& desired,
                                                          const DescriptorGrid& current, const RenderedView& view,
                                                          const CameraIntrinsics& intrinsics, size_t* dropped = nullptr);

/// One IBVS iteration on the current image (depth taken from `view`).
ServoStep servo_step(const ServoContext& ctx, const Image& current_image, const RenderedView& view,
                     ControllerState& state);

/// Straight-line translation and geodesic rotation from `initial` to `desired`.
std::vector<Pose> pbvs_reference(const Pose& initial, const Pose& desired, int steps);

}  // namespace patchservo
