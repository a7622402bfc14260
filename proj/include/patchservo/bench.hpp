#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "patchservo/control.hpp"
#include "patchservo/descriptors.hpp"
#include "patchservo/geometry.hpp"
#include "patchservo/matching.hpp"
#include "patchservo/perturb.hpp"
#include "patchservo/simenv.hpp"

namespace patchservo {

struct SceneConfig {
  /// PNG/JPEG poster; empty selects the procedural texture.
  std::string texture_path;
  uint64_t procedural_seed = 1;
  int procedural_width_px = 600;
  int procedural_height_px = 800;
  /// Gaussian low-pass of the procedural poster, in texture pixels.
  double procedural_smoothing_px = 0.0;
  double width_m = 0.6;
  double height_m = 0.8;
  std::array<float, 3> background{0.5f, 0.5f, 0.5f};
};

struct BenchmarkConfig {
  uint64_t seed = 0;
  int trials = 500;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 0;
  SceneConfig scene;
  CameraIntrinsics camera;
  ProviderConfig provider;
  std::string mask_path;
  MatcherConfig matcher;
  ControllerConfig controller;
  PerturbationConfig perturbation;
  PoseSampleConfig sampler;
  int ape_samples = 100;

  void validate() const;
};

/// Static world shared read-only by all trials of a benchmark.
struct Scene {
  PlanarTarget target;
  RenderOptions render_options;
  CameraIntrinsics intrinsics;
  Pose desired;
  RenderedView desired_view;
};

Scene build_scene(const BenchmarkConfig& cfg);

struct IterationLog {
  int iteration = 0;
  /// Pose after applying this iteration's smoothed command.
  Pose pose;
  Twist raw;
  Twist smoothed;
  double error_norm = 0.0;
  double mean_cosine = 0.0;
  size_t k = 0;
  bool match_failed = false;
};

struct TrialRecord {
  int trial_id = 0;
  uint64_t seed = 0;
  Pose initial;
  /// Pose after rotation compensation, where the servo loop starts.
  Pose start;
  Pose desired;
  Pose final_pose;
  int compensation_deg = 0;
  std::array<double, 4> compensation_scores{};
  std::vector<IterationLog> log;
  bool converged = false;
  bool velocity_settled = false;
  bool error_reduced = false;
  int iterations = 0;
  std::string failure;
  PoseError initial_error{0.0, 0.0};
  PoseError end_error{0.0, 0.0};
  double ape_trans_cm = 0.0;
  double ape_rot_deg = 0.0;
  double length_ratio = 0.0;
};

/// Executed trajectory: the loop start followed by every logged pose.
std::vector<Pose> executed_trajectory(const TrialRecord& record);

struct ConvergenceCheck {
  bool velocity_settled = false;
  bool error_reduced = false;
  bool converged() const { return velocity_settled && error_reduced; }
};

/// Convergence state after log entry `index`, computed from the log alone:
/// the last `settle_iterations` smoothed commands (none a matching failure)
/// are below both velocity thresholds, and the pose at `index` has at most
/// 10% of the initial translation and rotation errors (or within 1e-9 m / 1e-9
/// degrees of the goal, for components that start at zero).
ConvergenceCheck convergence_at(const std::vector<IterationLog>& log, size_t index, const Pose& initial,
                                const Pose& desired, const ControllerConfig& controller);

struct TrialContext {
  const Scene* scene = nullptr;
  const DescriptorGrid* desired_grid = nullptr;
  const Extractor* extractor = nullptr;
  MatcherConfig matcher;
  ControllerConfig controller;
  PerturbationConfig perturbation;
  int ape_samples = 100;
};

/// Per-trial seed derived from the benchmark seed and the trial id.
uint64_t trial_seed(uint64_t benchmark_seed, int trial_id);

TrialRecord run_trial(const TrialContext& ctx, int trial_id, const Pose& initial, uint64_t seed);

struct ApeResult {
  double translation_cm = 0.0;
  double rotation_deg = 0.0;
};

/// Poses at `samples` evenly spaced fractions of translational arc length.
/// A path with no translation is parameterised by pose index instead.
std::vector<Pose> resample_by_arc_length(const std::vector<Pose>& trajectory, int samples);

/// Mean translation and geodesic rotation discrepancy between the executed
/// path and the reference after both are resampled by arc length.
ApeResult compute_ape(const std::vector<Pose>& executed, const std::vector<Pose>& reference, int samples = 100);

/// Executed translational path length over the straight-line distance.
double compute_length_ratio(const std::vector<Pose>& executed, const Pose& initial, const Pose& desired);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  size_t n = 0;
};

Stat summarize(const std::vector<double>& values);

struct BenchmarkReport {
  size_t trials = 0;
  size_t converged = 0;
  double convergence_rate_pct = 0.0;
  Stat end_error_mm;
  Stat end_error_deg;
  Stat ape_cm;
  Stat ape_deg;
  Stat length_ratio;
  uint64_t seed = 0;
  std::string config_snapshot;  // JSON text
};

BenchmarkReport aggregate(const std::vector<TrialRecord>& records, uint64_t seed, const std::string& config_snapshot);

struct BenchmarkResult {
  BenchmarkReport report;
  std::vector<TrialRecord> records;
};

using ProgressFn = std::function<void(const TrialRecord&)>;

/// Samples the initial poses and runs every trial. Results are ordered by
/// trial id and do not depend on the thread count.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const ProgressFn& progress = {});

/// Single trial of a benchmark configuration (same poses and seeds as the
/// full run).
TrialRecord run_single_trial(const BenchmarkConfig& cfg, int trial_id);

struct AlphaSweepRow {
  double alpha = 0.0;
  BenchmarkReport report;
};

std::vector<AlphaSweepRow> alpha_sweep(const BenchmarkConfig& cfg, const std::vector<double>& alphas,
                                       const ProgressFn& progress = {});

}  // namespace patchservo
