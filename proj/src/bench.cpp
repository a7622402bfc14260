#include "patchservo/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "patchservo/config.hpp"
#include "patchservo/errors.hpp"

namespace patchservo {
namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t stream_seed(uint64_t seed, uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

enum Stream : uint64_t { kControllerStream = 1, kPerturbStream = 2, kCompensationStream = 3 };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void BenchmarkConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (threads < 0) throw ConfigError("threads must be non-negative");
  if (ape_samples < 2) throw ConfigError("ape_samples must be at least 2");
  try {
    camera.validate();
    provider.validate();
    matcher.validate();
    controller.validate();
    perturbation.validate();
    sampler.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Scene build_scene(const BenchmarkConfig& cfg) {
  Scene scene;
  scene.target.texture = cfg.scene.texture_path.empty()
                             ? make_procedural_texture(cfg.scene.procedural_seed, cfg.scene.procedural_width_px,
                                                       cfg.scene.procedural_height_px, cfg.scene.procedural_smoothing_px)
                             : load_image(cfg.scene.texture_path);
  scene.target.width_m = cfg.scene.width_m;
  scene.target.height_m = cfg.scene.height_m;
  scene.render_options.background = cfg.scene.background;
  scene.intrinsics = cfg.camera;
  scene.desired = desired_pose(cfg.sampler);
  scene.desired_view = render(scene.target, scene.intrinsics, scene.desired, scene.render_options);
  return scene;
}

std::vector<Pose> executed_trajectory(const TrialRecord& record) {
  std::vector<Pose> out;
  out.reserve(record.log.size() + 1);
  out.push_back(record.start);
  for (const auto& entry : record.log) out.push_back(entry.pose);
  return out;
}

ConvergenceCheck convergence_at(const std::vector<IterationLog>& log, size_t index, const Pose& initial,
                                const Pose& desired, const ControllerConfig& controller) {
  ConvergenceCheck check;
  if (index >= log.size()) return check;
  const auto window = static_cast<size_t>(controller.settle_iterations);
  if (index + 1 >= window) {
    check.velocity_settled = true;
    for (size_t i = index + 1 - window; i <= index; ++i) {
      const IterationLog& e = log[i];
      if (e.match_failed || !(e.smoothed.linear.norm() < controller.linear_threshold) ||
          !(e.smoothed.angular.norm() < controller.angular_threshold)) {
        check.velocity_settled = false;
        break;
      }
    }
  }
  const PoseError start = pose_error(initial, desired);
  const PoseError now = pose_error(log[index].pose, desired);
  // The floor only absorbs rounding when an initial error is exactly zero.
  constexpr double kFloor = 1e-9;
  check.error_reduced = now.translation_m <= std::max(0.1 * start.translation_m, kFloor) &&
                        now.rotation_deg <= std::max(0.1 * start.rotation_deg, kFloor);
  return check;
}

uint64_t trial_seed(uint64_t benchmark_seed, int trial_id) {
  return stream_seed(benchmark_seed, 0x5eed0000ull + static_cast<uint64_t>(trial_id));
}

TrialRecord run_trial(const TrialContext& ctx, int trial_id, const Pose& initial, uint64_t seed) {
  if (!ctx.scene || !ctx.desired_grid || !ctx.extractor) throw std::invalid_argument("trial context is incomplete");
  const Scene& scene = *ctx.scene;
  TrialRecord rec;
  rec.trial_id = trial_id;
  rec.seed = seed;
  rec.initial = initial;
  rec.desired = scene.desired;
  rec.initial_error = pose_error(initial, scene.desired);

  std::mt19937_64 perturb_rng(stream_seed(seed, kPerturbStream));
  const std::mt19937_64 per_trial_perturbation = perturb_rng;
  auto observe = [&](const RenderedView& view) {
    if (!ctx.perturbation.enabled) return view.rgb;
    if (ctx.perturbation.per_iteration) return perturb(view.rgb, ctx.perturbation, perturb_rng);
    std::mt19937_64 replay = per_trial_perturbation;
    return perturb(view.rgb, ctx.perturbation, replay);
  };

  Pose pose = initial;
  if (ctx.controller.rotation_compensation) {
    const RenderedView view = render(scene.target, scene.intrinsics, pose, scene.render_options);
    try {
      const RotationCompensation rc = compensate_rotation(*ctx.desired_grid, observe(view), *ctx.extractor,
                                                          ctx.matcher, stream_seed(seed, kCompensationStream),
                                                          scene.render_options.background[0]);
      rec.compensation_deg = rc.best_deg;
      rec.compensation_scores = rc.scores;
      pose = roll_about_optical_axis(pose, deg2rad(rc.best_deg));
    } catch (const InsufficientMatches&) {
      rec.compensation_scores.fill(-std::numeric_limits<double>::infinity());
    }
  }
  rec.start = pose;

  ServoContext servo{ctx.desired_grid, ctx.extractor, scene.intrinsics, ctx.matcher, ctx.controller};
  ControllerState state(stream_seed(seed, kControllerStream));
  int failures = 0;
  ConvergenceCheck check;
  for (int it = 0; it < ctx.controller.max_iterations; ++it) {
    if (!(pose.translation.z() > 0.01) || !pose.translation.allFinite() || pose.translation.norm() > 10.0) {
      rec.failure = "camera left the workspace";
      break;
    }
    const RenderedView view = render(scene.target, scene.intrinsics, pose, scene.render_options);
    IterationLog entry;
    entry.iteration = it;
    try {
      const ServoStep step = servo_step(servo, observe(view), view, state);
      entry.raw = step.diagnostics.raw;
      entry.smoothed = step.twist;
      entry.error_norm = step.diagnostics.error_norm;
      entry.mean_cosine = step.diagnostics.mean_cosine;
      entry.k = step.diagnostics.k_used;
      pose = integrate_twist(pose, step.twist, ctx.controller.dt);
      failures = 0;
    } catch (const InsufficientMatches&) {
      entry.match_failed = true;
      ++failures;
    } catch (const InvalidDepth&) {
      entry.match_failed = true;
      ++failures;
    }
    entry.pose = pose;
    rec.log.push_back(entry);
    check = convergence_at(rec.log, rec.log.size() - 1, rec.initial, rec.desired, ctx.controller);
    if (check.converged()) break;
    if (failures > ctx.controller.max_match_failures) {
      rec.failure = "matching failed for " + std::to_string(failures) + " consecutive iterations";
      break;
    }
  }

  rec.iterations = static_cast<int>(rec.log.size());
  rec.final_pose = rec.log.empty() ? rec.start : rec.log.back().pose;
  rec.velocity_settled = check.velocity_settled;
  rec.error_reduced = check.error_reduced;
  rec.converged = check.converged();
  if (!rec.converged && rec.failure.empty()) rec.failure = "iteration budget exhausted";
  if (rec.converged) rec.failure.clear();
  rec.end_error = pose_error(rec.final_pose, rec.desired);

  const auto executed = executed_trajectory(rec);
  try {
    const ApeResult ape = compute_ape(executed, pbvs_reference(rec.start, rec.desired, ctx.ape_samples),
                                      ctx.ape_samples);
    rec.ape_trans_cm = ape.translation_cm;
    rec.ape_rot_deg = ape.rotation_deg;
  } catch (const DegenerateTrajectory&) {
    rec.ape_trans_cm = rec.ape_rot_deg = kNaN;
  }
  try {
    rec.length_ratio = compute_length_ratio(executed, rec.start, rec.desired);
  } catch (const DegenerateBaseline&) {
    rec.length_ratio = kNaN;
  }
  return rec;
}

std::vector<Pose> resample_by_arc_length(const std::vector<Pose>& traj, int samples) {
  if (traj.size() < 2) throw std::invalid_argument("trajectory needs at least two poses");
  if (samples < 2) throw std::invalid_argument("need at least two samples");
  std::vector<double> cum(traj.size(), 0.0);
  for (size_t i = 1; i < traj.size(); ++i) {
    cum[i] = cum[i - 1] + (traj[i].translation - traj[i - 1].translation).norm();
  }
  const double total = cum.back();
  if (!(total > 1e-12)) {
    for (size_t i = 0; i < cum.size(); ++i) cum[i] = static_cast<double>(i);
  }
  const double span = cum.back();

  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(samples));
  size_t seg = 0;
  for (int j = 0; j < samples; ++j) {
    const double s = span * static_cast<double>(j) / (samples - 1);
    while (seg + 2 < cum.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double frac = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 1.0;
    out.push_back(interpolate(traj[seg], traj[seg + 1], frac));
  }
  return out;
}

ApeResult compute_ape(const std::vector<Pose>& executed, const std::vector<Pose>& reference, int samples) {
  if (executed.size() < 2 || reference.size() < 2) throw std::invalid_argument("trajectories need >= 2 poses");
  auto length = [](const std::vector<Pose>& t) {
    double l = 0.0;
    for (size_t i = 1; i < t.size(); ++i) l += (t[i].translation - t[i - 1].translation).norm();
    return l;
  };
  if (!(length(executed) > 1e-12) && length(reference) > 1e-12) {
    throw DegenerateTrajectory("executed path has zero length but the reference does not");
  }
  const auto a = resample_by_arc_length(executed, samples);
  const auto b = resample_by_arc_length(reference, samples);
  ApeResult r;
  for (int i = 0; i < samples; ++i) {
    const PoseError e = pose_error(a[i], b[i]);
    r.translation_cm += e.translation_m * 100.0;
    r.rotation_deg += e.rotation_deg;
  }
  r.translation_cm /= samples;
  r.rotation_deg /= samples;
  return r;
}

double compute_length_ratio(const std::vector<Pose>& executed, const Pose& initial, const Pose& desired) {
  const double baseline = (initial.translation - desired.translation).norm();
  if (!(baseline > 1e-6)) throw DegenerateBaseline("initial and desired positions coincide");
  double len = 0.0;
  for (size_t i = 1; i < executed.size(); ++i) len += (executed[i].translation - executed[i - 1].translation).norm();
  return len / baseline;
}

Stat summarize(const std::vector<double>& values) {
  Stat s;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    s.mean += v;
    ++s.n;
  }
  if (s.n == 0) return {kNaN, kNaN, 0};
  s.mean /= static_cast<double>(s.n);
  double var = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) var += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(var / static_cast<double>(s.n));
  return s;
}

BenchmarkReport aggregate(const std::vector<TrialRecord>& records, uint64_t seed, const std::string& snapshot) {
  BenchmarkReport rep;
  rep.trials = records.size();
  rep.seed = seed;
  rep.config_snapshot = snapshot;
  std::vector<double> mm, deg, ape_cm, ape_deg, ratio;
  for (const auto& r : records) {
    if (!r.converged) continue;
    ++rep.converged;
    mm.push_back(r.end_error.translation_m * 1000.0);
    deg.push_back(r.end_error.rotation_deg);
    ape_cm.push_back(r.ape_trans_cm);
    ape_deg.push_back(r.ape_rot_deg);
    ratio.push_back(r.length_ratio);
  }
  rep.convergence_rate_pct =
      rep.trials ? 100.0 * static_cast<double>(rep.converged) / static_cast<double>(rep.trials) : 0.0;
  rep.end_error_mm = summarize(mm);
  rep.end_error_deg = summarize(deg);
  rep.ape_cm = summarize(ape_cm);
  rep.ape_deg = summarize(ape_deg);
  rep.length_ratio = summarize(ratio);
  return rep;
}

namespace {

struct PreparedBenchmark {
  Scene scene;
  Extractor extractor;
  DescriptorGrid desired_grid;
  std::vector<Pose> initial_poses;
};

PreparedBenchmark prepare(const BenchmarkConfig& cfg) {
  cfg.validate();
  Scene scene = build_scene(cfg);
  Extractor extractor(cfg.provider);
  DescriptorGrid desired_grid = extractor.describe(scene.desired_view.rgb, true);
  auto poses = sample_initial_poses(cfg.sampler, cfg.trials);
  return {std::move(scene), std::move(extractor), std::move(desired_grid), std::move(poses)};
}

TrialContext context_for(const BenchmarkConfig& cfg, const PreparedBenchmark& p) {
  return {&p.scene, &p.desired_grid, &p.extractor, cfg.matcher, cfg.controller, cfg.perturbation, cfg.ape_samples};
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const ProgressFn& progress) {
  const PreparedBenchmark prepared = prepare(cfg);
  const TrialContext ctx = context_for(cfg, prepared);

  BenchmarkResult result;
  result.records.resize(static_cast<size_t>(cfg.trials));
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, cfg.trials);

  std::atomic<int> next{0};
  std::mutex progress_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= cfg.trials) return;
      try {
        TrialRecord rec = run_trial(ctx, id, prepared.initial_poses[static_cast<size_t>(id)], trial_seed(cfg.seed, id));
        const std::lock_guard<std::mutex> lock(progress_mutex);
        if (progress) progress(rec);
        result.records[static_cast<size_t>(id)] = std::move(rec);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(progress_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(cfg.trials);
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  result.report = aggregate(result.records, cfg.seed, config_to_json(cfg).dump());
  return result;
}

TrialRecord run_single_trial(const BenchmarkConfig& cfg, int trial_id) {
  if (trial_id < 0 || trial_id >= cfg.trials) throw ConfigError("trial id out of range");
  const PreparedBenchmark prepared = prepare(cfg);
  return run_trial(context_for(cfg, prepared), trial_id, prepared.initial_poses[static_cast<size_t>(trial_id)],
                   trial_seed(cfg.seed, trial_id));
}

std::vector<AlphaSweepRow> alpha_sweep(const BenchmarkConfig& cfg, const std::vector<double>& alphas,
                                       const ProgressFn& progress) {
  std::vector<AlphaSweepRow> rows;
  for (double alpha : alphas) {
    BenchmarkConfig c = cfg;
    c.controller.alpha = alpha;
    rows.push_back({alpha, run_benchmark(c, progress).report});
  }
  return rows;
}

}  // namespace patchservo
