#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>

#include "patchservo/bench.hpp"
#include "patchservo/config.hpp"
#include "patchservo/errors.hpp"
#include "patchservo/report.hpp"

namespace fs = std::filesystem;
using namespace patchservo;

namespace {

struct Overrides {
  int trials = -1;
  int threads = -1;
  uint64_t seed = 0;
  bool has_seed = false;
  bool no_compensation = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--trials", o.trials, "Override the number of trials");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--seed", o.seed, "Override the benchmark seed")->each([&o](const std::string&) { o.has_seed = true; });
  cmd->add_flag("--no-compensation", o.no_compensation, "Disable rotation compensation");
}

BenchmarkConfig load(const std::string& path, const Overrides& o) {
  BenchmarkConfig cfg = load_config(path);
  if (o.trials >= 0) cfg.trials = o.trials;
  if (o.threads >= 0) cfg.threads = o.threads;
  if (o.has_seed) cfg.seed = cfg.sampler.seed = o.seed;
  if (o.no_compensation) cfg.controller.rotation_compensation = false;
  cfg.validate();
  return cfg;
}

ProgressFn progress_printer(int total, bool quiet) {
  if (quiet) return {};
  auto done = std::make_shared<int>(0);
  auto mu = std::make_shared<std::mutex>();
  return [=](const TrialRecord& r) {
    std::lock_guard<std::mutex> lock(*mu);
    ++*done;
    std::fprintf(stderr, "[%d/%d] trial %d %s after %d iterations%s%s\n", *done, total, r.trial_id,
                 r.converged ? "converged" : "did not converge", r.iterations, r.failure.empty() ? "" : ": ",
                 r.failure.c_str());
  };
}

void print_summary(const BenchmarkReport& r) {
  std::printf("converged %zu/%zu (%.1f%%)\n", r.converged, r.trials, r.convergence_rate_pct);
  std::printf("end error      %.3f +- %.3f mm, %.3f +- %.3f deg\n", r.end_error_mm.mean, r.end_error_mm.std,
              r.end_error_deg.mean, r.end_error_deg.std);
  std::printf("APE            %.3f +- %.3f cm, %.3f +- %.3f deg\n", r.ape_cm.mean, r.ape_cm.std, r.ape_deg.mean,
              r.ape_deg.std);
  std::printf("length ratio   %.3f +- %.3f\n", r.length_ratio.mean, r.length_ratio.std);
}

int cmd_run(const std::string& config, int trial, const std::string& out, const Overrides& o, bool plots) {
  const BenchmarkConfig cfg = load(config, o);
  const TrialRecord rec = run_single_trial(cfg, trial);
  for (const auto& e : rec.log) {
    if (e.iteration % 10 != 0 && &e != &rec.log.back()) continue;
    const PoseError err = pose_error(e.pose, rec.desired);
    std::printf("it %5d  |e| %.5f  k %2zu  cos %.3f  |v| %.2e  |w| %.2e  err %.2f mm %.3f deg%s\n", e.iteration,
                e.error_norm, e.k, e.mean_cosine, e.smoothed.linear.norm(), e.smoothed.angular.norm(),
                err.translation_m * 1e3, err.rotation_deg, e.match_failed ? "  (match failed)" : "");
  }
  std::printf("trial %d: %s after %d iterations, compensation %d deg\n", rec.trial_id,
              rec.converged ? "converged" : "did not converge", rec.iterations, rec.compensation_deg);
  std::printf("initial error %.2f mm %.3f deg, end error %.2f mm %.3f deg\n", rec.initial_error.translation_m * 1e3,
              rec.initial_error.rotation_deg, rec.end_error.translation_m * 1e3, rec.end_error.rotation_deg);
  std::printf("APE %.3f cm %.3f deg, length ratio %.3f\n", rec.ape_trans_cm, rec.ape_rot_deg, rec.length_ratio);
  if (!rec.failure.empty()) std::printf("failure: %s\n", rec.failure.c_str());
  if (!out.empty()) {
    fs::create_directories(out);
    char name[32];
    std::snprintf(name, sizeof name, "trial_%04d", rec.trial_id);
    write_text((fs::path(out) / (std::string(name) + ".csv")).string(), trajectory_csv(rec));
    if (plots) {
      write_text((fs::path(out) / (std::string(name) + "_path.svg")).string(), trajectory_svg(rec));
      write_text((fs::path(out) / (std::string(name) + "_velocity.svg")).string(), velocity_svg(rec));
    }
  }
  return rec.converged ? 0 : 3;
}

int cmd_bench(const std::string& config, const std::string& out, const Overrides& o, const OutputOptions& opts,
              bool quiet) {
  const BenchmarkConfig cfg = load(config, o);
  const BenchmarkResult res = run_benchmark(cfg, progress_printer(cfg.trials, quiet));
  write_benchmark_outputs(out, res, cfg.ape_samples, opts);
  print_summary(res.report);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_sweep(const std::string& config, const std::vector<double>& alphas, const std::string& out,
              const Overrides& o, bool quiet) {
  const BenchmarkConfig cfg = load(config, o);
  const auto rows = alpha_sweep(cfg, alphas, progress_printer(cfg.trials * static_cast<int>(alphas.size()), quiet));
  std::printf("%8s %10s %14s %14s\n", "alpha", "conv %", "length ratio", "end err mm");
  for (const auto& r : rows)
    std::printf("%8.3f %10.1f %7.3f+-%-6.3f %7.3f+-%-6.3f\n", r.alpha, r.report.convergence_rate_pct,
                r.report.length_ratio.mean, r.report.length_ratio.std, r.report.end_error_mm.mean,
                r.report.end_error_mm.std);
  if (!out.empty()) {
    fs::create_directories(out);
    write_text((fs::path(out) / "sweep.csv").string(), sweep_csv(rows));
  }
  return 0;
}

int cmd_match(const std::string& desired_path, const std::string& current_path, const std::string& config,
              const std::string& out, int k, uint64_t seed, int resolution, int binning) {
  ProviderConfig provider;
  MatcherConfig matcher;
  if (!config.empty()) {
    const BenchmarkConfig cfg = load_config(config);
    provider = cfg.provider;
    matcher = cfg.matcher;
  }
  if (k > 0) matcher.k = k;
  if (resolution > 0) provider.input_resolution = resolution;
  if (binning >= 0) provider.binning = binning;
  provider.validate();
  matcher.validate();

  const Image desired = load_image(desired_path);
  const Image current = load_image(current_path);
  const Extractor extractor(provider);
  const DescriptorGrid gd = extractor.describe(desired, true);
  const DescriptorGrid gc = extractor.describe(current, provider.mask_both);
  const CorrespondenceSet set = match(gd, gc, matcher, seed);

  std::vector<MatchLine> lines;
  for (const auto& p : set.pairs)
    lines.push_back({grid_cell_to_pixel(gd, p.desired_cell, desired.width, desired.height),
                     grid_cell_to_pixel(gc, p.current_cell, current.width, current.height)});
  const std::string png = out + ".png", json = out + ".json";
  save_image(png, draw_matches(desired, current, lines));
  write_text(json, correspondences_to_json(set, gd, gc, desired.width, desired.height, current.width,
                                           current.height)
                       .dump(2) +
                       "\n");
  std::printf("%zu correspondences (%zu eligible%s), mean cosine %.3f\nwrote %s and %s\n", set.size(),
              set.eligible_count, set.used_fallback ? ", fallback" : "", set.mean_cosine(), png.c_str(),
              json.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual servoing simulation and benchmark"};
  app.require_subcommand(1);

  Overrides run_o, bench_o, sweep_o;

  auto* run = app.add_subcommand("run", "Run one trial and print its iterations");
  std::string run_config, run_out;
  int trial = 0;
  bool run_plots = false;
  run->add_option("--config", run_config, "YAML configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--trial", trial, "Trial id")->required()->check(CLI::NonNegativeNumber);
  run->add_option("--out", run_out, "Directory for the trajectory CSV");
  run->add_flag("--plots", run_plots, "Also write SVG plots");
  add_overrides(run, run_o);

  auto* bench = app.add_subcommand("bench", "Run the full benchmark");
  std::string bench_config, bench_out;
  bool no_traj = false, bench_plots = false, quiet = false;
  bench->add_option("--config", bench_config, "YAML configuration")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_flag("--no-trajectories", no_traj, "Skip per-trial trajectory CSVs");
  bench->add_flag("--plots", bench_plots, "Write SVG plots per trial");
  bench->add_flag("-q,--quiet", quiet, "No per-trial progress");
  add_overrides(bench, bench_o);

  auto* sweep = app.add_subcommand("sweep-alpha", "Benchmark over several EMA coefficients");
  std::string sweep_config, sweep_out;
  std::vector<double> alphas;
  bool sweep_quiet = false;
  sweep->add_option("--config", sweep_config, "YAML configuration")->required()->check(CLI::ExistingFile);
  sweep->add_option("--alphas", alphas, "EMA coefficients, e.g. 0.5,0.7,0.9")
      ->required()
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--out", sweep_out, "Directory for sweep.csv");
  sweep->add_flag("-q,--quiet", sweep_quiet, "No per-trial progress");
  add_overrides(sweep, sweep_o);

  auto* mt = app.add_subcommand("match", "Match two images and draw the correspondences");
  std::string desired, current, match_config, match_out = "match";
  int k = 0, resolution = 0, binning = -1;
  uint64_t seed = 0;
  mt->add_option("--desired", desired, "Desired image")->required()->check(CLI::ExistingFile);
  mt->add_option("--current", current, "Current image")->required()->check(CLI::ExistingFile);
  mt->add_option("--config", match_config, "YAML configuration for provider and matcher")->check(CLI::ExistingFile);
  mt->add_option("--out", match_out, "Output prefix for .png and .json");
  mt->add_option("--k", k, "Number of correspondences");
  mt->add_option("--seed", seed, "Sampling seed");
  mt->add_option("--resolution", resolution, "Descriptor input resolution");
  mt->add_option("--binning", binning, "Feature binning levels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_config, trial, run_out, run_o, run_plots);
    if (*bench) return cmd_bench(bench_config, bench_out, bench_o, {!no_traj, bench_plots}, quiet);
    if (*sweep) return cmd_sweep(sweep_config, alphas, sweep_out, sweep_o, sweep_quiet);
    if (*mt) return cmd_match(desired, current, match_config, match_out, k, seed, resolution, binning);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
