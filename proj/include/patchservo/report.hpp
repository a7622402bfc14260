#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "patchservo/bench.hpp"

namespace patchservo {

/// Report in display units: end error in mm and degrees, APE in cm
/// and degrees.
nlohmann::json report_to_json(const BenchmarkReport& report, int ape_samples);

/// One row per trial, SI base units (metres, radians).
std::string trials_csv(const std::vector<TrialRecord>& records);

/// Per-iteration log of one trial, SI base units. Rotation as a rotation vector.
std::string trajectory_csv(const TrialRecord& record);

/// Top-down (x, y) path of the camera next to the straight-line reference.
std::string trajectory_svg(const TrialRecord& record);

/// Smoothed linear and angular speed over iterations.
std::string velocity_svg(const TrialRecord& record);

std::string sweep_csv(const std::vector<AlphaSweepRow>& rows);

struct MatchLine {
  PixelCoord desired;
  PixelCoord current;
};

/// Desired and current images side by side with a line per correspondence.
Image draw_matches(const Image& desired, const Image& current, const std::vector<MatchLine>& lines);

/// Correspondences with their cells, pixel centres and scores.
nlohmann::json correspondences_to_json(const CorrespondenceSet& set, const DescriptorGrid& desired,
                                       const DescriptorGrid& current, int desired_w, int desired_h, int current_w,
                                       int current_h);

void write_text(const std::string& path, const std::string& text);

struct OutputOptions {
  bool trajectories = true;
  bool plots = false;
};

/// Writes report.json, trials.csv and trajectories/ under `dir`.
void write_benchmark_outputs(const std::string& dir, const BenchmarkResult& result, int ape_samples,
                             const OutputOptions& options = {});

}  // namespace patchservo
