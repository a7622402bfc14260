#pragma once

#include <cstdint>
#include <random>

#include "patchservo/image.hpp"

namespace patchservo {

/// Robustness perturbations applied to the current camera image: colour
/// jitter, random erasing, then additive Gaussian noise.
struct PerturbationConfig {
  bool enabled = false;
  double brightness = 0.6;
  double contrast = 0.4;
  double erase_prob = 0.5;
  double erase_scale_min = 0.02;
  double erase_scale_max = 0.33;
  double erase_ratio_min = 0.3;
  double erase_ratio_max = 3.3;
  /// Standard deviation of the additive noise, as a fraction of full range.
  double noise_sigma = 0.05;
  /// Replace the additive noise with a spatial Gaussian blur of this many
  /// pixels standard deviation.
  bool spatial_blur = false;
  double blur_sigma_px = 1.0;
  /// Fresh draw every control iteration; otherwise one draw per trial.
  bool per_iteration = true;
  uint64_t seed = 0;

  void validate() const;
};

struct PerturbationTrace {
  double brightness_factor = 1.0;
  double contrast_factor = 1.0;
  bool erased = false;
  int erase_x = 0, erase_y = 0, erase_w = 0, erase_h = 0;
};

Image perturb(const Image& image, const PerturbationConfig& cfg, std::mt19937_64& rng,
              PerturbationTrace* trace = nullptr);

}  // namespace patchservo
