#include "patchservo/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

#include "patchservo/errors.hpp"

namespace patchservo {

void PerturbationConfig::validate() const {
  if (brightness < 0.0 || contrast < 0.0) throw std::invalid_argument("jitter strengths must be non-negative");
  if (erase_prob < 0.0 || erase_prob > 1.0) throw std::invalid_argument("erase_prob must lie in [0, 1]");
  if (!(0.0 < erase_scale_min && erase_scale_min <= erase_scale_max && erase_scale_max <= 1.0)) {
    throw std::invalid_argument("erase scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(0.0 < erase_ratio_min && erase_ratio_min <= erase_ratio_max)) {
    throw std::invalid_argument("erase ratio range must satisfy 0 < min <= max");
  }
  if (noise_sigma < 0.0 || blur_sigma_px < 0.0) throw std::invalid_argument("sigma must be non-negative");
}

Image perturb(const Image& image, const PerturbationConfig& cfg, std::mt19937_64& rng, PerturbationTrace* trace) {
  if (image.empty()) throw EmptyImage("perturb on an empty image");
  if (!cfg.enabled) return image;
  PerturbationTrace local;
  PerturbationTrace& t = trace ? *trace : local;
  Image out = image;

  std::uniform_real_distribution<double> bright(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  t.brightness_factor = bright(rng);
  for (float& v : out.data) v = std::clamp(static_cast<float>(v * t.brightness_factor), 0.0f, 1.0f);

  std::uniform_real_distribution<double> contr(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  t.contrast_factor = contr(rng);
  const Image gray = to_gray(out);
  double mean = 0.0;
  for (float v : gray.data) mean += v;
  mean /= static_cast<double>(gray.data.size());
  const double c = t.contrast_factor;
  for (float& v : out.data) v = std::clamp(static_cast<float>(c * v + (1.0 - c) * mean), 0.0f, 1.0f);

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < cfg.erase_prob) {
    const double area = static_cast<double>(out.width) * out.height;
    std::uniform_real_distribution<double> scale(cfg.erase_scale_min, cfg.erase_scale_max);
    std::uniform_real_distribution<double> log_ratio(std::log(cfg.erase_ratio_min), std::log(cfg.erase_ratio_max));
    for (int attempt = 0; attempt < 10 && !t.erased; ++attempt) {
      const double target_area = area * scale(rng);
      const double ratio = std::exp(log_ratio(rng));
      const int h = static_cast<int>(std::lround(std::sqrt(target_area * ratio)));
      const int w = static_cast<int>(std::lround(std::sqrt(target_area / ratio)));
      if (h < 1 || w < 1 || h > out.height || w > out.width) continue;
      std::uniform_int_distribution<int> px(0, out.width - w), py(0, out.height - h);
      t.erase_x = px(rng);
      t.erase_y = py(rng);
      t.erase_w = w;
      t.erase_h = h;
      t.erased = true;
    }
    if (t.erased) {
      for (int y = t.erase_y; y < t.erase_y + t.erase_h; ++y) {
        for (int x = t.erase_x; x < t.erase_x + t.erase_w; ++x) {
          for (int ch = 0; ch < out.channels; ++ch) out.at(x, y, ch) = static_cast<float>(u01(rng));
        }
      }
    }
  }

  if (cfg.spatial_blur) {
    if (cfg.blur_sigma_px > 0.0) {
      cv::Mat m(out.height, out.width, CV_32FC(out.channels), out.data.data());
      cv::GaussianBlur(m, m, cv::Size(0, 0), cfg.blur_sigma_px, cfg.blur_sigma_px, cv::BORDER_REFLECT);
    }
  } else if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (float& v : out.data) v = std::clamp(static_cast<float>(v + noise(rng)), 0.0f, 1.0f);
  }
  return out;
}

}  // namespace patchservo
