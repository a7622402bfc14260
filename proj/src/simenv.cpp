#include "patchservo/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

#include "patchservo/errors.hpp"

namespace patchservo {

void PlanarTarget::validate() const {
  if (!(width_m > 0.0) || !(height_m > 0.0)) throw std::invalid_argument("target extents must be positive");
  if (texture.empty()) throw EmptyImage("target texture is empty");
}

double RenderedView::valid_fraction() const {
  if (valid.empty()) return 0.0;
  const auto n = std::count(valid.data.begin(), valid.data.end(), uint8_t{1});
  return static_cast<double>(n) / static_cast<double>(valid.data.size());
}

namespace {

void sample_bilinear(const Image& tex, double u, double v, float* out) {
  u = std::clamp(u, 0.0, tex.width - 1.0);
  v = std::clamp(v, 0.0, tex.height - 1.0);
  const int x0 = static_cast<int>(u);
  const int y0 = static_cast<int>(v);
  const int x1 = std::min(x0 + 1, tex.width - 1);
  const int y1 = std::min(y0 + 1, tex.height - 1);
  const float fx = static_cast<float>(u - x0);
  const float fy = static_cast<float>(v - y0);
  for (int c = 0; c < 3; ++c) {
    const int tc = tex.channels == 1 ? 0 : c;
    const float top = tex.at(x0, y0, tc) + fx * (tex.at(x1, y0, tc) - tex.at(x0, y0, tc));
    const float bottom = tex.at(x0, y1, tc) + fx * (tex.at(x1, y1, tc) - tex.at(x0, y1, tc));
    out[c] = top + fy * (bottom - top);
  }
}

}  // namespace

RenderedView render(const PlanarTarget& target, const CameraIntrinsics& k, const Pose& pose,
                    const RenderOptions& options) {
  target.validate();
  k.validate();
  const Eigen::Vector3d& origin = pose.translation;
  if (std::abs(origin.z()) < 1e-12) throw CameraInPlane("camera centre lies in the target plane");

  RenderedView view;
  view.rgb = Image(k.width, k.height, 3);
  view.depth.assign(static_cast<size_t>(k.width) * k.height, std::numeric_limits<double>::infinity());
  view.valid = Mask{k.width, k.height, std::vector<uint8_t>(static_cast<size_t>(k.width) * k.height, 0)};

  const double half_w = 0.5 * target.width_m;
  const double half_h = 0.5 * target.height_m;
  const double tex_scale_u = target.texture.width / target.width_m;
  const double tex_scale_v = target.texture.height / target.height_m;
  const Eigen::Matrix3d& r = pose.rotation;

  for (int y = 0; y < k.height; ++y) {
    const double ny = (y - k.cy) / k.fy;
    for (int x = 0; x < k.width; ++x) {
      const size_t idx = static_cast<size_t>(y) * k.width + x;
      float* px = &view.rgb.data[idx * 3];
      const double nx = (x - k.cx) / k.fx;
      // Ray direction in the world frame with unit camera-frame z, so the
      // ray parameter at the hit equals the camera-frame depth.
      const Eigen::Vector3d dir = r.col(0) * nx + r.col(1) * ny + r.col(2);
      const double s = -origin.z() / dir.z();
      bool hit = std::isfinite(s) && s > 0.0;
      double hx = 0.0, hy = 0.0;
      if (hit) {
        hx = origin.x() + s * dir.x();
        hy = origin.y() + s * dir.y();
        hit = std::abs(hx) <= half_w && std::abs(hy) <= half_h;
      }
      if (!hit) {
        px[0] = options.background[0];
        px[1] = options.background[1];
        px[2] = options.background[2];
        continue;
      }
      sample_bilinear(target.texture, (hx + half_w) * tex_scale_u - 0.5, (half_h - hy) * tex_scale_v - 0.5, px);
      view.depth[idx] = s;
      view.valid.data[idx] = 1;
    }
  }
  return view;
}

void PoseSampleConfig::validate() const {
  if (!(cuboid.array() > 0.0).all()) throw std::invalid_argument("cuboid extents must be positive");
  if (look_at_radii.empty()) throw std::invalid_argument("at least one look-at radius is required");
  for (double r : look_at_radii) {
    if (r < 0.0) throw std::invalid_argument("look-at radii must be non-negative");
  }
  if (roll_range_deg < 0.0) throw std::invalid_argument("roll range must be non-negative");
  if (!(elevation > 0.0)) throw std::invalid_argument("elevation must be positive");
}

Pose desired_pose(const PoseSampleConfig& cfg) {
  return look_at(Eigen::Vector3d(0.0, 0.0, cfg.elevation), Eigen::Vector3d::Zero(), 0.0);
}

std::vector<Pose> sample_initial_poses(const PoseSampleConfig& cfg, int n) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("sample count must be at least 1");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::uniform_int_distribution<size_t> circle(0, cfg.look_at_radii.size() - 1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> roll(-cfg.roll_range_deg, cfg.roll_range_deg);

  const Eigen::Vector3d centre(0.0, 0.0, cfg.elevation);
  std::vector<Pose> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    // Draw order is fixed: position, circle, angle, roll.
    const double ox = unit(rng), oy = unit(rng), oz = unit(rng);
    const Eigen::Vector3d eye = centre + Eigen::Vector3d(ox, oy, oz).cwiseProduct(cfg.cuboid);
    const double radius = cfg.look_at_radii[circle(rng)];
    const double phi = angle(rng);
    const Eigen::Vector3d target(radius * std::cos(phi), radius * std::sin(phi), 0.0);
    poses.push_back(look_at(eye, target, deg2rad(roll(rng))));
  }
  return poses;
}

Image make_procedural_texture(uint64_t seed, int width_px, int height_px, double smoothing_px) {
  if (width_px < 1 || height_px < 1) throw std::invalid_argument("texture size must be positive");
  if (smoothing_px < 0.0) throw std::invalid_argument("smoothing_px must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Image tex(width_px, height_px, 3);

  // Smooth background: a few random plane waves per channel.
  struct Wave { double kx, ky, phase, amp; };
  std::array<std::vector<Wave>, 3> waves;
  for (auto& ch : waves) {
    for (int i = 0; i < 5; ++i) {
      const double period = 80.0 + 400.0 * u01(rng);
      const double dir = 2.0 * kPi * u01(rng);
      ch.push_back({std::cos(dir) * 2.0 * kPi / period, std::sin(dir) * 2.0 * kPi / period,
                    2.0 * kPi * u01(rng), 0.06 + 0.06 * u01(rng)});
    }
  }
  for (int y = 0; y < height_px; ++y) {
    for (int x = 0; x < width_px; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = 0.5;
        for (const Wave& w : waves[c]) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
        tex.at(x, y, c) = static_cast<float>(v);
      }
    }
  }

  const double scale = std::sqrt(static_cast<double>(width_px) * height_px) / 692.8;
  auto blend = [&](int x, int y, const std::array<double, 3>& col, double a) {
    for (int c = 0; c < 3; ++c) {
      float& t = tex.at(x, y, c);
      t = static_cast<float>((1.0 - a) * t + a * col[c]);
    }
  };
  auto random_colour = [&] {
    return std::array<double, 3>{u01(rng), u01(rng), u01(rng)};
  };

  // Soft-edged ellipses over a range of sizes.
  const int n_blobs = static_cast<int>(420 * scale * scale);
  for (int i = 0; i < n_blobs; ++i) {
    const double cx = u01(rng) * width_px;
    const double cy = u01(rng) * height_px;
    const double ra = scale * (6.0 + 40.0 * std::pow(u01(rng), 2.0));
    const double rb = ra * (0.35 + 0.65 * u01(rng));
    const double th = kPi * u01(rng);
    const auto col = random_colour();
    const double ct = std::cos(th), st = std::sin(th);
    const int x0 = std::max(0, static_cast<int>(cx - ra - 2)), x1 = std::min(width_px - 1, static_cast<int>(cx + ra + 2));
    const int y0 = std::max(0, static_cast<int>(cy - ra - 2)), y1 = std::min(height_px - 1, static_cast<int>(cy + ra + 2));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double a = (ct * dx + st * dy) / ra;
        const double b = (-st * dx + ct * dy) / rb;
        const double d = std::sqrt(a * a + b * b);
        const double alpha = std::clamp((1.0 - d) * ra / 1.5, 0.0, 1.0);
        if (alpha > 0.0) blend(x, y, col, 0.85 * alpha);
      }
    }
  }

  // Bars and rings break any remaining symmetry.
  const int n_bars = static_cast<int>(60 * scale * scale);
  for (int i = 0; i < n_bars; ++i) {
    const double cx = u01(rng) * width_px, cy = u01(rng) * height_px;
    const double len = scale * (20.0 + 60.0 * u01(rng)), thick = scale * (2.0 + 5.0 * u01(rng));
    const double th = kPi * u01(rng);
    const auto col = random_colour();
    const double ct = std::cos(th), st = std::sin(th);
    const int r = static_cast<int>(len) + 2;
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(height_px - 1, static_cast<int>(cy) + r); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(width_px - 1, static_cast<int>(cx) + r); ++x) {
        const double dx = x - cx, dy = y - cy;
        const double along = std::abs(ct * dx + st * dy), across = std::abs(-st * dx + ct * dy);
        if (along <= len && across <= thick) blend(x, y, col, 0.9);
      }
    }
  }
  const int n_rings = static_cast<int>(30 * scale * scale);
  for (int i = 0; i < n_rings; ++i) {
    const double cx = u01(rng) * width_px, cy = u01(rng) * height_px;
    const double radius = scale * (10.0 + 30.0 * u01(rng)), thick = scale * (2.0 + 3.0 * u01(rng));
    const auto col = random_colour();
    const int r = static_cast<int>(radius + thick) + 2;
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(height_px - 1, static_cast<int>(cy) + r); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(width_px - 1, static_cast<int>(cx) + r); ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (std::abs(d - radius) <= thick) blend(x, y, col, 0.9);
      }
    }
  }

  if (smoothing_px > 0.0) {
    cv::Mat m(tex.height, tex.width, CV_32FC3, tex.data.data());
    cv::GaussianBlur(m, m, cv::Size(), smoothing_px, smoothing_px, cv::BORDER_REFLECT);
  }
  for (float& v : tex.data) v = std::clamp(v, 0.0f, 1.0f);
  return tex;
}

}  // namespace patchservo
