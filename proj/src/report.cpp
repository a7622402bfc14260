#include "patchservo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "patchservo/errors.hpp"

namespace patchservo {
namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json stat_json(const Stat& s) {
  auto val = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"mean", val(s.mean)}, {"std", val(s.std)}, {"n", s.n}};
}

}  // namespace

nlohmann::json report_to_json(const BenchmarkReport& r, int ape_samples) {
  nlohmann::json snapshot;
  try {
    snapshot = nlohmann::json::parse(r.config_snapshot);
  } catch (const nlohmann::json::exception&) {
    snapshot = r.config_snapshot;
  }
  return {
      {"trials", r.trials},
      {"converged", r.converged},
      {"convergence_rate_pct", r.convergence_rate_pct},
      {"end_error_mm", stat_json(r.end_error_mm)},
      {"end_error_deg", stat_json(r.end_error_deg)},
      {"ape_cm", stat_json(r.ape_cm)},
      {"ape_deg", stat_json(r.ape_deg)},
      {"length_ratio", stat_json(r.length_ratio)},
      {"ape_label", "APE (resampled, M=" + std::to_string(ape_samples) + ")"},
      {"statistics_over", "converged trials; population standard deviation"},
      {"seed", r.seed},
      {"config", snapshot},
  };
}

std::string trials_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << "trial_id,seed,converged,velocity_settled,error_reduced,iterations,compensation_deg,"
        "initial_error_m,initial_error_rad,end_error_m,end_error_rad,ape_trans_m,ape_rot_rad,"
        "length_ratio,failure\n";
  for (const auto& r : records) {
    os << r.trial_id << ',' << r.seed << ',' << int(r.converged) << ',' << int(r.velocity_settled) << ','
       << int(r.error_reduced) << ',' << r.iterations << ',' << r.compensation_deg << ','
       << num(r.initial_error.translation_m) << ',' << num(deg2rad(r.initial_error.rotation_deg)) << ','
       << num(r.end_error.translation_m) << ',' << num(deg2rad(r.end_error.rotation_deg)) << ','
       << num(r.ape_trans_cm / 100.0) << ',' << num(deg2rad(r.ape_rot_deg)) << ',' << num(r.length_ratio) << ','
       << '"' << r.failure << '"' << '\n';
  }
  return os.str();
}

std::string trajectory_csv(const TrialRecord& rec) {
  std::ostringstream os;
  os << "iteration,tx,ty,tz,rx,ry,rz,raw_vx,raw_vy,raw_vz,raw_wx,raw_wy,raw_wz,"
        "vx,vy,vz,wx,wy,wz,error_norm,mean_cosine,k,match_failed\n";
  auto pose_cols = [&](const Pose& p) {
    const Eigen::Vector3d r = so3_log(p.rotation);
    os << num(p.translation.x()) << ',' << num(p.translation.y()) << ',' << num(p.translation.z()) << ','
       << num(r.x()) << ',' << num(r.y()) << ',' << num(r.z());
  };
  auto twist_cols = [&](const Twist& t) {
    for (int i = 0; i < 3; ++i) os << ',' << num(t.linear(i));
    for (int i = 0; i < 3; ++i) os << ',' << num(t.angular(i));
  };
  os << "-1,";
  pose_cols(rec.start);
  twist_cols({});
  twist_cols({});
  os << ",0,0,0,0\n";
  for (const auto& e : rec.log) {
    os << e.iteration << ',';
    pose_cols(e.pose);
    twist_cols(e.raw);
    twist_cols(e.smoothed);
    os << ',' << num(e.error_norm) << ',' << num(e.mean_cosine) << ',' << e.k << ',' << int(e.match_failed) << '\n';
  }
  return os.str();
}

namespace {

std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* colour) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) os << x << ',' << y << ' ';
  os << "\"/>\n";
  return os.str();
}

struct Frame2d {
  double min_x, max_x, min_y, max_y;
  double sx(double x) const { return 40.0 + 520.0 * (x - min_x) / std::max(1e-12, max_x - min_x); }
  double sy(double y) const { return 380.0 - 340.0 * (y - min_y) / std::max(1e-12, max_y - min_y); }
};

Frame2d bounds(const std::vector<std::pair<double, double>>& pts) {
  Frame2d f{1e300, -1e300, 1e300, -1e300};
  for (const auto& [x, y] : pts) {
    f.min_x = std::min(f.min_x, x);
    f.max_x = std::max(f.max_x, x);
    f.min_y = std::min(f.min_y, y);
    f.max_y = std::max(f.max_y, y);
  }
  return f;
}

std::string svg_open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"420\">\n"
         "<rect width=\"600\" height=\"420\" fill=\"white\"/>\n<text x=\"40\" y=\"24\" font-size=\"14\">" +
         title + "</text>\n";
}

}  // namespace

std::string trajectory_svg(const TrialRecord& rec) {
  std::vector<std::pair<double, double>> path;
  for (const Pose& p : executed_trajectory(rec)) path.emplace_back(p.translation.x(), p.translation.y());
  std::vector<std::pair<double, double>> ref{{rec.start.translation.x(), rec.start.translation.y()},
                                             {rec.desired.translation.x(), rec.desired.translation.y()}};
  auto all = path;
  all.insert(all.end(), ref.begin(), ref.end());
  const Frame2d f = bounds(all);
  auto map = [&](std::vector<std::pair<double, double>> pts) {
    for (auto& [x, y] : pts) {
      x = f.sx(x);
      y = f.sy(y);
    }
    return pts;
  };
  return svg_open("trial " + std::to_string(rec.trial_id) + ": camera path (x, y)") + polyline(map(ref), "#999999") +
         polyline(map(path), "#1f77b4") + "</svg>\n";
}

std::string velocity_svg(const TrialRecord& rec) {
  std::vector<std::pair<double, double>> lin, ang;
  for (const auto& e : rec.log) {
    lin.emplace_back(e.iteration, e.smoothed.linear.norm());
    ang.emplace_back(e.iteration, e.smoothed.angular.norm());
  }
  if (lin.empty()) return svg_open("no iterations") + "</svg>\n";
  auto all = lin;
  all.insert(all.end(), ang.begin(), ang.end());
  Frame2d f = bounds(all);
  f.min_y = 0.0;
  auto map = [&](std::vector<std::pair<double, double>> pts) {
    for (auto& [x, y] : pts) {
      x = f.sx(x);
      y = f.sy(y);
    }
    return pts;
  };
  return svg_open("trial " + std::to_string(rec.trial_id) + ": |v| (blue, m/s) and |w| (red, rad/s)") +
         polyline(map(lin), "#1f77b4") + polyline(map(ang), "#d62728") + "</svg>\n";
}

std::string sweep_csv(const std::vector<AlphaSweepRow>& rows) {
  std::ostringstream os;
  os << "alpha,convergence_rate_pct,length_ratio_mean,length_ratio_std,end_error_mm_mean,end_error_mm_std,"
        "end_error_deg_mean,end_error_deg_std\n";
  for (const auto& r : rows) {
    os << num(r.alpha) << ',' << num(r.report.convergence_rate_pct) << ',' << num(r.report.length_ratio.mean) << ','
       << num(r.report.length_ratio.std) << ',' << num(r.report.end_error_mm.mean) << ','
       << num(r.report.end_error_mm.std) << ',' << num(r.report.end_error_deg.mean) << ','
       << num(r.report.end_error_deg.std) << '\n';
  }
  return os.str();
}

Image draw_matches(const Image& desired, const Image& current, const std::vector<MatchLine>& lines) {
  auto rgb = [](const Image& img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    for (size_t i = 0; i < img.data.size(); ++i) out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = img.data[i];
    return out;
  };
  const Image d = rgb(desired), c = rgb(current);
  Image canvas(d.width + c.width, std::max(d.height, c.height), 3, 0.0f);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      for (int ch = 0; ch < 3; ++ch) canvas.at(x, y, ch) = d.at(x, y, ch);
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x)
      for (int ch = 0; ch < 3; ++ch) canvas.at(d.width + x, y, ch) = c.at(x, y, ch);
  cv::Mat m(canvas.height, canvas.width, CV_32FC3, canvas.data.data());
  for (size_t i = 0; i < lines.size(); ++i) {
    // Spread hues so neighbouring lines stay distinguishable.
    const double h = static_cast<double>(i) / std::max<size_t>(1, lines.size());
    const cv::Scalar colour(0.5 + 0.5 * std::cos(6.2832 * h), 0.5 + 0.5 * std::cos(6.2832 * (h + 0.33)),
                            0.5 + 0.5 * std::cos(6.2832 * (h + 0.67)));
    const cv::Point p(static_cast<int>(std::lround(lines[i].desired.x)), static_cast<int>(std::lround(lines[i].desired.y)));
    const cv::Point q(d.width + static_cast<int>(std::lround(lines[i].current.x)),
                      static_cast<int>(std::lround(lines[i].current.y)));
    cv::line(m, p, q, colour, 1, cv::LINE_AA);
    cv::circle(m, p, 3, colour, 1, cv::LINE_AA);
    cv::circle(m, q, 3, colour, 1, cv::LINE_AA);
  }
  for (float& v : canvas.data) v = std::clamp(v, 0.0f, 1.0f);
  return canvas;
}

nlohmann::json correspondences_to_json(const CorrespondenceSet& set, const DescriptorGrid& desired,
                                       const DescriptorGrid& current, int dw, int dh, int cw, int ch) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : set.pairs) {
    const PixelCoord pd = grid_cell_to_pixel(desired, p.desired_cell, dw, dh);
    const PixelCoord pc = grid_cell_to_pixel(current, p.current_cell, cw, ch);
    pairs.push_back({{"desired_cell", {p.desired_cell.row, p.desired_cell.col}},
                     {"current_cell", {p.current_cell.row, p.current_cell.col}},
                     {"desired_pixel", {pd.x, pd.y}},
                     {"current_pixel", {pc.x, pc.y}},
                     {"cosine", p.cosine},
                     {"cyclical_distance", p.cyclical_distance}});
  }
  return {{"k", set.size()},
          {"eligible", set.eligible_count},
          {"used_fallback", set.used_fallback},
          {"seed", set.rng_seed},
          {"mean_cosine", set.mean_cosine()},
          {"grid", {desired.rows, desired.cols}},
          {"pairs", pairs}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

void write_benchmark_outputs(const std::string& dir, const BenchmarkResult& result, int ape_samples,
                             const OutputOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text((fs::path(dir) / "report.json").string(), report_to_json(result.report, ape_samples).dump(2) + "\n");
  write_text((fs::path(dir) / "trials.csv").string(), trials_csv(result.records));
  if (!options.trajectories && !options.plots) return;
  const fs::path traj_dir = fs::path(dir) / "trajectories";
  fs::create_directories(traj_dir);
  for (const auto& rec : result.records) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "trial_%04d", rec.trial_id);
    if (options.trajectories) write_text((traj_dir / (std::string(stem) + ".csv")).string(), trajectory_csv(rec));
    if (options.plots) {
      write_text((traj_dir / (std::string(stem) + "_path.svg")).string(), trajectory_svg(rec));
      write_text((traj_dir / (std::string(stem) + "_velocity.svg")).string(), velocity_svg(rec));
    }
  }
}

}  // namespace patchservo
