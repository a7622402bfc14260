#include "patchservo/config.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "patchservo/errors.hpp"

namespace patchservo {
namespace {

namespace fs = std::filesystem;

class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "'" + path_ + "' must be a mapping");
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const YAML::Mark m = at.Mark();
    std::ostringstream os;
    os << source_;
    if (m.line >= 0) os << ":" << m.line + 1 << ":" << m.column + 1;
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, "invalid value for '" + qualified(key) + "'");
    }
  }

  void read_pair(const char* key, double& lo, double& hi) {
    std::vector<double> v{lo, hi};
    read(key, v);
    if (v.size() != 2) fail(node_[key], "'" + qualified(key) + "' must be a two-element list");
    lo = v[0];
    hi = v[1];
  }

  Section child(const char* key) {
    seen_.insert(key);
    YAML::Node n = node_ && node_.IsMap() ? node_[key] : YAML::Node();
    return Section(n, qualified(key), source_);
  }

  YAML::Node raw(const char* key) const { return node_ && node_.IsMap() ? node_[key] : YAML::Node(); }

  /// Rejects keys that no read() asked for.
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, "unknown key '" + qualified(key.c_str()) + "'");
    }
  }

 private:
  std::string qualified(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> seen_;
};

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

BenchmarkConfig parse_config(const std::string& text, const std::string& base_dir, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << source << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(os.str());
  }
  BenchmarkConfig cfg;
  Section top(root, "", source);
  top.read("seed", cfg.seed);
  top.read("trials", cfg.trials);
  top.read("threads", cfg.threads);
  top.read("ape_samples", cfg.ape_samples);

  {
    Section s = top.child("scene");
    s.read("texture", cfg.scene.texture_path);
    s.read("procedural_seed", cfg.scene.procedural_seed);
    s.read("procedural_width_px", cfg.scene.procedural_width_px);
    s.read("procedural_height_px", cfg.scene.procedural_height_px);
    s.read("procedural_smoothing_px", cfg.scene.procedural_smoothing_px);
    s.read("width_m", cfg.scene.width_m);
    s.read("height_m", cfg.scene.height_m);
    std::vector<float> bg(cfg.scene.background.begin(), cfg.scene.background.end());
    s.read("background", bg);
    if (bg.size() != 3) s.fail(s.raw("background"), "'scene.background' must hold three values");
    std::copy(bg.begin(), bg.end(), cfg.scene.background.begin());
    s.finish();
    cfg.scene.texture_path = resolve(base_dir, cfg.scene.texture_path);
  }
  {
    Section s = top.child("camera");
    s.read("fx", cfg.camera.fx);
    s.read("fy", cfg.camera.fy);
    s.read("cx", cfg.camera.cx);
    s.read("cy", cfg.camera.cy);
    s.read("width", cfg.camera.width);
    s.read("height", cfg.camera.height);
    s.finish();
  }
  {
    Section s = top.child("provider");
    std::string kind = "photometric";
    s.read("kind", kind);
    if (kind == "photometric") {
      cfg.provider.kind = ProviderKind::kPhotometric;
    } else if (kind == "bridge") {
      cfg.provider.kind = ProviderKind::kBridge;
    } else {
      s.fail(s.raw("kind"), "provider.kind must be 'photometric' or 'bridge'");
    }
    s.read("input_resolution", cfg.provider.input_resolution);
    s.read("binning", cfg.provider.binning);
    s.read("layer", cfg.provider.layer);
    s.read("mask", cfg.mask_path);
    s.read("mask_both", cfg.provider.mask_both);
    Section b = s.child("bridge");
    b.read("host", cfg.provider.bridge.host);
    b.read("port", cfg.provider.bridge.port);
    b.read("command", cfg.provider.bridge.command);
    b.finish();
    s.finish();
    cfg.mask_path = resolve(base_dir, cfg.mask_path);
  }
  {
    Section s = top.child("matcher");
    s.read("k", cfg.matcher.k);
    s.read("threshold", cfg.matcher.threshold);
    s.read("resample_each_iteration", cfg.matcher.resample_each_iteration);
    s.finish();
  }
  {
    Section s = top.child("controller");
    auto& c = cfg.controller;
    s.read("gain", c.gain);
    s.read("alpha", c.alpha);
    s.read("dt", c.dt);
    s.read("linear_threshold", c.linear_threshold);
    s.read("angular_threshold", c.angular_threshold);
    s.read("settle_iterations", c.settle_iterations);
    s.read("max_iterations", c.max_iterations);
    s.read("rotation_compensation", c.rotation_compensation);
    s.read("max_match_failures", c.max_match_failures);
    s.finish();
  }
  {
    Section s = top.child("perturbation");
    auto& p = cfg.perturbation;
    s.read("enabled", p.enabled);
    s.read("brightness", p.brightness);
    s.read("contrast", p.contrast);
    s.read("erase_prob", p.erase_prob);
    s.read_pair("erase_scale", p.erase_scale_min, p.erase_scale_max);
    s.read_pair("erase_ratio", p.erase_ratio_min, p.erase_ratio_max);
    s.read("noise_sigma", p.noise_sigma);
    s.read("spatial_blur", p.spatial_blur);
    s.read("blur_sigma_px", p.blur_sigma_px);
    s.read("per_iteration", p.per_iteration);
    s.finish();
  }
  {
    Section s = top.child("sampler");
    auto& p = cfg.sampler;
    std::vector<double> cuboid{p.cuboid.x(), p.cuboid.y(), p.cuboid.z()};
    s.read("cuboid", cuboid);
    if (cuboid.size() != 3) s.fail(s.raw("cuboid"), "'sampler.cuboid' must hold three extents");
    p.cuboid = Eigen::Vector3d(cuboid[0], cuboid[1], cuboid[2]);
    s.read("look_at_radii", p.look_at_radii);
    s.read("roll_range_deg", p.roll_range_deg);
    s.read("elevation", p.elevation);
    p.seed = cfg.seed;
    s.read("seed", p.seed);
    s.finish();
  }
  top.finish();

  if (!cfg.mask_path.empty()) cfg.provider.mask = load_mask(cfg.mask_path);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

BenchmarkConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const fs::path p(path);
  return parse_config(buf.str(), p.has_parent_path() ? p.parent_path().string() : ".", path);
}

nlohmann::json config_to_json(const BenchmarkConfig& cfg) {
  using nlohmann::json;
  const auto& c = cfg.controller;
  const auto& p = cfg.perturbation;
  json bridge = {{"host", cfg.provider.bridge.host},
                 {"port", cfg.provider.bridge.port},
                 {"command", cfg.provider.bridge.command}};
  return json{
      {"seed", cfg.seed},
      {"trials", cfg.trials},
      {"ape_samples", cfg.ape_samples},
      {"scene",
       {{"texture", cfg.scene.texture_path},
        {"procedural_seed", cfg.scene.procedural_seed},
        {"procedural_width_px", cfg.scene.procedural_width_px},
        {"procedural_height_px", cfg.scene.procedural_height_px},
        {"procedural_smoothing_px", cfg.scene.procedural_smoothing_px},
        {"width_m", cfg.scene.width_m},
        {"height_m", cfg.scene.height_m},
        {"background", cfg.scene.background}}},
      {"camera",
       {{"fx", cfg.camera.fx},
        {"fy", cfg.camera.fy},
        {"cx", cfg.camera.cx},
        {"cy", cfg.camera.cy},
        {"width", cfg.camera.width},
        {"height", cfg.camera.height}}},
      {"provider",
       {{"kind", cfg.provider.kind == ProviderKind::kPhotometric ? "photometric" : "bridge"},
        {"input_resolution", cfg.provider.input_resolution},
        {"binning", cfg.provider.binning},
        {"layer", cfg.provider.layer},
        {"mask", cfg.mask_path},
        {"mask_both", cfg.provider.mask_both},
        {"bridge", bridge}}},
      {"matcher",
       {{"k", cfg.matcher.k},
        {"threshold", cfg.matcher.threshold},
        {"resample_each_iteration", cfg.matcher.resample_each_iteration}}},
      {"controller",
       {{"gain", c.gain},
        {"alpha", c.alpha},
        {"dt", c.dt},
        {"linear_threshold", c.linear_threshold},
        {"angular_threshold", c.angular_threshold},
        {"settle_iterations", c.settle_iterations},
        {"max_iterations", c.max_iterations},
        {"rotation_compensation", c.rotation_compensation},
        {"max_match_failures", c.max_match_failures}}},
      {"perturbation",
       {{"enabled", p.enabled},
        {"brightness", p.brightness},
        {"contrast", p.contrast},
        {"erase_prob", p.erase_prob},
        {"erase_scale", {p.erase_scale_min, p.erase_scale_max}},
        {"erase_ratio", {p.erase_ratio_min, p.erase_ratio_max}},
        {"noise_sigma", p.noise_sigma},
        {"spatial_blur", p.spatial_blur},
        {"blur_sigma_px", p.blur_sigma_px},
        {"per_iteration", p.per_iteration}}},
      {"sampler",
       {{"cuboid", {cfg.sampler.cuboid.x(), cfg.sampler.cuboid.y(), cfg.sampler.cuboid.z()}},
        {"look_at_radii", cfg.sampler.look_at_radii},
        {"roll_range_deg", cfg.sampler.roll_range_deg},
        {"elevation", cfg.sampler.elevation},
        {"seed", cfg.sampler.seed}}},
  };
}

}  // namespace patchservo
