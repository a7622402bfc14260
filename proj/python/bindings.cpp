#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "patchservo/bench.hpp"
#include "patchservo/config.hpp"
#include "patchservo/errors.hpp"
#include "patchservo/report.hpp"

namespace py = pybind11;
using namespace patchservo;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image image_from_array(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("image must be HxW or HxWxC");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(w, h, c);
  std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(float));
  return img;
}

py::array_t<float> image_to_array(const Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels != 1) shape.push_back(img.channels);
  py::array_t<float> out(shape);
  std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(float));
  return out;
}

py::dict stat_dict(const Stat& s) { return py::dict(py::arg("mean") = s.mean, py::arg("std") = s.std, py::arg("n") = s.n); }

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict trial_dict(const TrialRecord& r) {
  py::list log;
  for (const auto& e : r.log) {
    log.append(py::dict(py::arg("iteration") = e.iteration, py::arg("pose") = e.pose,
                        py::arg("raw") = e.raw.as_vector(), py::arg("smoothed") = e.smoothed.as_vector(),
                        py::arg("error_norm") = e.error_norm, py::arg("mean_cosine") = e.mean_cosine,
                        py::arg("k") = e.k, py::arg("match_failed") = e.match_failed));
  }
  return py::dict(py::arg("trial_id") = r.trial_id, py::arg("seed") = r.seed, py::arg("initial") = r.initial,
                  py::arg("start") = r.start, py::arg("desired") = r.desired, py::arg("final") = r.final_pose,
                  py::arg("compensation_deg") = r.compensation_deg, py::arg("converged") = r.converged,
                  py::arg("velocity_settled") = r.velocity_settled, py::arg("error_reduced") = r.error_reduced,
                  py::arg("iterations") = r.iterations, py::arg("failure") = r.failure,
                  py::arg("initial_error") = r.initial_error, py::arg("end_error") = r.end_error,
                  py::arg("ape_trans_cm") = r.ape_trans_cm, py::arg("ape_rot_deg") = r.ape_rot_deg,
                  py::arg("length_ratio") = r.length_ratio, py::arg("log") = log,
                  py::arg("trajectory_csv") = trajectory_csv(r));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Visual-servoing simulation and benchmark engine";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
#define PS_EXC(Name) py::register_exception<Name>(m, #Name, base.ptr())
  PS_EXC(NonPositiveDepth);
  PS_EXC(DegenerateLookAt);
  PS_EXC(CameraInPlane);
  PS_EXC(EmptyImage);
  PS_EXC(BridgeUnavailable);
  PS_EXC(CellOutOfBounds);
  PS_EXC(NoEligibleCells);
  PS_EXC(DimensionMismatch);
  PS_EXC(InsufficientMatches);
  PS_EXC(InvalidDepth);
  PS_EXC(DegenerateTrajectory);
  PS_EXC(DegenerateBaseline);
  PS_EXC(ConfigError);
  PS_EXC(ImageIoError);
#undef PS_EXC

  // Geometry.
  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Matrix3d& r, const Eigen::Vector3d& t) { return Pose{r, t}; }), py::arg("rotation"),
           py::arg("translation"))
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("translation", &Pose::translation)
      .def("inverse", &Pose::inverse)
      .def("to_camera", &Pose::to_camera)
      .def("to_world", &Pose::to_world)
      .def(py::self * py::self)
      .def("__repr__", [](const Pose& p) {
        return "Pose(t=[" + std::to_string(p.translation.x()) + ", " + std::to_string(p.translation.y()) + ", " +
               std::to_string(p.translation.z()) + "])";
      });

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("validate", &CameraIntrinsics::validate);

  py::class_<PoseError>(m, "PoseError")
      .def_readonly("translation_m", &PoseError::translation_m)
      .def_readonly("rotation_deg", &PoseError::rotation_deg)
      .def("__iter__", [](const PoseError& e) { return py::iter(py::make_tuple(e.translation_m, e.rotation_deg)); });

  m.def("project", [](const CameraIntrinsics& k, const Eigen::Vector3d& p) {
    const Projection pr = project(k, p);
    return py::make_tuple(pr.pixel, pr.depth);
  });
  m.def("pixel_to_normalized", &pixel_to_normalized);
  m.def("so3_exp", &so3_exp);
  m.def("so3_log", &so3_log);
  m.def(
      "integrate_twist",
      [](const Pose& p, const Eigen::Matrix<double, 6, 1>& v, double dt) {
        return integrate_twist(p, Twist::from_vector(v), dt);
      },
      py::arg("pose"), py::arg("twist"), py::arg("dt"));
  m.def("look_at", &look_at, py::arg("eye"), py::arg("target"), py::arg("roll_rad") = 0.0);
  m.def("roll_about_optical_axis", &roll_about_optical_axis);
  m.def("pose_error", &pose_error, py::arg("current"), py::arg("desired"));
  m.def("interpolate", &interpolate);

  // Simulation.
  m.def("make_procedural_texture", [](uint64_t seed, int w, int h, double smoothing) {
    return image_to_array(make_procedural_texture(seed, w, h, smoothing));
  }, py::arg("seed"), py::arg("width_px") = 600, py::arg("height_px") = 800, py::arg("smoothing_px") = 0.0);
  m.def(
      "render",
      [](const FloatArray& texture, double width_m, double height_m, const CameraIntrinsics& k, const Pose& pose) {
        const PlanarTarget target{image_from_array(texture), width_m, height_m};
        const RenderedView v = render(target, k, pose);
        py::array_t<double> depth({v.rgb.height, v.rgb.width});
        std::memcpy(depth.mutable_data(), v.depth.data(), v.depth.size() * sizeof(double));
        return py::make_tuple(image_to_array(v.rgb), depth);
      },
      py::arg("texture"), py::arg("width_m"), py::arg("height_m"), py::arg("intrinsics"), py::arg("pose"),
      "Returns (rgb HxWx3, depth HxW with +inf off target).");
  m.def(
      "sample_initial_poses",
      [](const Eigen::Vector3d& cuboid, const std::vector<double>& radii, double roll_deg, double elevation,
         uint64_t seed, int n) {
        PoseSampleConfig c;
        c.cuboid = cuboid;
        c.look_at_radii = radii;
        c.roll_range_deg = roll_deg;
        c.elevation = elevation;
        c.seed = seed;
        return sample_initial_poses(c, n);
      },
      py::arg("cuboid"), py::arg("look_at_radii"), py::arg("roll_range_deg"), py::arg("elevation"), py::arg("seed"),
      py::arg("n"));
  m.def(
      "desired_pose",
      [](double elevation) {
        PoseSampleConfig c;
        c.elevation = elevation;
        return desired_pose(c);
      },
      py::arg("elevation") = 0.6);

  // Descriptors and matching.
  py::class_<DescriptorGrid>(m, "DescriptorGrid")
      .def_readonly("rows", &DescriptorGrid::rows)
      .def_readonly("cols", &DescriptorGrid::cols)
      .def_readonly("dim", &DescriptorGrid::dim)
      .def_readonly("input_resolution", &DescriptorGrid::input_resolution)
      .def("eligible_count", &DescriptorGrid::eligible_count)
      .def_property_readonly("descriptors",
                             [](const DescriptorGrid& g) {
                               py::array_t<float> a({g.rows, g.cols, g.dim});
                               std::memcpy(a.mutable_data(), g.data.data(), g.data.size() * sizeof(float));
                               return a;
                             })
      .def_property_readonly("eligible", [](const DescriptorGrid& g) {
        py::array_t<bool> a({g.rows, g.cols});
        for (size_t i = 0; i < g.eligible.size(); ++i) a.mutable_data()[i] = g.eligible[i] != 0;
        return a;
      });
  m.def(
      "grid_from_array",
      [](const FloatArray& a, int input_resolution) {
        if (a.ndim() != 3) throw std::invalid_argument("descriptors must be rows x cols x dim");
        DescriptorGrid g;
        g.rows = static_cast<int>(a.shape(0));
        g.cols = static_cast<int>(a.shape(1));
        g.dim = static_cast<int>(a.shape(2));
        g.input_resolution = input_resolution;
        g.data.assign(a.data(), a.data() + a.size());
        g.eligible.assign(g.cell_count(), 1);
        return g;
      },
      py::arg("descriptors"), py::arg("input_resolution") = 308);

  m.def(
      "extract",
      [](const FloatArray& image, int resolution, int binning) {
        ProviderConfig c;
        c.input_resolution = resolution;
        c.binning = binning;
        return Extractor(c).describe(image_from_array(image));
      },
      py::arg("image"), py::arg("input_resolution") = 308, py::arg("binning") = 1,
      "Photometric descriptor grid followed by feature binning.");
  m.def("bin_features", &bin_features);
  m.def(
      "grid_cell_to_pixel",
      [](const DescriptorGrid& g, int row, int col, int w, int h) {
        const PixelCoord p = grid_cell_to_pixel(g, {row, col}, w, h);
        return py::make_tuple(p.x, p.y);
      },
      py::arg("grid"), py::arg("row"), py::arg("col"), py::arg("camera_width"), py::arg("camera_height"));

  m.def("cyclical_distance_map", [](const DescriptorGrid& desired, const DescriptorGrid& current) {
    const CyclicalMap map = cyclical_distance_map(desired, current);
    py::array_t<double> d({map.rows, map.cols});
    for (size_t i = 0; i < map.cells.size(); ++i) {
      d.mutable_data()[i] = map.cells[i].valid ? map.cells[i].distance : std::numeric_limits<double>::quiet_NaN();
    }
    return d;
  }, "Round-trip distance per desired cell (NaN where the cell takes no part).");
  m.def(
      "match",
      [](const DescriptorGrid& desired, const DescriptorGrid& current, int k, double threshold, uint64_t seed) {
        MatcherConfig c;
        c.k = k;
        c.threshold = threshold;
        const CorrespondenceSet s = match(desired, current, c, seed);
        py::list pairs;
        for (const auto& p : s.pairs) {
          pairs.append(py::dict(py::arg("desired_cell") = py::make_tuple(p.desired_cell.row, p.desired_cell.col),
                                py::arg("current_cell") = py::make_tuple(p.current_cell.row, p.current_cell.col),
                                py::arg("cosine") = p.cosine, py::arg("cyclical_distance") = p.cyclical_distance));
        }
        return py::dict(py::arg("pairs") = pairs, py::arg("eligible") = s.eligible_count,
                        py::arg("used_fallback") = s.used_fallback, py::arg("mean_cosine") = s.mean_cosine());
      },
      py::arg("desired"), py::arg("current"), py::arg("k") = 24, py::arg("threshold") = 1.0, py::arg("seed") = 0);

  // Control.
  m.def(
      "interaction_matrix",
      [](const Eigen::MatrixXd& points) {
        // Rows of (x, y, Z).
        std::vector<FeatureObservation> obs;
        for (Eigen::Index i = 0; i < points.rows(); ++i) obs.push_back({points(i, 0), points(i, 1), points(i, 2), 0, 0});
        return interaction_matrix(obs);
      },
      py::arg("points"), "Stacked 2x6 blocks for rows of (x, y, Z).");
  m.def(
      "velocity_command",
      [](const Eigen::VectorXd& e, const Eigen::MatrixXd& l, double gain) {
        const VelocityCommand c = velocity_command(e, l, gain);
        return py::make_tuple(Eigen::Matrix<double, 6, 1>(c.twist.as_vector()), c.rank);
      },
      py::arg("error"), py::arg("interaction"), py::arg("gain"));
  m.def(
      "ema_filter",
      [](const Eigen::Matrix<double, 6, 1>& prev, const Eigen::Matrix<double, 6, 1>& fresh, double alpha) {
        return Eigen::Matrix<double, 6, 1>(
            ema_filter(Twist::from_vector(prev), Twist::from_vector(fresh), alpha).as_vector());
      },
      py::arg("previous"), py::arg("fresh"), py::arg("alpha"));
  m.def("pbvs_reference", &pbvs_reference, py::arg("initial"), py::arg("desired"), py::arg("steps"));

  // Metrics.
  m.def(
      "compute_ape",
      [](const std::vector<Pose>& executed, const std::vector<Pose>& reference, int samples) {
        const ApeResult r = compute_ape(executed, reference, samples);
        return py::make_tuple(r.translation_cm, r.rotation_deg);
      },
      py::arg("executed"), py::arg("reference"), py::arg("samples") = 100, "(translation cm, rotation deg)");
  m.def("compute_length_ratio", &compute_length_ratio, py::arg("executed"), py::arg("initial"), py::arg("desired"));

  // Benchmark.
  py::class_<BenchmarkConfig>(m, "BenchmarkConfig")
      .def_readwrite("seed", &BenchmarkConfig::seed)
      .def_readwrite("trials", &BenchmarkConfig::trials)
      .def_readwrite("threads", &BenchmarkConfig::threads)
      .def_readwrite("ape_samples", &BenchmarkConfig::ape_samples)
      .def_property(
          "alpha", [](const BenchmarkConfig& c) { return c.controller.alpha; },
          [](BenchmarkConfig& c, double a) { c.controller.alpha = a; })
      .def_property(
          "max_iterations", [](const BenchmarkConfig& c) { return c.controller.max_iterations; },
          [](BenchmarkConfig& c, int n) { c.controller.max_iterations = n; })
      .def_property(
          "rotation_compensation", [](const BenchmarkConfig& c) { return c.controller.rotation_compensation; },
          [](BenchmarkConfig& c, bool on) { c.controller.rotation_compensation = on; })
      .def_property(
          "perturbation_enabled", [](const BenchmarkConfig& c) { return c.perturbation.enabled; },
          [](BenchmarkConfig& c, bool on) { c.perturbation.enabled = on; })
      .def("validate", &BenchmarkConfig::validate)
      .def("to_dict", [](const BenchmarkConfig& c) { return json_to_py(config_to_json(c)); });

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("base_dir") = ".",
        py::arg("source_name") = "<config>");

  m.def(
      "run_benchmark",
      [](const BenchmarkConfig& cfg, const std::string& out_dir, bool trajectories, bool plots) {
        BenchmarkResult res;
        {
          py::gil_scoped_release release;
          res = run_benchmark(cfg);
          if (!out_dir.empty()) write_benchmark_outputs(out_dir, res, cfg.ape_samples, {trajectories, plots});
        }
        py::list trials;
        for (const auto& r : res.records) trials.append(trial_dict(r));
        return py::dict(py::arg("report") = json_to_py(report_to_json(res.report, cfg.ape_samples)),
                        py::arg("trials") = trials, py::arg("trials_csv") = trials_csv(res.records));
      },
      py::arg("config"), py::arg("out_dir") = "", py::arg("trajectories") = true, py::arg("plots") = false);
  m.def(
      "run_trial",
      [](const BenchmarkConfig& cfg, int trial_id) {
        TrialRecord r;
        {
          py::gil_scoped_release release;
          r = run_single_trial(cfg, trial_id);
        }
        return trial_dict(r);
      },
      py::arg("config"), py::arg("trial_id"));
  m.def(
      "alpha_sweep",
      [](const BenchmarkConfig& cfg, const std::vector<double>& alphas) {
        std::vector<AlphaSweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = alpha_sweep(cfg, alphas);
        }
        py::list out;
        for (const auto& r : rows) {
          out.append(py::dict(py::arg("alpha") = r.alpha,
                              py::arg("convergence_rate_pct") = r.report.convergence_rate_pct,
                              py::arg("length_ratio") = stat_dict(r.report.length_ratio),
                              py::arg("end_error_mm") = stat_dict(r.report.end_error_mm)));
        }
        return out;
      },
      py::arg("config"), py::arg("alphas"));
  m.def("trial_seed", &trial_seed);
}
