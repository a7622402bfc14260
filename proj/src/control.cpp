#include "patchservo/control.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "patchservo/errors.hpp"

namespace patchservo {

void ControllerConfig::validate() const {
  if (!(gain > 0.0)) throw std::invalid_argument("gain must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (linear_threshold < 0.0 || angular_threshold < 0.0) throw std::invalid_argument("thresholds must be >= 0");
  if (settle_iterations < 1) throw std::invalid_argument("settle_iterations must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (max_match_failures < 0) throw std::invalid_argument("max_match_failures must be >= 0");
}

Eigen::VectorXd feature_error(std::span<const FeatureObservation> obs) {
  Eigen::VectorXd e(2 * static_cast<Eigen::Index>(obs.size()));
  for (size_t i = 0; i < obs.size(); ++i) {
    e(2 * i) = obs[i].x - obs[i].desired_x;
    e(2 * i + 1) = obs[i].y - obs[i].desired_y;
  }
  return e;
}

Eigen::MatrixXd interaction_matrix(std::span<const FeatureObservation> obs) {
  Eigen::MatrixXd l(2 * static_cast<Eigen::Index>(obs.size()), 6);
  for (size_t i = 0; i < obs.size(); ++i) {
    const double x = obs[i].x, y = obs[i].y, z = obs[i].Z;
    if (!(z > 0.0) || !std::isfinite(z)) throw NonPositiveDepth("feature depth " + std::to_string(z));
    const double iz = 1.0 / z;
    l.row(2 * i) << -iz, 0.0, x * iz, x * y, -(1.0 + x * x), y;
    l.row(2 * i + 1) << 0.0, -iz, y * iz, 1.0 + y * y, -x * y, -x;
  }
  return l;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double relative_tolerance, int* rank) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = relative_tolerance * (s.size() > 0 ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) {
      inv(i) = 1.0 / s(i);
      ++r;
    }
  }
  if (rank) *rank = r;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

VelocityCommand velocity_command(const Eigen::VectorXd& e, const Eigen::MatrixXd& l, double gain) {
  if (l.rows() != e.size() || l.cols() != 6) throw DimensionMismatch("interaction matrix must be 2n x 6");
  if (!l.allFinite() || !e.allFinite()) throw std::invalid_argument("non-finite control input");
  VelocityCommand cmd;
  const Eigen::MatrixXd pinv = pseudo_inverse(l, 1e-8, &cmd.rank);
  cmd.rank_deficient = cmd.rank < 6;
  const Eigen::Matrix<double, 6, 1> v = -gain * (pinv * e);
  cmd.twist = Twist::from_vector(v);
  return cmd;
}

Twist ema_filter(const Twist& previous, const Twist& fresh, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (alpha == 1.0) return fresh;
  return {alpha * fresh.linear + (1.0 - alpha) * previous.linear,
          alpha * fresh.angular + (1.0 - alpha) * previous.angular};
}

RotationCompensation compensate_rotation(const DescriptorGrid& desired, const Image& current,
                                         const Extractor& extractor, const MatcherConfig& matcher, uint64_t seed,
                                         float fill) {
  if (current.empty()) throw EmptyImage("rotation compensation on an empty image");
  RotationCompensation out;
  double best = -std::numeric_limits<double>::infinity();
  const bool mask_current = extractor.config().mask_both;
  for (size_t i = 0; i < out.kCandidatesDeg.size(); ++i) {
    const int deg = out.kCandidatesDeg[i];
    const Image undone = rotate_quarter_turns(current, -deg / 90, fill);
    const DescriptorGrid grid = extractor.describe(undone, mask_current);
    double score = -std::numeric_limits<double>::infinity();
    try {
      const CorrespondenceSet set = match(desired, grid, matcher, seed);
      score = set.mean_cosine();
      out.matches[i] = set.size();
    } catch (const InsufficientMatches&) {
      out.matches[i] = 0;
    }
    out.scores[i] = score;
    if (score > best) {
      best = score;
      out.best_deg = deg;
    }
  }
  if (!std::isfinite(best)) throw InsufficientMatches("no rotation hypothesis produced matches");
  return out;
}

uint64_t ControllerState::next_selection_seed(bool resample) {
  if (!resample) {
    if (!fixed_selection_seed) fixed_selection_seed = rng();
    return *fixed_selection_seed;
  }
  return rng();
}

std::vector<FeatureObservation> observations_from_matches(const CorrespondenceSet& set, const DescriptorGrid& desired,
                                                          const DescriptorGrid& current, const RenderedView& view,
                                                          const CameraIntrinsics& k, size_t* dropped) {
  std::vector<FeatureObservation> obs;
  obs.reserve(set.size());
  size_t n_dropped = 0;
  for (const Correspondence& c : set.pairs) {
    const PixelCoord pd = grid_cell_to_pixel(desired, c.desired_cell, k.width, k.height);
    const PixelCoord pc = grid_cell_to_pixel(current, c.current_cell, k.width, k.height);
    const int ix = std::clamp(static_cast<int>(std::lround(pc.x)), 0, k.width - 1);
    const int iy = std::clamp(static_cast<int>(std::lround(pc.y)), 0, k.height - 1);
    const double z = view.depth_at(ix, iy);
    if (!view.valid.at(ix, iy) || !(z > 0.0) || !std::isfinite(z)) {
      ++n_dropped;
      continue;
    }
    const Eigen::Vector2d nd = pixel_to_normalized(k, {pd.x, pd.y});
    const Eigen::Vector2d nc = pixel_to_normalized(k, {pc.x, pc.y});
    obs.push_back({nc.x(), nc.y(), z, nd.x(), nd.y()});
  }
  if (dropped) *dropped = n_dropped;
  return obs;
}

ServoStep servo_step(const ServoContext& ctx, const Image& current_image, const RenderedView& view,
                     ControllerState& state) {
  if (!ctx.desired || !ctx.extractor) throw std::invalid_argument("servo context is incomplete");
  const DescriptorGrid current = ctx.extractor->describe(current_image, ctx.extractor->config().mask_both);
  const uint64_t seed = state.next_selection_seed(ctx.matcher.resample_each_iteration);
  const CorrespondenceSet set = match(*ctx.desired, current, ctx.matcher, seed);

  ServoStep step;
  ServoDiagnostics& diag = step.diagnostics;
  diag.eligible = set.eligible_count;
  diag.pairs = set.pairs;
  const auto obs = observations_from_matches(set, *ctx.desired, current, view, ctx.intrinsics,
                                             &diag.dropped_invalid_depth);
  if (obs.size() < kMinCorrespondences) {
    throw InvalidDepth(std::to_string(obs.size()) + " pairs with valid depth, need " +
                       std::to_string(kMinCorrespondences));
  }
  const Eigen::VectorXd e = feature_error(obs);
  const VelocityCommand cmd = velocity_command(e, interaction_matrix(obs), ctx.controller.gain);

  diag.raw = cmd.twist;
  diag.k_used = obs.size();
  diag.mean_cosine = set.mean_cosine();
  diag.error_norm = e.norm();
  diag.rank = cmd.rank;
  diag.rank_deficient = cmd.rank_deficient;

  state.smoothed = state.smoothed ? ema_filter(*state.smoothed, cmd.twist, ctx.controller.alpha) : cmd.twist;
  step.twist = *state.smoothed;
  return step;
}

std::vector<Pose> pbvs_reference(const Pose& initial, const Pose& desired, int steps) {
  if (steps < 2) throw std::invalid_argument("pbvs_reference needs at least 2 steps");
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) out.push_back(interpolate(initial, desired, static_cast<double>(i) / (steps - 1)));
  return out;
}

}  // namespace patchservo
