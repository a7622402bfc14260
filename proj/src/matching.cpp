#include "patchservo/matching.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "patchservo/errors.hpp"

namespace patchservo {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unit-normalised descriptors of the eligible cells, plus their cell indices.
RowMatrix normalized_eligible(const DescriptorGrid& grid, std::vector<int>& index) {
  index.clear();
  for (size_t i = 0; i < grid.cell_count(); ++i) {
    if (grid.eligible[i]) index.push_back(static_cast<int>(i));
  }
  RowMatrix m(static_cast<Eigen::Index>(index.size()), grid.dim);
  for (size_t k = 0; k < index.size(); ++k) {
    const float* src = grid.data.data() + static_cast<size_t>(index[k]) * grid.dim;
    double n2 = 0.0;
    for (int d = 0; d < grid.dim; ++d) n2 += static_cast<double>(src[d]) * src[d];
    const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (int d = 0; d < grid.dim; ++d) m(static_cast<Eigen::Index>(k), d) = static_cast<float>(src[d] * inv);
  }
  return m;
}

Cell cell_of(const DescriptorGrid& g, int flat) { return {flat / g.cols, flat % g.cols}; }

}  // namespace

NearestNeighbor nearest_neighbor(std::span<const float> query, const DescriptorGrid& grid) {
  if (static_cast<int>(query.size()) != grid.dim) throw DimensionMismatch("query and grid dimensions differ");
  double qn = 0.0;
  for (float v : query) qn += static_cast<double>(v) * v;
  qn = std::sqrt(qn);
  if (!(qn > 0.0)) throw std::invalid_argument("degenerate query descriptor");

  NearestNeighbor best;
  bool found = false;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (!grid.is_eligible(r, c)) continue;
      const auto d = grid.cell(r, c);
      double dot = 0.0, dn = 0.0;
      for (int i = 0; i < grid.dim; ++i) {
        dot += static_cast<double>(query[i]) * d[i];
        dn += static_cast<double>(d[i]) * d[i];
      }
      const double cosine = dn > 0.0 ? dot / (qn * std::sqrt(dn)) : 0.0;
      if (!found || cosine > best.cosine) {
        best = {{r, c}, cosine};
        found = true;
      }
    }
  }
  if (!found) throw NoEligibleCells("grid has no eligible cells");
  return best;
}

size_t CyclicalMap::valid_count() const {
  return static_cast<size_t>(std::count_if(cells.begin(), cells.end(), [](const CellMatch& m) { return m.valid; }));
}

CyclicalMap cyclical_distance_map(const DescriptorGrid& desired, const DescriptorGrid& current) {
  if (desired.dim != current.dim) throw DimensionMismatch("descriptor dimensions differ");
  CyclicalMap map;
  map.rows = desired.rows;
  map.cols = desired.cols;
  map.cells.assign(desired.cell_count(), CellMatch{});

  std::vector<int> d_index, c_index;
  const RowMatrix a = normalized_eligible(desired, d_index);
  const RowMatrix b = normalized_eligible(current, c_index);
  if (d_index.empty() || c_index.empty()) return map;

  const Eigen::MatrixXf sim = a * b.transpose();  // |desired| x |current|

  // Strict comparisons keep the first (row-major) maximum on ties.
  std::vector<Eigen::Index> back(static_cast<size_t>(sim.cols()));
  for (Eigen::Index j = 0; j < sim.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < sim.rows(); ++i) {
      if (sim(i, j) > sim(best, j)) best = i;
    }
    back[static_cast<size_t>(j)] = best;
  }
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    Eigen::Index fwd = 0;
    for (Eigen::Index j = 1; j < sim.cols(); ++j) {
      if (sim(i, j) > sim(i, fwd)) fwd = j;
    }
    const Cell u = cell_of(desired, d_index[static_cast<size_t>(i)]);
    const Cell v = cell_of(current, c_index[static_cast<size_t>(fwd)]);
    const Cell u_back = cell_of(desired, d_index[static_cast<size_t>(back[static_cast<size_t>(fwd)])]);
    CellMatch& m = map.cells[desired.index(u.row, u.col)];
    m.valid = true;
    m.forward = v;
    m.back = u_back;
    m.cosine = sim(i, fwd);
    m.distance = -std::hypot(static_cast<double>(u.row - u_back.row), static_cast<double>(u.col - u_back.col));
  }
  return map;
}

double CorrespondenceSet::mean_cosine() const {
  if (pairs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : pairs) s += p.cosine;
  return s / static_cast<double>(pairs.size());
}

void MatcherConfig::validate() const {
  if (k < 1) throw std::invalid_argument("K must be at least 1");
  if (!(threshold >= 0.0)) throw std::invalid_argument("threshold must be non-negative");
}

std::vector<Cell> eligible_cells(const CyclicalMap& map, double threshold) {
  std::vector<Cell> out;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const CellMatch& m = map.at(r, c);
      if (m.valid && -m.distance <= threshold) out.push_back({r, c});
    }
  }
  return out;
}

CorrespondenceSet select_correspondences(const CyclicalMap& map, int k, double threshold, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("K must be at least 1");
  const size_t valid = map.valid_count();
  if (valid < kMinCorrespondences) {
    throw InsufficientMatches(std::to_string(valid) + " matchable cells, need " +
                              std::to_string(kMinCorrespondences));
  }
  CorrespondenceSet out;
  out.rng_seed = seed;
  std::vector<Cell> chosen = eligible_cells(map, threshold);
  out.eligible_count = chosen.size();
  const auto want = static_cast<size_t>(k);

  if (chosen.size() >= want) {
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<size_t> pick(i, chosen.size() - 1);
      std::swap(chosen[i], chosen[pick(rng)]);
    }
    chosen.resize(want);
  } else {
    chosen.clear();
    for (int r = 0; r < map.rows; ++r) {
      for (int c = 0; c < map.cols; ++c) {
        if (map.at(r, c).valid) chosen.push_back({r, c});
      }
    }
    std::stable_sort(chosen.begin(), chosen.end(), [&](Cell a, Cell b) {
      return map.at(a.row, a.col).distance > map.at(b.row, b.col).distance;
    });
    chosen.resize(std::min(want, chosen.size()));
    out.used_fallback = true;
  }

  out.pairs.reserve(chosen.size());
  for (Cell u : chosen) {
    const CellMatch& m = map.at(u.row, u.col);
    out.pairs.push_back({u, m.forward, m.cosine, m.distance});
  }
  return out;
}

CorrespondenceSet match(const DescriptorGrid& desired, const DescriptorGrid& current, const MatcherConfig& cfg,
                        uint64_t seed) {
  return select_correspondences(cyclical_distance_map(desired, current), cfg.k, cfg.threshold, seed);
}

}  // namespace patchservo
