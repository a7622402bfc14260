#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchservo/descriptors.hpp"

namespace patchservo {

struct NearestNeighbor {
  Cell cell;
  double cosine = 0.0;
};

/// Eligible cell of `grid` with the highest cosine similarity to `query`;
/// ties go to the first cell in row-major order.
NearestNeighbor nearest_neighbor(std::span<const float> query, const DescriptorGrid& grid);

/// Forward-backward nearest-neighbour result for one desired cell.
struct CellMatch {
  bool valid = false;
  Cell forward;           // nearest current cell v
  Cell back;              // nearest desired cell u' of v
  double cosine = 0.0;    // similarity of u and v
  double distance = 0.0;  // -||u - u'|| in cell units
};

struct CyclicalMap {
  int rows = 0;
  int cols = 0;
  std::vector<CellMatch> cells;

  const CellMatch& at(int row, int col) const { return cells[static_cast<size_t>(row) * cols + col]; }
  size_t valid_count() const;
};

CyclicalMap cyclical_distance_map(const DescriptorGrid& desired, const DescriptorGrid& current);

struct Correspondence {
  Cell desired_cell;
  Cell current_cell;
  double cosine = 0.0;
  double cyclical_distance = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  uint64_t rng_seed = 0;
  /// Cells passing the round-trip threshold before sampling.
  size_t eligible_count = 0;
  /// True when fewer than K cells passed and the best-by-distance cells were used.
  bool used_fallback = false;

  size_t size() const { return pairs.size(); }
  double mean_cosine() const;
};

struct MatcherConfig {
  int k = 24;
  /// Largest accepted round-trip displacement, in cells.
  double threshold = 1.0;
  /// Draw a fresh subset every control iteration rather than once per trial.
  bool resample_each_iteration = true;

  void validate() const;
};

/// Minimum number of point pairs the IBVS law can use.
inline constexpr size_t kMinCorrespondences = 4;

/// Desired cells whose round trip lands within `threshold` cells.
std::vector<Cell> eligible_cells(const CyclicalMap& map, double threshold);

CorrespondenceSet select_correspondences(const CyclicalMap& map, int k, double threshold, uint64_t seed);

CorrespondenceSet match(const DescriptorGrid& desired, const DescriptorGrid& current, const MatcherConfig& cfg,
                        uint64_t seed);

}  // namespace patchservo
