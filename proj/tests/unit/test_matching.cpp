#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "patchservo/errors.hpp"
#include "patchservo/matching.hpp"
#include "test_support.hpp"

using namespace patchservo;
using patchservo::testing::random_grid;

namespace {

DescriptorGrid one_hot_grid(int rows, int cols) {
  DescriptorGrid g;
  g.rows = rows;
  g.cols = cols;
  g.dim = rows * cols;
  g.data.assign(g.cell_count() * g.dim, 0.0f);
  for (size_t i = 0; i < g.cell_count(); ++i) g.data[i * g.dim + i] = 1.0f;
  g.eligible.assign(g.cell_count(), 1);
  return g;
}

/// Exhaustive double-precision argmax, first maximum in row-major order.
Cell brute_nn(std::span<const float> q, const DescriptorGrid& g) {
  double best = -2.0;
  Cell out{};
  double qn = 0;
  for (float v : q) qn += double(v) * v;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      if (!g.is_eligible(r, c)) continue;
      double d = 0, n = 0;
      const auto x = g.cell(r, c);
      for (int i = 0; i < g.dim; ++i) {
        d += double(q[i]) * x[i];
        n += double(x[i]) * x[i];
      }
      const double cs = d / std::sqrt(qn * n);
      if (cs > best) {
        best = cs;
        out = {r, c};
      }
    }
  return out;
}

}  // namespace

TEST(NearestNeighbor, ExactMatch) {
  const DescriptorGrid g = one_hot_grid(3, 3);
  const NearestNeighbor nn = nearest_neighbor(g.cell(2, 1), g);
  EXPECT_EQ(nn.cell, (Cell{2, 1}));
  EXPECT_NEAR(nn.cosine, 1.0, 1e-12);
}

TEST(NearestNeighbor, OrthogonalQueryTakesFirstCell) {
  DescriptorGrid g = one_hot_grid(2, 2);
  g.dim = 5;
  g.data.assign(g.cell_count() * 5, 0.0f);
  for (size_t i = 0; i < 4; ++i) g.data[i * 5 + i] = 1.0f;
  std::vector<float> q(5, 0.0f);
  q[4] = 1.0f;
  const NearestNeighbor nn = nearest_neighbor(q, g);
  EXPECT_EQ(nn.cell, (Cell{0, 0}));
  EXPECT_EQ(nn.cosine, 0.0);
}

TEST(NearestNeighbor, RandomTwoByTwo) {
  std::mt19937_64 rng(11);
  const DescriptorGrid g = random_grid(2, 2, 16, rng);
  const auto q = g.cell(1, 0);
  EXPECT_EQ(nearest_neighbor(q, g).cell, (Cell{1, 0}));
}

TEST(NearestNeighbor, Errors) {
  DescriptorGrid g = one_hot_grid(2, 2);
  std::vector<float> q(4, 0.0f);
  q[0] = 1.0f;
  std::vector<float> wrong(3, 1.0f);
  EXPECT_THROW(nearest_neighbor(wrong, g), DimensionMismatch);
  g.eligible.assign(4, 0);
  EXPECT_THROW(nearest_neighbor(q, g), NoEligibleCells);
}

TEST(NearestNeighbor, SkipsIneligible) {
  DescriptorGrid g = one_hot_grid(2, 2);
  g.eligible[g.index(0, 1)] = 0;
  std::vector<float> q(4, 0.0f);
  q[1] = 1.0f;
  q[3] = 0.5f;
  EXPECT_EQ(nearest_neighbor(q, g).cell, (Cell{1, 1}));
}

TEST(CyclicalMap, IdentityIsZero) {
  std::mt19937_64 rng(12);
  const DescriptorGrid g = random_grid(6, 5, 12, rng);
  const CyclicalMap m = cyclical_distance_map(g, g);
  for (const auto& c : m.cells) {
    ASSERT_TRUE(c.valid);
    ASSERT_EQ(c.distance, 0.0);
  }
}

TEST(CyclicalMap, ShiftedByOneColumn) {
  // current(r, c) = desired(r, c + 1); the round trip returns home for every
  // desired cell that still exists in the current grid.
  const DescriptorGrid d = one_hot_grid(4, 4);
  DescriptorGrid c = d;
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) {
      auto dst = c.cell(r, col);
      if (col + 1 < 4) {
        const auto src = d.cell(r, col + 1);
        std::copy(src.begin(), src.end(), dst.begin());
      } else {
        std::fill(dst.begin(), dst.end(), 0.0f);
        c.eligible[c.index(r, col)] = 0;
      }
    }
  const CyclicalMap m = cyclical_distance_map(d, c);
  for (int r = 0; r < 4; ++r)
    for (int col = 1; col < 4; ++col) {
      EXPECT_EQ(m.at(r, col).distance, 0.0);
      EXPECT_EQ(m.at(r, col).forward, (Cell{r, col - 1}));
    }
}

TEST(CyclicalMap, DuplicateDescriptorLandsOnTwin) {
  DescriptorGrid d = one_hot_grid(3, 3);
  // Cell (2,2) becomes a copy of (0,0); the backward NN of their common match picks (0,0).
  auto src = d.cell(0, 0);
  auto dst = d.cell(2, 2);
  std::copy(src.begin(), src.end(), dst.begin());
  const DescriptorGrid c = one_hot_grid(3, 3);
  const CyclicalMap m = cyclical_distance_map(d, c);
  EXPECT_EQ(m.at(2, 2).back, (Cell{0, 0}));
  EXPECT_NEAR(m.at(2, 2).distance, -std::sqrt(8.0), 1e-12);
  EXPECT_EQ(m.at(0, 0).distance, 0.0);
}

TEST(CyclicalMap, DimensionMismatch) {
  std::mt19937_64 rng(13);
  EXPECT_THROW(cyclical_distance_map(random_grid(2, 2, 3, rng), random_grid(2, 2, 4, rng)), DimensionMismatch);
}

TEST(CyclicalMap, BruteForceOracle) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const DescriptorGrid a = random_grid(5, 5, 8, rng);
    const DescriptorGrid b = random_grid(5, 5, 8, rng);
    const CyclicalMap m = cyclical_distance_map(a, b);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) {
        const Cell v = brute_nn(a.cell(r, c), b);
        const Cell u = brute_nn(b.cell(v.row, v.col), a);
        ASSERT_EQ(nearest_neighbor(a.cell(r, c), b).cell, v);
        ASSERT_EQ(m.at(r, c).forward, v);
        ASSERT_EQ(m.at(r, c).back, u);
        ASSERT_EQ(m.at(r, c).distance, -std::hypot(double(r - u.row), double(c - u.col)));
      }
  }
}

TEST(CyclicalMap, ZeroIffMutualNearestNeighbours) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const DescriptorGrid a = random_grid(5, 4, 6, rng);
    const DescriptorGrid b = random_grid(4, 5, 6, rng);
    const CyclicalMap m = cyclical_distance_map(a, b);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 4; ++c) {
        const Cell v = brute_nn(a.cell(r, c), b);
        const bool mutual = brute_nn(b.cell(v.row, v.col), a) == Cell{r, c};
        EXPECT_EQ(m.at(r, c).distance == 0.0, mutual);
        EXPECT_LE(m.at(r, c).distance, 0.0);
      }
  }
}

TEST(Select, IdenticalGrids) {
  std::mt19937_64 rng(16);
  const DescriptorGrid g = random_grid(22, 22, 10, rng);
  const CorrespondenceSet s = match(g, g, MatcherConfig{}, 1);
  ASSERT_EQ(s.size(), 24u);
  EXPECT_FALSE(s.used_fallback);
  EXPECT_EQ(s.eligible_count, 484u);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : s.pairs) {
    EXPECT_EQ(p.cyclical_distance, 0.0);
    EXPECT_EQ(p.desired_cell, p.current_cell);
    EXPECT_NEAR(p.cosine, 1.0, 1e-6);
    EXPECT_TRUE(seen.insert({p.desired_cell.row, p.desired_cell.col}).second);
  }
  EXPECT_NEAR(s.mean_cosine(), 1.0, 1e-6);
}

TEST(Select, EligibleSetOfExactlyK) {
  std::mt19937_64 rng(17);
  DescriptorGrid g = random_grid(4, 4, 8, rng);
  // Cells 6..15 become noisy copies of (0,0): their round trip ends at (0,0).
  DescriptorGrid d = g;
  std::normal_distribution<float> noise(0.0f, 0.05f);
  for (int i = 6; i < 16; ++i) {
    auto dst = d.cell(i / 4, i % 4);
    const auto src = g.cell(0, 0);
    for (int k = 0; k < d.dim; ++k) dst[k] = src[k] + noise(rng);
  }
  const CyclicalMap m = cyclical_distance_map(d, g);
  std::vector<Cell> eligible = eligible_cells(m, 1.0);
  ASSERT_EQ(eligible.size(), 6u);
  for (uint64_t seed : {1u, 2u, 99u}) {
    const CorrespondenceSet s = select_correspondences(m, 6, 1.0, seed);
    std::vector<Cell> got;
    for (const auto& p : s.pairs) got.push_back(p.desired_cell);
    auto key = [](Cell c) { return c.row * 100 + c.col; };
    std::sort(got.begin(), got.end(), [&](Cell a, Cell b) { return key(a) < key(b); });
    EXPECT_EQ(got, eligible);
  }
}

TEST(Select, SeedsChangeSubsetNotEligibility) {
  std::mt19937_64 rng(18);
  const DescriptorGrid a = random_grid(22, 22, 10, rng);
  const CyclicalMap m = cyclical_distance_map(a, a);
  const CorrespondenceSet s1 = select_correspondences(m, 24, 1.0, 1);
  const CorrespondenceSet s2 = select_correspondences(m, 24, 1.0, 2);
  EXPECT_EQ(s1.eligible_count, s2.eligible_count);
  // Eligibility recomputed independently from the map.
  size_t n = 0;
  for (const auto& c : m.cells) n += (c.valid && -c.distance <= 1.0);
  EXPECT_EQ(s1.eligible_count, n);
  bool differ = false;
  for (size_t i = 0; i < 24; ++i) differ |= !(s1.pairs[i].desired_cell == s2.pairs[i].desired_cell);
  EXPECT_TRUE(differ);
  // Same seed reproduces.
  const CorrespondenceSet s3 = select_correspondences(m, 24, 1.0, 1);
  for (size_t i = 0; i < 24; ++i) EXPECT_EQ(s1.pairs[i].desired_cell, s3.pairs[i].desired_cell);
}

TEST(Select, ThresholdExcludesDiagonal) {
  CyclicalMap m;
  m.rows = 1;
  m.cols = 6;
  m.cells.resize(6);
  const double d[6] = {0.0, -1.0, -std::sqrt(2.0), -2.0, 0.0, -1.0};
  for (int i = 0; i < 6; ++i) m.cells[i] = {true, {0, i}, {0, i}, 0.5, d[i]};
  const auto cells = eligible_cells(m, 1.0);
  EXPECT_EQ(cells.size(), 4u);
  for (Cell c : cells) EXPECT_GE(m.at(0, c.col).distance, -1.0);
}

TEST(Select, FallbackUsesBestDistances) {
  CyclicalMap m;
  m.rows = 1;
  m.cols = 6;
  m.cells.resize(6);
  const double d[6] = {-3.0, -1.5, -2.0, -5.0, -1.9, -4.0};
  for (int i = 0; i < 6; ++i) m.cells[i] = {true, {0, i}, {0, 0}, 0.1, d[i]};
  const CorrespondenceSet s = select_correspondences(m, 4, 1.0, 7);
  EXPECT_TRUE(s.used_fallback);
  EXPECT_EQ(s.eligible_count, 0u);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s.pairs[0].desired_cell.col, 1);
  EXPECT_EQ(s.pairs[1].desired_cell.col, 4);
  EXPECT_EQ(s.pairs[2].desired_cell.col, 2);
  EXPECT_EQ(s.pairs[3].desired_cell.col, 0);
}

TEST(Select, InsufficientMatches) {
  CyclicalMap m;
  m.rows = 1;
  m.cols = 3;
  m.cells.assign(3, CellMatch{true, {}, {}, 1.0, 0.0});
  EXPECT_THROW(select_correspondences(m, 24, 1.0, 0), InsufficientMatches);
  EXPECT_THROW(select_correspondences(m, 0, 1.0, 0), std::invalid_argument);
}

TEST(Select, ScaleInvariance) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 20; ++t) {
    const DescriptorGrid a = random_grid(8, 8, 6, rng);
    const DescriptorGrid b = random_grid(8, 8, 6, rng);
    DescriptorGrid a2 = a, b2 = b;
    for (float& v : a2.data) v *= 3.5f;
    for (float& v : b2.data) v *= 0.25f;
    MatcherConfig cfg;
    cfg.k = 4;
    cfg.threshold = 3.0;
    const CorrespondenceSet s1 = match(a, b, cfg, 5);
    const CorrespondenceSet s2 = match(a2, b2, cfg, 5);
    ASSERT_EQ(s1.eligible_count, s2.eligible_count);
    ASSERT_EQ(s1.size(), s2.size());
    for (size_t i = 0; i < s1.size(); ++i) {
      EXPECT_EQ(s1.pairs[i].desired_cell, s2.pairs[i].desired_cell);
      EXPECT_EQ(s1.pairs[i].current_cell, s2.pairs[i].current_cell);
    }
  }
}

TEST(Select, NoDuplicatesAndThresholdRespected) {
  std::mt19937_64 rng(20);
  for (int t = 0; t < 30; ++t) {
    const DescriptorGrid a = random_grid(10, 10, 4, rng);
    const DescriptorGrid b = random_grid(10, 10, 4, rng);
    const CorrespondenceSet s = match(a, b, MatcherConfig{.k = 8, .threshold = 2.0}, t);
    std::set<int> seen;
    for (const auto& p : s.pairs) {
      EXPECT_TRUE(seen.insert(p.desired_cell.row * 10 + p.desired_cell.col).second);
      if (!s.used_fallback) EXPECT_LE(-p.cyclical_distance, 2.0);
    }
  }
}

TEST(MatcherConfig, Validation) {
  MatcherConfig c;
  c.k = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.threshold = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
