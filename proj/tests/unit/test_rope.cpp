#include <gtest/gtest.h>

#include <cmath>

#include "mfm/error.hpp"
#include "mfm/rng.hpp"
#include "mfm/rope.hpp"

using namespace mfm;

namespace {

std::vector<double> random_vec(int n, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = standard_normal(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double rotated_dot(std::vector<double> q, std::vector<double> k, const GridPos& pq, const GridPos& pk,
                   int head_dim) {
  rope3d(q, pq, head_dim);
  rope3d(k, pk, head_dim);
  return dot(q, k);
}

}  // namespace

TEST(Rope, AxisSplit) {
  EXPECT_EQ(rope_axis_split(64), (std::array<int, 3>{16, 24, 24}));
  EXPECT_EQ(rope_axis_split(128), (std::array<int, 3>{32, 48, 48}));
  EXPECT_EQ(rope_axis_split(16), (std::array<int, 3>{4, 6, 6}));
  EXPECT_THROW(rope_axis_split(24), ValidationError);
}

TEST(Rope, PreservesNormAndIdentityAtOrigin) {
  Rng rng(1);
  auto v = random_vec(64, rng);
  const auto orig = v;
  rope3d(v, {0, 0, 0}, 64);
  EXPECT_EQ(v, orig);
  rope3d(v, {3, 7, 11}, 64);
  EXPECT_NEAR(dot(v, v), dot(orig, orig), 1e-10);
}

TEST(Rope, EachAxisRotatesOnlyItsChannels) {
  Rng rng(2);
  const auto v = random_vec(64, rng);
  for (int axis = 0; axis < 3; ++axis) {
    GridPos p;
    (axis == 0 ? p.t : axis == 1 ? p.h : p.w) = 5;
    auto r = v;
    rope3d(r, p, 64);
    const int begin = axis == 0 ? 0 : axis == 1 ? 16 : 40;
    const int end = axis == 0 ? 16 : axis == 1 ? 40 : 64;
    for (int i = 0; i < 64; ++i) {
      if (i < begin || i >= end) EXPECT_EQ(r[i], v[i]) << "axis " << axis << " channel " << i;
    }
  }
}

TEST(Rope, RelativePositionInvariance) {
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = random_vec(64, rng);
    const auto k = random_vec(64, rng);
    const GridPos p{uniform_int(rng, 0, 30), uniform_int(rng, 0, 30), uniform_int(rng, 0, 30)};
    const GridPos pp{uniform_int(rng, 0, 30), uniform_int(rng, 0, 30), uniform_int(rng, 0, 30)};
    const GridPos d{uniform_int(rng, -10, 10), uniform_int(rng, -10, 10), uniform_int(rng, -10, 10)};
    const GridPos ps{p.t + d.t, p.h + d.h, p.w + d.w};
    const GridPos pps{pp.t + d.t, pp.h + d.h, pp.w + d.w};
    worst = std::max(worst, std::abs(rotated_dot(q, k, p, pp, 64) - rotated_dot(q, k, ps, pps, 64)));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Rope, TablesMatchAngles) {
  const auto pos = grid_positions(2, 3, 4);
  ASSERT_EQ(pos.size(), 24u);
  EXPECT_EQ(pos[5], (GridPos{0, 1, 1}));
  const auto tables = rope_tables(pos, 16);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    for (int p = 0; p < 8; ++p) {
      EXPECT_DOUBLE_EQ(tables.cos[i * 8 + p], std::cos(rope_angle(pos[i], p, 16, 10000.0)));
    }
  }
}
