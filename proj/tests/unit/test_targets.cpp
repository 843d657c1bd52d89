// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nav/errors.hpp"
#include "nav/targets/depth.hpp"
#include "nav/targets/loop_closure.hpp"
#include "nav/targets/position.hpp"
#include "nav/world/maze_layout.hpp"

using namespace nav;
using namespace nav::targets;

namespace {

// Band table written out independently: [lo, hi) per band, last band closed.
int band_oracle(double d) {
  static const double lo[8] = {0.0, 0.05, 0.175, 0.3, 0.425, 0.55, 0.675, 0.8};
  static const double hi[8] = {0.05, 0.175, 0.3, 0.425, 0.55, 0.675, 0.8, 1.0};
  for (int b = 0; b < 7; ++b)
    if (d >= lo[b] && d < hi[b]) return b;
  return (d >= lo[7] && d <= hi[7]) ? 7 : -1;
}

// Straight from the definition: some earlier t' is within eta1 of p_t and a
// point strictly between t' and t is at least eta2 away from p_t.
std::vector<int> loop_oracle(const std::vector<Position>& p, double eta1, double eta2) {
  std::vector<int> out(p.size(), 0);
  auto dist = [&](std::size_t a, std::size_t b) {
    return std::hypot(p[a][0] - p[b][0], p[a][1] - p[b][1]);
  };
  for (std::size_t t = 1; t < p.size(); ++t) {
    bool far_between = false;  // over t'' in (t', t)
    for (std::size_t k = t; k-- > 0;) {
      if (dist(t, k) <= eta1 && far_between) {
        out[t] = 1;
        break;
      }
      if (dist(t, k) >= eta2) far_between = true;
    }
  }
  return out;
}

std::vector<Position> random_walk(std::mt19937_64& rng, int n, double step) {
  std::normal_distribution<double> g(0.0, step);
  std::vector<Position> p(n);
  for (int i = 1; i < n; ++i) {
    p[i] = {p[i - 1][0] + g(rng), p[i - 1][1] + g(rng)};
    // Keep it inside a small arena so revisits are common.
    for (double& c : p[i]) c = std::clamp(c, -2.5, 2.5);
  }
  return p;
}

}  // namespace

TEST(Depth, EdgeTable) {
  const double edges[9] = {0.0, 0.05, 0.175, 0.3, 0.425, 0.55, 0.675, 0.8, 1.0};
  const int expect[9] = {0, 1, 2, 3, 4, 5, 6, 7, 7};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(quantize_depth(edges[i]), expect[i]) << edges[i];
  for (int i = 1; i < 8; ++i) EXPECT_EQ(quantize_depth(std::nextafter(edges[i], 0.0)), i - 1);
  EXPECT_EQ(quantize_depth(std::pow(0.8, 10)), 1);
}

TEST(Depth, MatchesLookupOracleOnRandomDraws) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000000; ++i) {
    const double d = u(rng);
    ASSERT_EQ(quantize_depth(d), band_oracle(d)) << d;
  }
}

TEST(Depth, OutOfRangeThrows) {
  EXPECT_THROW(quantize_depth(-0.01), DataError);
  EXPECT_THROW(quantize_depth(1.01), DataError);
  EXPECT_THROW(quantize_depth(std::nan("")), DataError);
}

TEST(Depth, PreprocessUniformFrames) {
  const int h = 84, w = 84;
  for (auto [byte, want] : {std::pair{255, 1.0}, std::pair{0, 0.0}, std::pair{204, std::pow(0.8, 10)}}) {
    const std::vector<std::uint8_t> frame(h * w, static_cast<std::uint8_t>(byte));
    for (double v : preprocess_depth(frame, h, w)) EXPECT_NEAR(v, want, 1e-9) << byte;
  }
  EXPECT_NEAR(std::pow(0.8, 10), 0.10737, 1e-5);
}

TEST(Depth, PreprocessCropsAndPools) {
  // 8 rows: rows 0-1 and 6-7 are cropped, rows 2-5 each form one output row;
  // 32 columns pool in pairs.
  const int h = 8, w = 32;
  std::vector<std::uint8_t> frame(h * w, 0);
  for (int r = 2; r < 6; ++r)
    for (int c = 0; c < w; ++c) frame[r * w + c] = (c % 2 == 0) ? 200 : 100;
  const auto out = preprocess_depth(frame, h, w);
  for (double v : out) EXPECT_NEAR(v, std::pow(150.0 / 255.0, 10), 1e-12);
}

TEST(Depth, ZBufferEncoding) {
  const std::vector<float> d{0.1f, 20.0f, 1.0f, 5.0f, 50.0f};
  const auto b = depth_to_bytes(d, 0.1, 20.0);
  EXPECT_EQ(b[0], 0);
  EXPECT_EQ(b[1], 255);
  EXPECT_LT(b[2], b[3]);
  EXPECT_EQ(b[4], 255);
  const double expect = 255.0 * (1 / 0.1 - 1 / 1.0) / (1 / 0.1 - 1 / 20.0);
  EXPECT_NEAR(b[2], expect, 0.5 + 1e-9);
}

TEST(Depth, TargetBandsFollowValues) {
  std::vector<std::uint8_t> frame(84 * 84);
  std::mt19937_64 rng(5);
  for (auto& b : frame) b = static_cast<std::uint8_t>(rng() % 256);
  const auto t = make_depth_target(frame, 84, 84);
  for (int i = 0; i < kDepthPixels; ++i) EXPECT_EQ(t.band[i], band_oracle(t.value[i]));
}

TEST(LoopClosure, StraightLineHasNoClosures) {
  std::vector<Position> p;
  for (int i = 0; i < 50; ++i) p.push_back({0.3 * i, 0.0});
  for (int l : loop_closure_labels(p)) EXPECT_EQ(l, 0);
}

TEST(LoopClosure, SquareLoopClosesOnReturn) {
  std::vector<Position> p;
  const double s = 3.0;
  for (int i = 0; i <= 6; ++i) p.push_back({s * i / 6, 0});
  for (int i = 1; i <= 6; ++i) p.push_back({s, s * i / 6});
  for (int i = 1; i <= 6; ++i) p.push_back({s - s * i / 6, s});
  for (int i = 1; i <= 6; ++i) p.push_back({0, s - s * i / 6});
  const auto l = loop_closure_labels(p);
  EXPECT_EQ(l.back(), 1);
  EXPECT_EQ(l, loop_oracle(p, 1.0, 2.0));
  // Nothing fires on the first three sides.
  for (int i = 0; i < 19; ++i) EXPECT_EQ(l[i], 0) << i;
}

TEST(LoopClosure, PacingNeverExceedsEta2) {
  std::vector<Position> p;
  for (int i = 0; i < 200; ++i) p.push_back({(i % 10) * 0.1, 0.0});
  for (int l : loop_closure_labels(p)) EXPECT_EQ(l, 0);
}

TEST(LoopClosure, MatchesBruteForceOracle) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 499);
    const auto p = random_walk(rng, n, 0.2 + 0.3 * (trial % 3));
    ASSERT_EQ(loop_closure_labels(p), loop_oracle(p, 1.0, 2.0)) << "trial " << trial;
  }
}

TEST(LoopClosure, IncrementalMatchesBatchAndIsCausal) {
  std::mt19937_64 rng(107);
  const auto p = random_walk(rng, 400, 0.3);
  const auto full = loop_closure_labels(p);
  LoopLabeler inc;
  for (std::size_t t = 0; t < p.size(); ++t) EXPECT_EQ(inc.push(p[t]), full[t]);
  for (std::size_t cut : {1u, 17u, 200u}) {
    const std::vector<Position> head(p.begin(), p.begin() + cut);
    const auto l = loop_closure_labels(head);
    EXPECT_TRUE(std::equal(l.begin(), l.end(), full.begin()));
  }
}

TEST(LoopClosure, CustomThresholds) {
  std::mt19937_64 rng(109);
  const LoopThresholds thr{0.5, 3.0};
  const auto p = random_walk(rng, 300, 0.4);
  EXPECT_EQ(loop_closure_labels(p, thr), loop_oracle(p, 0.5, 3.0));
  EXPECT_THROW((LoopThresholds{2.0, 1.0}.validate()), ConfigError);
}

TEST(Position, CellCentresRoundTrip) {
  for (auto kind : {world::MazeKind::kStaticSmall, world::MazeKind::kStaticLarge}) {
    const auto m = world::generate_layout(kind, 3);
    const int n = m.num_floor_cells();
    EXPECT_EQ(n, kind == world::MazeKind::kStaticSmall ? 50 : 135);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> jitter(-0.499, 0.499);
    for (int id = 0; id < n; ++id) {
      const auto c = cell_center(id, m);
      EXPECT_EQ(position_cell(c, m), id);
      for (int k = 0; k < 5; ++k) {
        const std::array<double, 2> q{c[0] + jitter(rng), c[1] + jitter(rng)};
        const int got = position_cell(q, m);
        EXPECT_EQ(got, id);
        EXPECT_GE(got, 0);
        EXPECT_LT(got, n);
      }
    }
  }
}

TEST(Position, RejectsSolidAndOutside) {
  const auto m = world::generate_layout(world::MazeKind::kIMaze, 1);
  EXPECT_THROW(position_cell({-1.0, 0.5}, m), DataError);
  for (int cell = 0; cell < m.rows * m.cols; ++cell) {
    if (!m.solid[cell]) continue;
    EXPECT_THROW(position_cell({m.col_of(cell) + 0.5, m.row_of(cell) + 0.5}, m), DataError);
    break;
  }
}
