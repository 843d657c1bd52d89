// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "nav/errors.hpp"
#include "nav/world/maze_layout.hpp"
#include "nav/world/renderer.hpp"
#include "nav/world/world.hpp"

using namespace nav;
using namespace nav::world;

namespace {

// 3x3 open room, goal in the bottom-right corner.
MazeLayout open_room() {
  return layout_from_string(
      "# navw-layout kind=static_small seed=0 budget=3600\n"
      "#######\n"
      "#S.S.S#\n"
      "#.....#\n"
      "#S.S.S#\n"
      "#.....#\n"
      "#S.S.G#\n"
      "#######\n");
}

const MazeKind kAllKinds[] = {MazeKind::kIMaze,      MazeKind::kStaticSmall, MazeKind::kStaticLarge,
                              MazeKind::kRandomSmall, MazeKind::kRandomLarge, MazeKind::kStaticMini};

}  // namespace

TEST(Layout, PaperSizes) {
  const auto small = generate_layout(MazeKind::kStaticSmall, 1);
  EXPECT_EQ(small.rows, 5);
  EXPECT_EQ(small.cols, 10);
  EXPECT_EQ(small.num_floor_cells(), 50);
  EXPECT_EQ(generate_layout(MazeKind::kStaticLarge, 1).num_floor_cells(), 135);
  const auto imaze = generate_layout(MazeKind::kIMaze, 1);
  EXPECT_EQ(imaze.num_floor_cells(), 77);
  EXPECT_EQ(imaze.goal_cells.size(), 4u);
  const auto mini = generate_layout(MazeKind::kStaticMini, 1);
  EXPECT_EQ(mini.num_floor_cells(), 25);
  EXPECT_EQ(mini.episode_budget, 900);
}

TEST(Layout, DeterministicAndConnected) {
  for (auto kind : kAllKinds) {
    for (std::uint64_t seed : {1ull, 2ull, 42ull, 977ull}) {
      const auto a = generate_layout(kind, seed);
      const auto b = generate_layout(kind, seed);
      EXPECT_EQ(layout_to_string(a), layout_to_string(b));
      EXPECT_TRUE(a.is_connected()) << to_string(kind) << " seed " << seed;
      const auto floor = a.floor_cells();
      const auto dist = a.distances_from(floor.front());
      for (int cell : floor) EXPECT_GE(dist[cell], 0);
    }
  }
}

TEST(Layout, EdgeWallsAreSymmetric) {
  const auto m = generate_layout(MazeKind::kStaticLarge, 5);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c + 1 < m.cols; ++c) EXPECT_EQ(m.blocked(r, c, kEast), m.blocked(r, c + 1, kWest));
  for (int r = 0; r + 1 < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) EXPECT_EQ(m.blocked(r, c, kSouth), m.blocked(r + 1, c, kNorth));
}

TEST(Layout, TextRoundTrip) {
  for (auto kind : kAllKinds) {
    const auto m = generate_layout(kind, 7);
    const auto back = layout_from_string(layout_to_string(m));
    EXPECT_EQ(layout_to_string(back), layout_to_string(m)) << to_string(kind);
    EXPECT_EQ(back.solid, m.solid);
    EXPECT_EQ(back.goal_cells, m.goal_cells);
    EXPECT_EQ(back.episode_budget, m.episode_budget);
  }
  EXPECT_THROW(layout_from_string("nonsense\n"), DataError);
}

TEST(Reset, SameSeedSameStart) {
  const auto m = generate_layout(MazeKind::kRandomSmall, 3);
  const auto a = reset_state(m, 99);
  const auto b = reset_state(m, 99);
  EXPECT_EQ(a.pose.x, b.pose.x);
  EXPECT_EQ(a.pose.y, b.pose.y);
  EXPECT_EQ(a.pose.heading, b.pose.heading);
  EXPECT_EQ(a.goal_cell, b.goal_cell);
}

TEST(Reset, RandomGoalCoversEveryCandidate) {
  const auto m = generate_layout(MazeKind::kRandomSmall, 3);
  std::set<int> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(reset_state(m, s).goal_cell);
  EXPECT_EQ(seen, std::set<int>(m.goal_cells.begin(), m.goal_cells.end()));
}

TEST(Reset, StaticGoalNeverMoves) {
  const auto m = generate_layout(MazeKind::kStaticSmall, 3);
  const int goal = reset_state(m, 0).goal_cell;
  std::set<std::pair<double, double>> starts;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto st = reset_state(m, s);
    EXPECT_EQ(st.goal_cell, goal);
    starts.insert({st.pose.x, st.pose.y});
  }
  EXPECT_GT(starts.size(), 1u);
}

TEST(Step, EnteringGoalPaysTenAndRespawns) {
  const auto m = open_room();
  auto s = reset_state(m, 1);
  s.pose = Pose{};
  s.pose.x = 1.5;
  s.pose.y = 2.5;  // one cell west of the goal, facing it
  PhysicsConfig ph;
  double total = 0;
  bool respawned = false;
  for (int i = 0; i < 200 && !respawned; ++i) {
    const auto r = step_state(s, m, Action{4}, ph);
    total += r.reward;
    respawned = r.respawned;
    if (respawned) {
      EXPECT_EQ(r.reward, 10.0);
      EXPECT_EQ(r.goal_events, 1);
    }
  }
  ASSERT_TRUE(respawned);
  EXPECT_EQ(total, 10.0);
  const int cell = static_cast<int>(s.pose.y) * m.cols + static_cast<int>(s.pose.x);
  EXPECT_NE(std::find(m.spawn_cells.begin(), m.spawn_cells.end(), cell), m.spawn_cells.end());
}

TEST(Step, WallStopsAgentWithoutReward) {
  const auto m = open_room();
  auto s = reset_state(m, 1);
  s.pose = Pose{};
  s.pose.x = 1.5;
  s.pose.y = 0.5;  // facing the east outer wall along the top row
  PhysicsConfig ph;
  for (int i = 0; i < 300; ++i) {
    const auto r = step_state(s, m, Action{4}, ph);
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_LE(s.pose.x, 3.0 - ph.radius + 1e-12);
  }
  EXPECT_NEAR(s.pose.x, 3.0 - ph.radius, 1e-9);
  EXPECT_NEAR(s.pose.y, 0.5, 1e-12);
}

TEST(Step, SlidesAlongWallAtAnAngle) {
  const auto m = open_room();
  auto s = reset_state(m, 1);
  s.pose = Pose{};
  s.pose.x = 0.5;
  s.pose.y = 0.5;
  s.pose.heading = -0.3;  // mostly east, slightly north into the top wall
  PhysicsConfig ph;
  const double x0 = s.pose.x;
  for (int i = 0; i < 20; ++i) step_state(s, m, Action{4}, ph);
  EXPECT_GT(s.pose.x, x0 + 0.1);           // kept moving along the wall
  EXPECT_GE(s.pose.y, ph.radius - 1e-12);  // never inside it
}

TEST(Step, BudgetEndsEpisode) {
  const auto m = generate_layout(MazeKind::kStaticSmall, 1);
  auto s = reset_state(m, 5);
  std::mt19937_64 rng(5);
  PhysicsConfig ph;
  int steps = 0;
  while (!s.done) {
    step_state(s, m, Action{static_cast<int>(rng() % kNumActions)}, ph);
    ++steps;
  }
  EXPECT_EQ(s.env_step, 3600);
  EXPECT_EQ(steps, 3600 / kActionRepeat);
  EXPECT_THROW(step_state(s, m, Action{0}, ph), UsageError);
}

TEST(Step, RejectsBadAction) {
  const auto m = open_room();
  auto s = reset_state(m, 1);
  EXPECT_THROW(step_state(s, m, Action{8}, PhysicsConfig{}), UsageError);
  EXPECT_THROW(step_state(s, m, Action{-1}, PhysicsConfig{}), UsageError);
}

TEST(Velocity, FrameDefinition) {
  Pose p;
  for (double v : agent_relative_velocity(p)) EXPECT_EQ(v, 0.0);

  p.heading = 0.7;
  p.v_lin = {0.05 * std::cos(0.7), 0.05 * std::sin(0.7)};
  const auto v = agent_relative_velocity(p);
  EXPECT_NEAR(v[0], 0.05, 1e-15);
  for (int i = 1; i < kVelocityDims; ++i) EXPECT_NEAR(v[i], 0.0, 1e-15);
}

TEST(Velocity, RotationInvariantMagnitude) {
  Pose a, b;
  a.v_lin = b.v_lin = {0.03, -0.02};
  a.heading = 0.3;
  b.heading = 2.1;
  const auto va = agent_relative_velocity(a), vb = agent_relative_velocity(b);
  EXPECT_NEAR(std::hypot(va[0], va[1]), std::hypot(vb[0], vb[1]), 1e-15);
  EXPECT_NEAR(std::hypot(va[0], va[1]), std::hypot(0.03, 0.02), 1e-15);
}

TEST(GroundTruth, CellCentres) {
  const auto m = generate_layout(MazeKind::kStaticSmall, 1);
  WorldState s;
  const auto floor = m.floor_cells();
  for (int id = 0; id < static_cast<int>(floor.size()); ++id) {
    s.pose.x = m.col_of(floor[id]) + 0.5;
    s.pose.y = m.row_of(floor[id]) + 0.5;
    const auto g = ground_truth_position(s, m);
    EXPECT_EQ(g.cell, id);
    EXPECT_GE(g.cell, 0);
    EXPECT_LT(g.cell, 50);
  }
}

TEST(SelfConsistency, PoseIntegratesVelocity) {
  // 1e5 env steps per maze kind.
  for (auto kind : {MazeKind::kStaticSmall, MazeKind::kRandomLarge, MazeKind::kStaticMini}) {
    const auto m = generate_layout(kind, 11);
    auto s = reset_state(m, 3);
    std::mt19937_64 rng(17);
    PhysicsConfig ph;
    int env_steps = 0, checked = 0;
    double worst = 0;
    while (env_steps < 100000) {
      if (s.done) s = reset_state(m, rng());
      const auto r = step_state(s, m, Action{static_cast<int>(rng() % kNumActions)}, ph, true);
      for (std::size_t k = 1; k < r.env_poses.size(); ++k) {
        const auto& a = r.env_poses[k - 1];
        const auto& b = r.env_poses[k];
        ++env_steps;
        if (b.v_lin[0] == 0 && b.v_lin[1] == 0 && (b.x != a.x || b.y != a.y)) continue;  // respawn
        worst = std::max({worst, std::abs(b.x - a.x - b.v_lin[0]), std::abs(b.y - a.y - b.v_lin[1])});
        ++checked;
      }
    }
    EXPECT_LT(worst, 1e-6) << to_string(kind);
    EXPECT_GT(checked, 90000);
  }
}

TEST(SelfConsistency, RewardConservation) {
  for (auto kind : {MazeKind::kStaticSmall, MazeKind::kRandomSmall, MazeKind::kStaticMini}) {
    const auto m = generate_layout(kind, 2);
    std::mt19937_64 rng(23);
    for (int ep = 0; ep < 5; ++ep) {
      auto s = reset_state(m, rng());
      double sum = 0;
      while (!s.done) sum += step_state(s, m, Action{static_cast<int>(rng() % kNumActions)}, {}).reward;
      EXPECT_EQ(sum, s.total_reward);
      EXPECT_EQ(s.total_reward, 10.0 * s.goals + s.apples + 2.0 * s.strawberries);
    }
  }
}

TEST(Env, DeterministicObservations) {
  const auto m = generate_layout(MazeKind::kRandomSmall, 4);
  EnvConfig cfg;
  cfg.render.width = cfg.render.height = 32;
  MazeEnv a(m, cfg), b(m, cfg);
  a.reset(77);
  b.reset(77);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300 && !a.done(); ++i) {
    const Action act{static_cast<int>(rng() % kNumActions)};
    a.step(act);
    b.step(act);
    ASSERT_EQ(a.observation().frame.rgb, b.observation().frame.rgb);
    ASSERT_EQ(a.observation().frame.depth, b.observation().frame.depth);
    ASSERT_EQ(a.observation().velocity, b.observation().velocity);
    ASSERT_EQ(a.last_step().reward, b.last_step().reward);
  }
}

TEST(Env, ObservationCarriesPreviousActionAndReward) {
  MazeEnv env(open_room());
  const auto& o0 = env.reset(1);
  for (float v : o0.prev_action) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(o0.prev_reward, 0.0f);
  const auto& o1 = env.step(Action{5});
  for (int i = 0; i < kNumActions; ++i) EXPECT_EQ(o1.prev_action[i], i == 5 ? 1.0f : 0.0f);
}

TEST(Render, AnalyticWallDistance) {
  const auto m = open_room();
  const auto hit = Renderer::cast(m, 1.5, 1.5, 1.0, 0.0, 20.0);
  EXPECT_NEAR(hit.distance, 1.5, 1e-6);

  RenderConfig rc;
  rc.width = 33;
  rc.height = 33;
  Renderer r(rc);
  WorldState s;
  s.pose.x = 1.5;
  s.pose.y = 1.5;
  s.pose.heading = 0;
  const auto f = r.render(s, m);
  EXPECT_NEAR(f.depth[16 * 33 + 16], 1.5, 1e-6);
  // Diagonal into a corner: the wall at x = 3 is reached at t = 1.5 along (1, 0.5).
  EXPECT_NEAR(Renderer::cast(m, 1.5, 1.5, 1.0, 0.5, 20.0).distance, 1.5, 1e-6);
}

TEST(Render, SymmetricFacingWallSquareOn) {
  const auto m = open_room();
  RenderConfig rc;
  rc.width = 40;
  rc.height = 30;
  Renderer r(rc);
  WorldState s;
  s.pose.x = 1.5;
  s.pose.y = 1.5;
  const auto f = r.render(s, m);
  const int row = rc.height / 2;
  for (int c = 0; c < rc.width / 2; ++c)
    EXPECT_NEAR(f.depth[row * rc.width + c], f.depth[row * rc.width + rc.width - 1 - c], 1e-9);
}

TEST(Render, DepthInRange) {
  const auto m = generate_layout(MazeKind::kStaticLarge, 2);
  MazeEnv env(m);
  env.reset(3);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    env.step(Action{static_cast<int>(rng() % kNumActions)});
    for (float d : env.observation().frame.depth) {
      EXPECT_GT(d, 0.0f);
      EXPECT_LE(d, env.config().render.max_range);
    }
  }
}

TEST(Render, TextureOutsideFrustumIsInvisible) {
  auto m = open_room();
  WorldState s;
  s.pose.x = 1.5;
  s.pose.y = 1.5;
  s.pose.heading = 0;  // looking east
  Renderer r;
  const auto before = r.render(s, m);

  auto behind = m;  // west face of the middle-left cell
  behind.face_texture[m.cell_index(1, 0) * 4 + kWest] = {7, 3};
  EXPECT_EQ(r.render(s, behind).rgb, before.rgb);

  auto ahead = m;  // east face of the middle-right cell
  ahead.face_texture[m.cell_index(1, 2) * 4 + kEast] = {7, 3};
  EXPECT_NE(r.render(s, ahead).rgb, before.rgb);
}
