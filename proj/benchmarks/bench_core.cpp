// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nav/agent/network.hpp"
#include "nav/targets/depth.hpp"
#include "nav/train/hyperparams.hpp"
#include "nav/train/losses.hpp"
#include "nav/world/maze_layout.hpp"
#include "nav/world/renderer.hpp"
#include "nav/world/world.hpp"

using namespace nav;

namespace {

world::EnvConfig env_at(int size) {
  world::EnvConfig e;
  e.render.width = e.render.height = size;
  return e;
}

agent::ArchitectureSpec spec_at(int size, const char* heads) {
  agent::ArchitectureSpec s;
  s.heads = *agent::parse_heads(heads);
  s.image_width = s.image_height = size;
  return s;
}

}  // namespace

static void BM_Render(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto layout = world::generate_layout(world::MazeKind::kStaticLarge, 1);
  const world::Renderer r(env_at(size).render);
  auto s = world::reset_state(layout, 3);
  world::Frame f;
  for (auto _ : state) {
    r.render_into(s, layout, f);
    s.pose.heading += 0.01;
    benchmark::DoNotOptimize(f.rgb.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Render)->Arg(32)->Arg(84);

static void BM_EnvStep(benchmark::State& state) {
  world::MazeEnv env(world::generate_layout(world::MazeKind::kStaticLarge, 1), env_at(84));
  env.reset(1);
  std::mt19937_64 rng(2);
  std::uint64_t ep = 1;
  for (auto _ : state) {
    if (env.done()) env.reset(++ep);
    benchmark::DoNotOptimize(env.step(world::Action{static_cast<int>(rng() % world::kNumActions)}));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvStep);

static void BM_ForwardStep(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto spec = spec_at(size, "D2");
  const agent::Network<float> net(spec);
  std::mt19937_64 rng(1);
  auto params = net.init_params(rng);
  world::MazeEnv env(world::generate_layout(world::MazeKind::kStaticSmall, 1), env_at(size));
  const auto in = agent::encode_observation<float>(env.reset(1), spec, env.config().render);
  auto st = net.zero_state();
  ad::Tape<float> tape;
  for (auto _ : state) {
    tape.clear();
    const auto bound = net.bind(tape, params);
    const auto v = net.forward(tape, bound, in, net.state_vars(tape, st));
    benchmark::DoNotOptimize(tape.scalar(v.value));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardStep)->Arg(32)->Arg(84);

// Forward and backward over one training chunk (A3C + D2 losses).
static void BM_TrainChunk(benchmark::State& state) {
  const int size = 84, len = static_cast<int>(state.range(0));
  const auto spec = spec_at(size, "D2");
  const agent::Network<float> net(spec);
  std::mt19937_64 rng(1);
  auto params = net.init_params(rng);
  world::MazeEnv env(world::generate_layout(world::MazeKind::kStaticSmall, 1), env_at(size));
  env.reset(1);
  std::vector<agent::NetInput<float>> inputs;
  std::vector<targets::DepthTarget> depth;
  std::vector<int> actions;
  for (int t = 0; t < len; ++t) {
    const int a = static_cast<int>(rng() % world::kNumActions);
    const auto& obs = env.step(world::Action{a});
    inputs.push_back(agent::encode_observation<float>(obs, spec, env.config().render));
    const auto bytes = targets::depth_to_bytes(obs.frame.depth, env.config().render.near_plane,
                                               env.config().render.max_range);
    depth.push_back(targets::make_depth_target(bytes, size, size));
    actions.push_back(a);
  }
  const std::vector<double> returns(len, 1.0);
  train::HyperParams hp;
  hp.beta_d2 = 3.33;
  ad::Tape<float> tape;
  for (auto _ : state) {
    tape.clear();
    params.zero_grad();
    const auto bound = net.bind(tape, params);
    auto sv = net.state_vars(tape, net.zero_state());
    std::vector<train::StepOutputs> steps;
    std::vector<train::AuxTargets> aux;
    for (int t = 0; t < len; ++t) {
      const auto v = net.forward(tape, bound, inputs[t], sv);
      steps.push_back({v.policy, v.value, v.d1, v.d2, v.loop});
      aux.push_back({&depth[t], -1});
      sv = v.next;
    }
    const ad::Var terms[2] = {train::a3c_loss<float>(tape, steps, actions, returns, hp),
                              train::aux_loss<float>(tape, spec, steps, aux, hp)};
    const float w[2] = {1.0f, 1.0f};
    tape.backward(tape.weighted_sum(terms, w));
    benchmark::DoNotOptimize(params.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * len);
}
BENCHMARK(BM_TrainChunk)->Arg(20)->Arg(50);

BENCHMARK_MAIN();
