// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "json.hpp"

#include "nav/errors.hpp"
#include "nav/runner/commands.hpp"
#include "nav/runner/config.hpp"
#include "nav/runner/env_server.hpp"
#include "nav/runner/render_map.hpp"
#include "nav/runner/wire.hpp"
#include "test_util.hpp"

using namespace nav;
using namespace nav::runner;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void put(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Little-endian byte writer, independent of the library's own.
struct Le {
  std::vector<std::uint8_t> b;
  void u8(std::uint8_t v) { b.push_back(v); }
  void u16(std::uint16_t v) { u8(v & 0xff), u8(v >> 8); }
  void u32(std::uint32_t v) { u16(v & 0xffff), u16(v >> 16); }
  void f32(float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    u32(v);
  }
};

const char* kTinyConfig = R"(# tiny
[maze]
kind = "static_mini"
seed = 1

[render]
width = 32
height = 32

[agent]
variant = "nav"
heads = "D2"
fc_width = 32
lstm1_width = 8
lstm2_width = 16
aux_hidden = 8

[train]
lr = 0.0004
beta_d2 = 3.33
workers = 2
seed = 3
max_agent_steps = 2000
window_env_steps = 2000
checkpoint_every = 1000

[eval]
episodes = 3
)";

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NAVW_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// Raw TCP connection that can half-close and read with a deadline.
struct RawConn {
  int fd = -1;
  explicit RawConn(int port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) throw std::runtime_error("connect");
  }
  ~RawConn() { ::close(fd); }
  void send_all(std::span<const std::uint8_t> d) {
    std::size_t off = 0;
    while (off < d.size()) {
      const ssize_t n = ::send(fd, d.data() + off, d.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return;  // server may already have closed
      off += static_cast<std::size_t>(n);
    }
  }
  // Everything until the peer closes; false on timeout.
  bool read_to_close(std::vector<std::uint8_t>& out, int timeout_ms = 5000) {
    std::uint8_t tmp[4096];
    for (;;) {
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, timeout_ms) <= 0) return false;
      const ssize_t n = ::recv(fd, tmp, sizeof tmp, 0);
      if (n <= 0) return true;
      out.insert(out.end(), tmp, tmp + n);
    }
  }
};

world::EnvConfig small_env() {
  world::EnvConfig e;
  e.render.width = e.render.height = 32;
  return e;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, ShippedConfigsRoundTrip) {
  for (const auto& entry : fs::directory_iterator(fs::path(NAV_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".toml") continue;
    const auto a = load_config(entry.path().string());
    const auto b = parse_config(serialize_config(a));
    EXPECT_EQ(a, b) << entry.path();
    EXPECT_EQ(serialize_config(a), serialize_config(b));
  }
}

TEST(Config, EveryFieldRoundTrips) {
  auto c = parse_config(kTinyConfig);
  c.hp.gamma = 0.97;
  c.hp.reward_clip = true;
  c.hp.reward_scale = 0.3;
  c.hp.beta_entropy = 1.2345678901234e-4;
  c.stop_score = 12.5;
  c.deterministic = true;
  c.env.render.fov = 1.2;
  c.env.physics.damping = 0.85;
  c.raw_depth = true;
  c.port = 9001;
  c.out_dir = "some dir/with \"quotes\"";
  c.arch.depth_mode = agent::DepthMode::kRegress;
  c.sweep = 7;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, ErrorsNameTheLine) {
  auto expect_line = [](const std::string& text, int line) {
    try {
      parse_config(text);
      ADD_FAILURE() << "accepted:\n" << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("line " + std::to_string(line)), std::string::npos) << e.what();
    }
  };
  expect_line("[train]\nlr = 0.1\nbogus = 3\n", 3);
  expect_line("[maze]\n\nkind = \"spiral\"\n", 3);
  expect_line("[train\n", 1);
  expect_line("# c\n[train]\nlr = abc\n", 3);
  expect_line("[nowhere]\nx = 1\n", 2);
  expect_line("[train]\nworkers = 2\nworkers = 3\n", 3);
  expect_line("[agent]\nheads = \"D1D9\"\n", 2);
  expect_line("[train]\nhyperparams = \"sample:65\"\n", 2);
}

TEST(Config, ValidationAndSweep) {
  const auto sweep = parse_config("[train]\nhyperparams = \"sample:64\"\n");
  EXPECT_EQ(sweep.sweep, 64);
  EXPECT_THROW(parse_config("[render]\nwidth = 40\n[agent]\nvariant = \"ff\"\nheads = \"D2\"\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nlr = -1\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/navw.toml"), ConfigError);
}

TEST(Config, OverridePrecedence) {
  const auto dir = navtest::temp_dir("precedence");
  put(dir / "c.toml", std::string(kTinyConfig) + "\n[output]\ndir = \"from_file\"\n");
  CliOptions o;
  o.config_path = (dir / "c.toml").string();
  ::unsetenv("NAVW_OUT");
  EXPECT_EQ(resolve_config(o).out_dir, "from_file");
  ::setenv("NAVW_OUT", "from_env", 1);
  EXPECT_EQ(resolve_config(o).out_dir, "from_env");
  o.out = "from_flag";
  o.seed = 99;
  o.workers = 5;
  o.steps = 1234;
  o.deterministic = true;
  const auto c = resolve_config(o);
  ::unsetenv("NAVW_OUT");
  EXPECT_EQ(c.out_dir, "from_flag");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.hp.n_workers, 5);
  EXPECT_EQ(c.max_agent_steps, 1234);
  EXPECT_TRUE(c.deterministic);
}

// ---------------------------------------------------------------- wire

TEST(Wire, GoldenFrames) {
  EXPECT_EQ(wire::encode(wire::make_reset(0x0102030405060708ULL)),
            (std::vector<std::uint8_t>{8, 0, 0, 0, 1, 8, 7, 6, 5, 4, 3, 2, 1}));
  EXPECT_EQ(wire::encode(wire::make_step(3)), (std::vector<std::uint8_t>{1, 0, 0, 0, 2, 3}));
  EXPECT_EQ(wire::encode(wire::make_err(101, "x")), (std::vector<std::uint8_t>{3, 0, 0, 0, 4, 101, 0, 'x'}));

  wire::Obs o;
  o.height = 1;
  o.width = 2;
  o.rgb = {1, 2, 3, 4, 5, 6};
  o.depth.assign(64, 0.0f);
  o.depth[0] = 1.5f;
  o.depth[63] = -2.0f;
  o.velocity = {0.25f, -0.5f, 0, 0.125f, 0, 0};
  o.prev_action = 7;
  o.prev_reward = 1.0f;
  o.reward = 10.0f;
  o.done = true;
  Le p;
  p.u16(1), p.u16(2), p.u8(0);
  for (auto b : o.rgb) p.u8(b);
  for (float d : o.depth) p.f32(d);
  for (float v : o.velocity) p.f32(v);
  p.u8(7), p.f32(1.0f), p.f32(10.0f), p.u8(1);
  Le frame;
  frame.u32(static_cast<std::uint32_t>(p.b.size()));
  frame.u8(3);
  frame.b.insert(frame.b.end(), p.b.begin(), p.b.end());
  const auto enc = wire::encode(wire::make_obs(o));
  EXPECT_EQ(enc, frame.b);
  EXPECT_EQ(p.b.size(), 5u + 6 + 64 * 4 + 24 + 1 + 4 + 4 + 1);

  std::size_t used = 0;
  const auto back = wire::decode(enc, used);
  ASSERT_TRUE(back);
  EXPECT_EQ(used, enc.size());
  EXPECT_EQ(wire::parse_obs(*back), o);
}

TEST(Wire, DecodeHandlesPartialAndBadHeaders) {
  const auto f = wire::encode(wire::make_reset(42));
  std::size_t used = 99;
  for (std::size_t n = 0; n < f.size(); ++n) {
    EXPECT_FALSE(wire::decode(std::span(f).first(n), used));
    EXPECT_EQ(used, 0u);
  }
  auto two = f;
  const auto s = wire::encode(wire::make_step(1));
  two.insert(two.end(), s.begin(), s.end());
  const auto m = wire::decode(two, used);
  ASSERT_TRUE(m);
  EXPECT_EQ(used, f.size());
  EXPECT_EQ(wire::parse_reset(*m), 42u);

  auto code_of = [](auto fn) -> int {
    try {
      fn();
    } catch (const wire::ProtocolError& e) {
      return e.code();
    }
    return -1;
  };
  const std::vector<std::uint8_t> bad_type{0, 0, 0, 0, 9};
  EXPECT_EQ(code_of([&] { wire::decode(bad_type, used); }), wire::kMalformed);
  const std::vector<std::uint8_t> huge{0xff, 0xff, 0xff, 0x7f, 1};
  EXPECT_EQ(code_of([&] { wire::decode(huge, used); }), wire::kMalformed);
  EXPECT_EQ(code_of([] { wire::parse_reset({wire::MsgType::kReset, {1, 2, 3}}); }), wire::kMalformed);
  EXPECT_EQ(code_of([] { wire::parse_step({wire::MsgType::kStep, {}}); }), wire::kMalformed);
  EXPECT_EQ(code_of([] { wire::parse_obs({wire::MsgType::kObs, {0, 1}}); }), wire::kMalformed);
  const auto err = wire::parse_err(wire::make_err(103, "done"));
  EXPECT_EQ(err.code, 103);
  EXPECT_EQ(err.message, "done");
}

TEST(EnvServer, ResetThenTenStepsGivesElevenObs) {
  const auto layout = world::generate_layout(world::MazeKind::kStaticSmall, 2);
  EnvServer server(layout, small_env());
  const int port = server.start(0);
  RawConn c(port);
  std::vector<std::uint8_t> out;
  const auto r = wire::encode(wire::make_reset(5));
  c.send_all(r);
  for (int i = 0; i < 10; ++i) c.send_all(wire::encode(wire::make_step(static_cast<std::uint8_t>(i % 8))));
  ::shutdown(c.fd, SHUT_WR);
  ASSERT_TRUE(c.read_to_close(out));
  int obs = 0;
  std::size_t off = 0, used = 0;
  while (auto m = wire::decode(std::span(out).subspan(off), used)) {
    EXPECT_EQ(m->type, wire::MsgType::kObs);
    const auto o = wire::parse_obs(*m);
    EXPECT_EQ(o.rgb.size(), 3u * 32 * 32);
    EXPECT_EQ(o.depth.size(), 64u);
    ++obs;
    off += used;
  }
  EXPECT_EQ(obs, 11);
  EXPECT_EQ(off, out.size());
  server.stop();
}

TEST(EnvServer, MatchesInProcessEnvironmentBitForBit) {
  const auto layout = world::generate_layout(world::MazeKind::kStaticSmall, 4);
  const auto env_cfg = small_env();
  EnvServer server(layout, env_cfg);
  const int port = server.start(0);
  EnvClient client;
  client.connect("127.0.0.1", port);
  world::MazeEnv local(layout, env_cfg);
  std::mt19937_64 rng(77);
  std::uint64_t seed = 1000;
  local.reset(seed);
  auto remote = client.reset(seed);
  EXPECT_EQ(remote, wire::observation_from_env(local, false, true));
  for (int t = 0; t < 500; ++t) {
    if (remote.done) {
      ++seed;
      local.reset(seed);
      remote = client.reset(seed);
      ASSERT_EQ(remote, wire::observation_from_env(local, false, true)) << t;
      continue;
    }
    const auto a = static_cast<std::uint8_t>(rng() % 8);
    local.step(world::Action{a});
    remote = client.step(a);
    ASSERT_EQ(remote, wire::observation_from_env(local, false, false)) << "step " << t;
  }
  client.close();
  server.stop();
}

TEST(EnvServer, ErrorCodesCloseTheSession) {
  const auto layout = world::generate_layout(world::MazeKind::kStaticMini, 1);
  EnvServer server(layout, small_env());
  const int port = server.start(0);

  auto expect_err = [&](const std::vector<wire::Message>& msgs, std::uint16_t code, int obs_first) {
    EnvClient c;
    c.connect("127.0.0.1", port);
    for (const auto& m : msgs) c.send_raw(wire::encode(m));
    for (int i = 0; i < obs_first; ++i) {
      auto m = c.read_message();
      ASSERT_TRUE(m);
      EXPECT_EQ(m->type, wire::MsgType::kObs);
    }
    auto m = c.read_message();
    ASSERT_TRUE(m);
    ASSERT_EQ(m->type, wire::MsgType::kErr);
    EXPECT_EQ(wire::parse_err(*m).code, code);
    EXPECT_FALSE(c.read_message());  // closed
  };
  expect_err({wire::make_step(0)}, wire::kStepBeforeReset, 0);
  expect_err({wire::make_reset(1), wire::make_step(9)}, wire::kBadAction, 1);
  expect_err({wire::make_reset(1), wire::make_step(8)}, wire::kBadAction, 1);
  expect_err({wire::make_reset(1), wire::make_err(1, "client err")}, wire::kMalformed, 1);

  EnvClient c;
  c.connect("127.0.0.1", port);
  c.reset(3);
  try {
    c.step(200);
    FAIL() << "expected ProtocolError";
  } catch (const wire::ProtocolError& e) {
    EXPECT_EQ(e.code(), wire::kBadAction);
  }
  server.stop();
}

TEST(EnvServer, StepAfterDoneIsRejected) {
  auto layout = world::generate_layout(world::MazeKind::kStaticMini, 1);
  layout.episode_budget = 8;
  EnvServer server(layout, small_env());
  EnvClient c;
  c.connect("127.0.0.1", server.start(0));
  c.reset(1);
  c.step(0);
  EXPECT_TRUE(c.step(0).done);
  try {
    c.step(0);
    FAIL();
  } catch (const wire::ProtocolError& e) {
    EXPECT_EQ(e.code(), wire::kStepAfterDone);
  }
  server.stop();
}

TEST(EnvServer, SurvivesRandomByteStreams) {
  const auto layout = world::generate_layout(world::MazeKind::kStaticMini, 1);
  EnvServer server(layout, small_env());
  const int port = server.start(0);
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint8_t> bytes(rng() % 64);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    // Half the streams start with a valid frame so later bytes reach deeper states.
    if (trial % 2) {
      auto r = wire::encode(wire::make_reset(trial));
      bytes.insert(bytes.begin(), r.begin(), r.end());
    }
    RawConn c(port);
    c.send_all(bytes);
    ::shutdown(c.fd, SHUT_WR);
    std::vector<std::uint8_t> out;
    ASSERT_TRUE(c.read_to_close(out)) << "trial " << trial << " hung";
    std::size_t off = 0, used = 0;
    while (auto m = wire::decode(std::span(out).subspan(off), used)) {
      ASSERT_TRUE(m->type == wire::MsgType::kObs || m->type == wire::MsgType::kErr);
      off += used;
    }
    ASSERT_EQ(off, out.size()) << "trailing partial frame, trial " << trial;
  }
  EnvClient ok;
  ok.connect("127.0.0.1", port);
  EXPECT_EQ(ok.reset(1).rgb.size(), 3u * 32 * 32);
  EXPECT_GE(server.sessions_started(), 301u);
  server.stop();
}

TEST(EnvServer, ConcurrentSessionsAreIndependent) {
  const auto layout = world::generate_layout(world::MazeKind::kStaticMini, 1);
  EnvServer server(layout, small_env());
  const int port = server.start(0);
  EnvClient a, b;
  a.connect("127.0.0.1", port);
  b.connect("127.0.0.1", port);
  a.reset(10);
  b.reset(10);
  for (int i = 0; i < 20; ++i) a.step(0);  // only a moves
  world::MazeEnv local(layout, small_env());
  local.reset(10);
  local.step(world::Action{1});
  EXPECT_EQ(b.step(1), wire::observation_from_env(local, false, false));
  server.stop();
}

// ---------------------------------------------------------------- render-map

TEST(RenderMap, OnePolylinePerRespawnSegment) {
  const auto layout = world::generate_layout(world::MazeKind::kStaticMini, 1);
  analysis::EpisodeLog log;
  log.goal_cell = 0;
  for (int i = 0; i < 30; ++i) {
    analysis::StepRecord s;
    s.step = i;
    s.position = {1.5 + 0.01 * i, 1.5};
    s.respawned = (i == 9 || i == 19);
    log.steps.push_back(s);
  }
  const auto segs = trajectory_segments(log);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[0].size(), 10u);
  EXPECT_EQ(segs[1].size(), 10u);
  EXPECT_EQ(segs[2].size(), 10u);
  const auto svg = render_map_svg(layout, &log);
  const std::regex poly("<polyline");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), poly), std::sregex_iterator()), 3);
  analysis::EpisodeLog none;
  EXPECT_TRUE(trajectory_segments(none).empty());
  const auto dir = navtest::temp_dir("render_map");
  write_map_png((dir / "m.png").string(), layout, &log);
  const auto png = slurp(dir / "m.png");
  ASSERT_GT(png.size(), 8u);
  EXPECT_EQ(png.substr(1, 3), "PNG");
}

// ---------------------------------------------------------------- CLI

TEST(Cli, DeterministicTrainIsByteIdentical) {
  const auto dir = navtest::temp_dir("cli_det");
  put(dir / "tiny.toml", kTinyConfig);
  for (const char* out : {"a", "b"})
    ASSERT_EQ(run_cli("train --config " + (dir / "tiny.toml").string() + " --deterministic -q --out " +
                          (dir / out).string(),
                      dir / (std::string(out) + ".log")),
              kExitOk)
        << slurp(dir / (std::string(out) + ".log"));
  for (const char* f : {"curve.csv", "final.navw", "summary.json", "ckpt_1000.navw"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  auto ca = load_config((dir / "a" / "config.toml").string());
  auto cb = load_config((dir / "b" / "config.toml").string());
  ca.out_dir = cb.out_dir;
  EXPECT_EQ(ca, cb);
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_GE(summary["agent_steps"].get<int>(), 2000);
  EXPECT_EQ(summary["architecture"], "Nav A3C+D2");
}

TEST(Cli, EvalAnalyzeReplayRenderPipeline) {
  const auto dir = navtest::temp_dir("cli_pipeline");
  put(dir / "tiny.toml", kTinyConfig);
  const std::string cfg = "--config " + (dir / "tiny.toml").string() + " --out " + (dir / "run").string();
  ASSERT_EQ(run_cli("train " + cfg + " --deterministic -q --steps 500", dir / "t.log"), kExitOk) << slurp(dir / "t.log");
  ASSERT_EQ(run_cli("eval " + cfg + " --seed 4", dir / "e.log"), kExitOk) << slurp(dir / "e.log");
  const auto metrics = nlohmann::json::parse(slurp(dir / "run" / "metrics.json"));
  for (const char* k : {"goals", "position_acc", "latency_first_s", "latency_rest_s", "score", "loop_f1", "auc"})
    EXPECT_TRUE(metrics.contains(k)) << k;
  EXPECT_TRUE(metrics["loop_f1"].is_null());  // no L head

  // Re-running eval rewrites identical outputs.
  const auto first = slurp(dir / "run" / "episodes.jsonl");
  ASSERT_EQ(run_cli("eval " + cfg + " --seed 4", dir / "e2.log"), kExitOk);
  EXPECT_EQ(slurp(dir / "run" / "episodes.jsonl"), first);

  ASSERT_EQ(run_cli("analyze " + cfg, dir / "a.log"), kExitOk) << slurp(dir / "a.log");
  EXPECT_TRUE(fs::exists(dir / "run" / "analysis.json"));
  EXPECT_TRUE(fs::exists(dir / "run" / "activations.csv"));

  ASSERT_EQ(run_cli("replay " + cfg + " --episode 1", dir / "r.log"), kExitOk) << slurp(dir / "r.log");
  EXPECT_TRUE(fs::exists(dir / "run" / "replay_1" / "frame_00000.png"));

  ASSERT_EQ(run_cli("render-map " + cfg + " --episode 0", dir / "m.log"), kExitOk) << slurp(dir / "m.log");
  EXPECT_TRUE(fs::exists(dir / "run" / "map_episode_0.svg"));
  EXPECT_TRUE(fs::exists(dir / "run" / "map_episode_0.png"));
}

TEST(Cli, ExitCodes) {
  const auto dir = navtest::temp_dir("cli_codes");
  put(dir / "tiny.toml", kTinyConfig);
  put(dir / "bad.toml", "[train]\nlr = 0.1\nbogus = 1\n");
  EXPECT_EQ(run_cli("train --config " + (dir / "bad.toml").string(), dir / "1.log"), kExitBadConfig);
  EXPECT_NE(slurp(dir / "1.log").find("line 3"), std::string::npos) << slurp(dir / "1.log");
  EXPECT_EQ(run_cli("train --config " + (dir / "missing.toml").string(), dir / "2.log"), kExitBadConfig);
  EXPECT_EQ(run_cli("eval --config " + (dir / "tiny.toml").string() + " --out " + (dir / "empty").string(),
                    dir / "3.log"),
            kExitNoCheckpoint);
  put(dir / "junk.navw", "not a checkpoint");
  EXPECT_EQ(run_cli("eval --config " + (dir / "tiny.toml").string() + " --checkpoint " +
                        (dir / "junk.navw").string() + " --out " + (dir / "j").string(),
                    dir / "4.log"),
            kExitNoCheckpoint);
  EXPECT_EQ(run_cli("frobnicate --config x", dir / "5.log"), kExitBadConfig);
  EXPECT_EQ(run_cli("--help", dir / "6.log"), kExitOk);
}
