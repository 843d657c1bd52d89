// SPDX-License-Identifier: Apache-2.0
#include "nav/runner/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "nav/agent/network.hpp"
#include "nav/analysis/decoder.hpp"
#include "nav/analysis/evaluation.hpp"
#include "nav/analysis/metrics.hpp"
#include "nav/autodiff/checkpoint.hpp"
#include "nav/errors.hpp"
#include "nav/runner/env_server.hpp"
#include "nav/runner/render_map.hpp"
#include "nav/train/trainer.hpp"

namespace nav::runner {

namespace fs = std::filesystem;

namespace {

struct MissingCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(path.string() + ": cannot open for writing");
  f << text;
  if (!f) throw DataError(path.string() + ": write failed");
}

std::string curve_csv(const std::vector<train::CurvePoint>& points) {
  std::vector<analysis::CurveRow> rows;
  for (const auto& p : points) rows.push_back({p.agent_steps, p.mean_score, p.episodes, p.wall_clock_s});
  std::ostringstream o;
  analysis::write_curve_csv(o, rows);
  return o.str();
}

nlohmann::json hp_json(const train::HyperParams& hp) {
  return {{"lr", hp.lr},           {"beta_entropy", hp.beta_entropy}, {"beta_d1", hp.beta_d1},
          {"beta_d2", hp.beta_d2}, {"beta_l", hp.beta_l},             {"beta_r", hp.beta_r},
          {"gamma", hp.gamma},     {"chunk_len", hp.chunk_len},       {"workers", hp.n_workers}};
}

ExperimentConfig replica_config(const ExperimentConfig& base, int i, const train::HyperParams& hp) {
  ExperimentConfig c = base;
  c.sweep = 0;
  c.hp = hp;
  c.seed = train::derive_seed(base.seed, 0x5eedULL, static_cast<std::uint64_t>(i));
  c.out_dir = (fs::path(base.out_dir) / ("replica_" + std::to_string(i))).string();
  return c;
}

// One training run into cfg.out_dir. Returns the curve.
std::vector<train::CurvePoint> train_one(const ExperimentConfig& cfg, bool quiet, std::ostream& out) {
  fs::create_directories(cfg.out_dir);
  write_file(fs::path(cfg.out_dir) / "config.toml", serialize_config(cfg));
  train::TrainConfig tc;
  tc.layout = make_layout(cfg);
  tc.env = cfg.env;
  tc.arch = cfg.arch;
  tc.hp = cfg.hp;
  tc.max_agent_steps = cfg.max_agent_steps;
  tc.window_env_steps = cfg.window_env_steps;
  tc.seed = cfg.seed;
  tc.deterministic = cfg.deterministic;
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.stop_score = cfg.stop_score;
  std::mutex out_mu;
  tc.on_curve_point = [&](const train::CurvePoint& p) {
    if (quiet) return;
    std::lock_guard lock(out_mu);
    out << "steps " << p.agent_steps << "  score " << std::fixed << std::setprecision(2)
        << p.mean_score << "  episodes " << p.episodes << "  entropy " << std::setprecision(3)
        << p.mean_entropy << std::defaultfloat << '\n';
    out.flush();
  };
  tc.on_checkpoint = [&](std::int64_t steps, const ad::ParamVector<float>& params) {
    ad::save_checkpoint(fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(steps) + ".navw"), params);
  };
  tc.on_incident = [&](const std::string& msg) {
    std::lock_guard lock(out_mu);
    out << "incident: " << msg << '\n';
  };
  const auto result = train::train(tc);
  ad::save_checkpoint(fs::path(cfg.out_dir) / "final.navw", result.params);
  write_file(fs::path(cfg.out_dir) / "curve.csv", curve_csv(result.curve));
  nlohmann::json summary = {{"agent_steps", result.agent_steps},
                            {"env_steps", result.env_steps},
                            {"episodes", result.episodes},
                            {"incidents", result.incidents},
                            {"hyperparams", hp_json(cfg.hp)},
                            {"architecture", cfg.arch.display_name()}};
  summary["steps_to_threshold"] =
      result.steps_to_threshold ? nlohmann::json(*result.steps_to_threshold) : nlohmann::json(nullptr);
  if (!result.curve.empty()) {
    analysis::Curve c;
    for (const auto& p : result.curve) {
      c.steps.push_back(static_cast<double>(p.agent_steps));
      c.score.push_back(p.mean_score);
    }
    summary["auc"] = analysis::curve_auc(c);
    summary["final_score"] = c.score.back();
  }
  write_file(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
  if (!quiet)
    out << "trained " << result.agent_steps << " agent steps, " << result.episodes
        << " episodes -> " << cfg.out_dir << '\n';
  return result.curve;
}

int cmd_train(const ExperimentConfig& cfg, const CliOptions& opt, std::ostream& out) {
  if (cfg.sweep == 0) {
    train_one(cfg, opt.quiet, out);
    return kExitOk;
  }
  std::mt19937_64 rng(train::derive_seed(cfg.seed, 0x5a3bULL));
  std::vector<analysis::Curve> curves;
  for (int i = 0; i < cfg.sweep; ++i) {
    const auto rc = replica_config(cfg, i, train::sample_hyperparams(rng, cfg.hp));
    if (!opt.quiet) out << "replica " << i << ": lr " << rc.hp.lr << " chunk " << rc.hp.chunk_len << '\n';
    const auto points = train_one(rc, opt.quiet, out);
    analysis::Curve c;
    for (const auto& p : points) {
      c.steps.push_back(static_cast<double>(p.agent_steps));
      c.score.push_back(p.mean_score);
    }
    if (!c.steps.empty()) curves.push_back(std::move(c));
  }
  if (!curves.empty()) {
    const auto top = analysis::top_k_mean(curves, 5);
    std::vector<analysis::CurveRow> rows;
    for (std::size_t i = 0; i < top.mean.size(); ++i)
      rows.push_back({static_cast<std::int64_t>(top.mean.steps[i]), top.mean.score[i], 0, 0.0});
    std::ostringstream o;
    analysis::write_curve_csv(o, rows);
    write_file(fs::path(cfg.out_dir) / "top5_curve.csv", o.str());
    if (top.truncated && !opt.quiet)
      out << "warning: fewer than 5 replicas produced curves; averaged all of them\n";
  }
  return kExitOk;
}

ad::ParamVector<float> load_agent(const agent::Network<float>& net, const std::string& path) {
  if (!fs::exists(path)) throw MissingCheckpoint("checkpoint not found: " + path);
  ad::ParamVector<float> params = net.make_params();
  try {
    ad::load_checkpoint(path, params);
  } catch (const DataError& e) {
    throw MissingCheckpoint(path + ": " + e.what());
  }
  return params;
}

std::optional<double> auc_from(const fs::path& curve_path) {
  std::ifstream f(curve_path);
  if (!f) return std::nullopt;
  const auto rows = analysis::read_curve_csv(f);
  if (rows.empty()) return std::nullopt;
  return analysis::curve_auc(analysis::to_curve(rows));
}

analysis::MetricsReport metrics_for(const agent::ArchitectureSpec& spec,
                                    const world::MazeLayout& layout,
                                    const std::vector<analysis::EpisodeLog>& logs,
                                    const fs::path& out_dir) {
  analysis::MetricsReport m;
  m.episodes = static_cast<int>(logs.size());
  m.goals = analysis::goals_metric(logs);
  m.score = analysis::mean_score(logs);
  const auto lat = analysis::latency_metric(logs);
  m.latency_first_s = lat.first_s;
  m.latency_rest_s = lat.rest_s;
  if (spec.heads.loop) {
    const auto pairs = analysis::loop_pairs(logs);
    if (!pairs.truth.empty()) m.loop_f1 = analysis::loop_f1(pairs.predicted, pairs.truth);
  }
  const bool has_hidden = !logs.empty() && !logs.front().steps.empty() &&
                          !logs.front().steps.front().hidden.empty();
  if (has_hidden) {
    try {
      const auto data = analysis::dataset_from_logs(logs);
      m.position_acc =
          analysis::train_position_decoder(data, layout.num_floor_cells()).heldout_accuracy;
    } catch (const DataError&) {
      // Too few episodes or cells for a held-out split; leave it absent.
    }
  }
  m.auc = auc_from(out_dir / "curve.csv");
  return m;
}

std::vector<analysis::EpisodeLog> read_logs(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError(path + ": cannot open episode log");
  return analysis::read_episode_logs(f);
}

int cmd_eval(const ExperimentConfig& cfg, const CliOptions& opt, std::ostream& out) {
  const agent::Network<float> net(cfg.arch);
  const std::string path =
      opt.checkpoint.empty() ? (fs::path(cfg.out_dir) / "final.navw").string() : opt.checkpoint;
  const auto params = load_agent(net, path);
  const auto layout = make_layout(cfg);
  analysis::EvalOptions eo;
  eo.episodes = cfg.eval_episodes;
  eo.seed = cfg.seed;
  eo.record_hidden = cfg.arch.recurrent();
  const auto logs = analysis::run_episodes(net, params, layout, cfg.env, eo);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream f(fs::path(cfg.out_dir) / "episodes.jsonl", std::ios::binary);
    analysis::write_episode_logs(f, logs);
  }
  const auto report = metrics_for(cfg.arch, layout, logs, cfg.out_dir);
  const std::string json = analysis::to_json(report);
  write_file(fs::path(cfg.out_dir) / "metrics.json", json);
  out << json;
  return kExitOk;
}

int cmd_analyze(const ExperimentConfig& cfg, const CliOptions& opt, std::ostream& out) {
  const std::string path =
      opt.log.empty() ? (fs::path(cfg.out_dir) / "episodes.jsonl").string() : opt.log;
  const auto logs = read_logs(path);
  const auto layout = make_layout(cfg);
  auto report = metrics_for(cfg.arch, layout, logs, cfg.out_dir);

  // Sweep directories: top-5 mean curve and its AUC.
  std::vector<analysis::Curve> curves;
  for (int i = 0;; ++i) {
    const fs::path p = fs::path(cfg.out_dir) / ("replica_" + std::to_string(i)) / "curve.csv";
    if (!fs::exists(p)) break;
    std::ifstream f(p);
    const auto rows = analysis::read_curve_csv(f);
    if (!rows.empty()) curves.push_back(analysis::to_curve(rows));
  }
  if (!curves.empty() && !report.auc) report.auc = analysis::curve_auc(analysis::top_k_mean(curves, 5).mean);

  const std::string json = analysis::to_json(report);
  write_file(fs::path(cfg.out_dir) / "analysis.json", json);
  const bool has_hidden = !logs.empty() && !logs.front().steps.empty() &&
                          !logs.front().steps.front().hidden.empty();
  if (has_hidden && cfg.arch.recurrent()) {
    std::ofstream f(fs::path(cfg.out_dir) / "activations.csv", std::ios::binary);
    analysis::export_activations(cfg.arch, logs, f);
  }
  out << json;
  return kExitOk;
}

const analysis::EpisodeLog& pick_episode(const std::vector<analysis::EpisodeLog>& logs,
                                         std::optional<int> episode) {
  if (logs.empty()) throw DataError("episode log is empty");
  const int want = episode.value_or(logs.front().episode);
  for (const auto& l : logs)
    if (l.episode == want) return l;
  throw DataError("episode " + std::to_string(want) + " is not in the log");
}

int cmd_replay(const ExperimentConfig& cfg, const CliOptions& opt, std::ostream& out) {
  const std::string path =
      opt.log.empty() ? (fs::path(cfg.out_dir) / "episodes.jsonl").string() : opt.log;
  const auto logs = read_logs(path);
  const auto& log = pick_episode(logs, opt.episode);
  world::MazeEnv env(make_layout(cfg), cfg.env);
  env.reset(log.episode_seed);
  const fs::path dir = fs::path(cfg.out_dir) / ("replay_" + std::to_string(log.episode));
  fs::create_directories(dir);
  auto dump = [&](int t) {
    const auto& fr = env.observation().frame;
    const std::size_t plane = static_cast<std::size_t>(fr.width) * fr.height;
    std::vector<std::uint8_t> rgb(3 * plane);
    for (std::size_t i = 0; i < plane; ++i)
      for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = fr.rgb[c * plane + i];
    std::ostringstream name;
    name << "frame_" << std::setw(5) << std::setfill('0') << t << ".png";
    write_png((dir / name.str()).string(), fr.width, fr.height, rgb);
  };
  int t = 0;
  for (const auto& s : log.steps) {
    const auto gt = world::ground_truth_position(env.state(), env.layout());
    if (gt.p != s.position)
      throw DataError("replay diverged from the log at step " + std::to_string(t));
    dump(t++);
    env.step(world::Action{s.action});
    if (env.last_step().reward != s.reward)
      throw DataError("replay reward differs from the log at step " + std::to_string(t - 1));
  }
  dump(t);
  out << "replayed episode " << log.episode << ": " << log.steps.size()
      << " steps match the log; frames in " << dir.string() << '\n';
  return kExitOk;
}

int cmd_render_map(const ExperimentConfig& cfg, const CliOptions& opt, std::ostream& out) {
  const auto layout = make_layout(cfg);
  std::vector<analysis::EpisodeLog> logs;
  const analysis::EpisodeLog* log = nullptr;
  const std::string path =
      opt.log.empty() ? (fs::path(cfg.out_dir) / "episodes.jsonl").string() : opt.log;
  if (!opt.log.empty() || fs::exists(path)) {
    logs = read_logs(path);
    log = &pick_episode(logs, opt.episode);
  }
  fs::create_directories(cfg.out_dir);
  const std::string stem = log ? "map_episode_" + std::to_string(log->episode) : "map";
  write_file(fs::path(cfg.out_dir) / (stem + ".svg"), render_map_svg(layout, log));
  write_map_png((fs::path(cfg.out_dir) / (stem + ".png")).string(), layout, log);
  out << "wrote " << (fs::path(cfg.out_dir) / stem).string() << ".{svg,png}\n";
  return kExitOk;
}

int cmd_serve_env(const ExperimentConfig& cfg, std::ostream& out) {
  EnvServer server(make_layout(cfg), cfg.env, cfg.raw_depth);
  const int port = server.start(cfg.port, "0.0.0.0");
  out << "serving " << world::to_string(cfg.maze_kind) << " on port " << port << std::endl;
  server.wait();
  return kExitOk;
}

}  // namespace

ExperimentConfig resolve_config(const CliOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(opt.config_path);
  if (const char* env_out = std::getenv("NAVW_OUT"); env_out && *env_out) cfg.out_dir = env_out;
  if (opt.out) cfg.out_dir = *opt.out;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.workers) cfg.hp.n_workers = *opt.workers;
  if (opt.deterministic) cfg.deterministic = true;
  if (opt.steps) cfg.max_agent_steps = *opt.steps;
  if (opt.checkpoint_every) cfg.checkpoint_every = *opt.checkpoint_every;
  if (opt.port) cfg.port = *opt.port;
  cfg.validate();
  return cfg;
}

int run_command(const std::string& command, const CliOptions& opt, std::ostream& out,
                std::ostream& err) {
  try {
    const ExperimentConfig cfg = resolve_config(opt);
    if (command == "train") return cmd_train(cfg, opt, out);
    if (command == "eval") return cmd_eval(cfg, opt, out);
    if (command == "analyze") return cmd_analyze(cfg, opt, out);
    if (command == "replay") return cmd_replay(cfg, opt, out);
    if (command == "render-map") return cmd_render_map(cfg, opt, out);
    if (command == "serve-env") return cmd_serve_env(cfg, out);
    err << "unknown command '" << command << "'\n";
    return kExitBadConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const MissingCheckpoint& e) {
    err << "error: " << e.what() << '\n';
    return kExitNoCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace nav::runner
