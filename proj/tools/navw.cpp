// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "CLI11.hpp"
#include "nav/runner/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"navw: navigation agents in procedural mazes"};
  app.require_subcommand(1, 1);
  nav::runner::CliOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "experiment config file")->required();
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--workers", opt.workers, "number of A3C workers")->check(CLI::Range(1, 1024));
    sub->add_flag("--deterministic", opt.deterministic, "single-threaded, reproducible run");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--steps", opt.steps, "agent-step budget")->check(CLI::PositiveNumber);
    sub->add_option("--checkpoint-every", opt.checkpoint_every, "agent steps between checkpoints");
    sub->add_option("--port", opt.port, "server port")->check(CLI::Range(0, 65535));
    sub->add_flag("-q,--quiet", opt.quiet, "suppress progress output");
  };

  auto* train = app.add_subcommand("train", "train an agent, write curves and checkpoints");
  auto* eval = app.add_subcommand("eval", "run test episodes and write the metrics report");
  auto* analyze = app.add_subcommand("analyze", "recompute metrics from existing logs");
  auto* replay = app.add_subcommand("replay", "re-render a logged episode to PNG frames");
  auto* map = app.add_subcommand("render-map", "draw the maze and a logged trajectory");
  auto* serve = app.add_subcommand("serve-env", "serve the environment over TCP");
  for (auto* sub : {train, eval, analyze, replay, map, serve}) add_common(sub);
  eval->add_option("--checkpoint", opt.checkpoint, "checkpoint file (default <out>/final.navw)");
  for (auto* sub : {analyze, replay, map}) {
    sub->add_option("--log", opt.log, "episode log (default <out>/episodes.jsonl)");
    sub->add_option("--episode", opt.episode, "episode index within the log");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), nav::runner::kExitBadConfig);
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return nav::runner::run_command(command, opt, std::cout, std::cerr);
}
