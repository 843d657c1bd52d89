// SPDX-License-Identifier: Apache-2.0
#include "nav/analysis/episode_log.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "nav/errors.hpp"

namespace nav::analysis {

using nlohmann::json;

int EpisodeLog::goals() const {
  int n = 0;
  for (const auto& s : steps) n += s.goal_events;
  return n;
}

bool EpisodeLog::reward_conserved() const {
  double total = 0;
  for (const auto& s : steps) {
    total += s.reward;
    const double fruit = s.reward - 10.0 * s.goal_events;
    if (fruit < -1e-9 || std::abs(fruit - std::round(fruit)) > 1e-9) return false;
  }
  return std::abs(total - score) <= 1e-9 * std::max(1.0, std::abs(score));
}

void write_episode_log(std::ostream& out, const EpisodeLog& log) {
  json head = {{"type", "episode"},          {"maze_kind", log.maze_kind},
               {"layout_seed", log.layout_seed}, {"episode_seed", log.episode_seed},
               {"episode", log.episode},      {"goal_cell", log.goal_cell},
               {"score", log.score},          {"steps", log.steps.size()}};
  out << head.dump() << '\n';
  for (const auto& s : log.steps) {
    json j = {{"type", "step"},       {"step", s.step},         {"env_step", s.env_step},
              {"x", s.position[0]},   {"y", s.position[1]},     {"cell", s.cell},
              {"action", s.action},   {"reward", s.reward},     {"goal_events", s.goal_events},
              {"respawned", s.respawned}, {"value", s.value},   {"entropy", s.entropy},
              {"loop_label", s.loop_label}};
    if (s.loop_logit) j["loop_logit"] = *s.loop_logit;
    if (!s.hidden.empty()) j["hidden"] = s.hidden;
    out << j.dump() << '\n';
  }
}

void write_episode_logs(std::ostream& out, const std::vector<EpisodeLog>& logs) {
  for (const auto& l : logs) write_episode_log(out, l);
}

std::vector<EpisodeLog> read_episode_logs(std::istream& in) {
  std::vector<EpisodeLog> logs;
  std::string line;
  int lineno = 0;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "episode") {
        if (!logs.empty() && logs.back().steps.size() != expected)
          throw DataError("episode " + std::to_string(logs.back().episode) + " declares " +
                          std::to_string(expected) + " steps but has " +
                          std::to_string(logs.back().steps.size()));
        EpisodeLog e;
        e.maze_kind = j.at("maze_kind");
        e.layout_seed = j.at("layout_seed");
        e.episode_seed = j.at("episode_seed");
        e.episode = j.at("episode");
        e.goal_cell = j.at("goal_cell");
        e.score = j.at("score");
        expected = j.at("steps");
        logs.push_back(std::move(e));
      } else if (type == "step") {
        if (logs.empty()) throw DataError("step before any episode header");
        StepRecord s;
        s.step = j.at("step");
        s.env_step = j.at("env_step");
        s.position = {j.at("x").get<double>(), j.at("y").get<double>()};
        s.cell = j.at("cell");
        s.action = j.at("action");
        s.reward = j.at("reward");
        s.goal_events = j.at("goal_events");
        s.respawned = j.at("respawned");
        s.value = j.at("value");
        s.entropy = j.at("entropy");
        s.loop_label = j.at("loop_label");
        if (j.contains("loop_logit")) s.loop_logit = j["loop_logit"].get<double>();
        if (j.contains("hidden")) s.hidden = j["hidden"].get<std::vector<float>>();
        logs.back().steps.push_back(std::move(s));
      } else {
        throw DataError("unknown record type '" + type + "'");
      }
    } catch (const DataError& e) {
      throw DataError("episode log line " + std::to_string(lineno) + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError("episode log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!logs.empty() && logs.back().steps.size() != expected)
    throw DataError("last episode is truncated");
  return logs;
}

}  // namespace nav::analysis
