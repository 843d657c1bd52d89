// SPDX-License-Identifier: Apache-2.0
#include "nav/analysis/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "nav/errors.hpp"
#include "nav/world/world.hpp"

namespace nav::analysis {

Latency latency_metric(const std::vector<EpisodeLog>& logs) {
  double first_sum = 0, rest_sum = 0;
  int first_n = 0, rest_n = 0;
  for (const auto& log : logs) {
    int prev = -1;
    for (const auto& s : log.steps) {
      for (int g = 0; g < s.goal_events; ++g) {
        if (prev < 0) {
          first_sum += s.env_step;
          ++first_n;
        } else {
          rest_sum += s.env_step - prev;
          ++rest_n;
        }
        prev = s.env_step;
      }
    }
  }
  Latency l;
  if (first_n) l.first_s = first_sum / first_n / world::kEnvStepsPerSecond;
  if (rest_n) l.rest_s = rest_sum / rest_n / world::kEnvStepsPerSecond;
  return l;
}

int goals_metric(const std::vector<EpisodeLog>& logs) {
  return static_cast<int>(
      std::count_if(logs.begin(), logs.end(), [](const EpisodeLog& l) { return l.goals() > 0; }));
}

double mean_score(const std::vector<EpisodeLog>& logs) {
  if (logs.empty()) return 0;
  double s = 0;
  for (const auto& l : logs) s += l.score;
  return s / static_cast<double>(logs.size());
}

double loop_f1(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw DataError("loop_f1: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(truth.size()) + " labels");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0;
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0;
}

void Curve::validate() const {
  if (steps.size() != score.size()) throw DataError("curve steps and scores differ in length");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (!(steps[i] > steps[i - 1])) throw DataError("curve steps must strictly increase");
}

Curve resample(const Curve& c, std::span<const double> grid) {
  c.validate();
  if (c.steps.empty()) throw DataError("cannot resample an empty curve");
  Curve out;
  out.steps.assign(grid.begin(), grid.end());
  out.score.reserve(grid.size());
  for (double x : grid) {
    if (x <= c.steps.front()) {
      out.score.push_back(c.score.front());
      continue;
    }
    if (x >= c.steps.back()) {
      out.score.push_back(c.score.back());
      continue;
    }
    const auto it = std::upper_bound(c.steps.begin(), c.steps.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - c.steps.begin());
    const double x0 = c.steps[i - 1], x1 = c.steps[i];
    const double w = (x - x0) / (x1 - x0);
    out.score.push_back(c.score[i - 1] + w * (c.score[i] - c.score[i - 1]));
  }
  return out;
}

double curve_auc(const Curve& c) {
  c.validate();
  if (c.steps.empty()) throw DataError("AUC of an empty curve");
  if (c.steps.size() == 1) return c.score.front();
  double area = 0;
  for (std::size_t i = 1; i < c.steps.size(); ++i)
    area += 0.5 * (c.score[i] + c.score[i - 1]) * (c.steps[i] - c.steps[i - 1]);
  return area / (c.steps.back() - c.steps.front());
}

TopK top_k_mean(const std::vector<Curve>& curves, std::size_t k) {
  if (curves.empty()) throw DataError("top_k_mean of no curves");
  if (k == 0) throw ConfigError("top_k_mean needs k >= 1");
  for (const auto& c : curves) {
    c.validate();
    if (c.steps.empty()) throw DataError("top_k_mean: empty curve");
  }
  TopK out;
  out.truncated = k > curves.size();
  k = std::min(k, curves.size());
  std::vector<std::size_t> order(curves.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return curves[a].score.back() > curves[b].score.back();
  });
  out.chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));

  double lo = -1e300, hi = 1e300;
  std::vector<double> grid;
  for (std::size_t i : out.chosen) {
    lo = std::max(lo, curves[i].steps.front());
    hi = std::min(hi, curves[i].steps.back());
    grid.insert(grid.end(), curves[i].steps.begin(), curves[i].steps.end());
  }
  if (lo > hi) throw DataError("top_k_mean: the selected curves do not overlap");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::erase_if(grid, [&](double x) { return x < lo || x > hi; });

  out.mean.steps = grid;
  out.mean.score.assign(grid.size(), 0.0);
  for (std::size_t i : out.chosen) {
    const Curve r = resample(curves[i], grid);
    for (std::size_t j = 0; j < grid.size(); ++j) out.mean.score[j] += r.score[j];
  }
  for (double& s : out.mean.score) s /= static_cast<double>(k);
  return out;
}

void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "agent_steps,mean_episode_score,episodes_in_window,wall_clock_s\n";
  for (const auto& r : rows) {
    std::ostringstream line;
    line << std::setprecision(17) << r.agent_steps << ',' << r.mean_score << ',' << r.episodes
         << ',' << r.wall_clock_s;
    out << line.str() << '\n';
  }
}

std::vector<CurveRow> read_curve_csv(std::istream& in) {
  std::vector<CurveRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line.rfind("agent_steps,", 0) != 0) throw DataError("curve csv: missing header");
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ss(line);
    CurveRow r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> r.agent_steps >> c1 >> r.mean_score >> c2 >> r.episodes >> c3 >> r.wall_clock_s) ||
        c1 != ',' || c2 != ',' || c3 != ',')
      throw DataError("curve csv line " + std::to_string(lineno) + ": malformed row");
    rows.push_back(r);
  }
  return rows;
}

Curve to_curve(const std::vector<CurveRow>& rows) {
  Curve c;
  for (const auto& r : rows) {
    c.steps.push_back(static_cast<double>(r.agent_steps));
    c.score.push_back(r.mean_score);
  }
  return c;
}

std::string to_json(const MetricsReport& m) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"episodes", m.episodes},
            {"goals", m.goals},
            {"position_acc", opt(m.position_acc)},
            {"latency_first_s", opt(m.latency_first_s)},
            {"latency_rest_s", opt(m.latency_rest_s)},
            {"score", m.score},
            {"loop_f1", opt(m.loop_f1)},
            {"auc", opt(m.auc)}};
  return j.dump(2) + "\n";
}

}  // namespace nav::analysis
