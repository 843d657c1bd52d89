// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nav/analysis/episode_log.hpp"

namespace nav::analysis {

struct Latency {
  std::optional<double> first_s;  // mean time to the first goal
  std::optional<double> rest_s;   // mean interval between later goals
};

// Seconds are env steps / 60. Each goal event counts once in its mean;
// episodes without goals add nothing to first_s, with fewer than two nothing
// to rest_s.
Latency latency_metric(const std::vector<EpisodeLog>& logs);

// Episodes with at least one goal.
int goals_metric(const std::vector<EpisodeLog>& logs);
double mean_score(const std::vector<EpisodeLog>& logs);

// F1 of binary labels; 0 when precision + recall is 0. Throws DataError on
// length mismatch.
double loop_f1(std::span<const int> predicted, std::span<const int> truth);

struct Curve {
  std::vector<double> steps;
  std::vector<double> score;

  std::size_t size() const { return steps.size(); }
  // Throws DataError unless steps strictly increase and lengths agree.
  void validate() const;
};

// Piecewise-linear interpolation onto `grid` (clamped at the ends).
Curve resample(const Curve& c, std::span<const double> grid);
// Trapezoidal area under score(steps) divided by the step range. A single
// point returns its score.
double curve_auc(const Curve& c);

struct TopK {
  Curve mean;
  std::vector<std::size_t> chosen;  // indices into the input set, best first
  bool truncated = false;           // k exceeded the number of curves
};

// Picks the k curves with the best final score, resamples them onto the
// union of their step values within the common range, and averages.
TopK top_k_mean(const std::vector<Curve>& curves, std::size_t k = 5);

// CSV with header agent_steps,mean_episode_score,episodes_in_window,wall_clock_s.
struct CurveRow {
  std::int64_t agent_steps = 0;
  double mean_score = 0;
  int episodes = 0;
  double wall_clock_s = 0;
};
void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows);
std::vector<CurveRow> read_curve_csv(std::istream& in);
Curve to_curve(const std::vector<CurveRow>& rows);

struct MetricsReport {
  int episodes = 0;
  int goals = 0;
  std::optional<double> position_acc;
  std::optional<double> latency_first_s;
  std::optional<double> latency_rest_s;
  double score = 0;
  std::optional<double> loop_f1;
  std::optional<double> auc;
};
// JSON document; absent values are written as null.
std::string to_json(const MetricsReport& m);

}  // namespace nav::analysis
