// SPDX-License-Identifier: Apache-2.0
#include "nav/runner/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "nav/errors.hpp"

namespace nav::runner {

namespace {

using Value = std::variant<std::int64_t, double, bool, std::string>;

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, p);
  // Keep reals recognisable as reals.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

Value parse_value(const std::string& raw, int line) {
  if (raw.empty()) fail(line, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        ++i;
        out += raw[i] == 'n' ? '\n' : raw[i];
      } else if (raw[i] == '"') {
        fail(line, "unexpected quote inside string");
      } else {
        out += raw[i];
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  std::int64_t iv = 0;
  auto [pi, ei] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
  if (ei == std::errc() && pi == raw.data() + raw.size()) return iv;
  double dv = 0;
  auto [pd, ed] = std::from_chars(raw.data(), raw.data() + raw.size(), dv);
  if (ed == std::errc() && pd == raw.data() + raw.size()) return dv;
  fail(line, "cannot parse value '" + raw + "'");
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

struct Entry {
  Value value;
  int line;
};

// One config key: how to apply a parsed value and how to print the current
// one. `emit` returns nullopt for keys left out of the serialised form.
struct Field {
  std::string key;  // section.name
  std::function<void(ExperimentConfig&, const Value&, int line)> apply;
  std::function<std::optional<std::string>(const ExperimentConfig&)> emit;
};

std::int64_t as_int(const Value& v, int line) {
  if (auto p = std::get_if<std::int64_t>(&v)) return *p;
  fail(line, "expected an integer");
}
double as_real(const Value& v, int line) {
  if (auto p = std::get_if<double>(&v)) return *p;
  if (auto p = std::get_if<std::int64_t>(&v)) return static_cast<double>(*p);
  fail(line, "expected a number");
}
bool as_bool(const Value& v, int line) {
  if (auto p = std::get_if<bool>(&v)) return *p;
  fail(line, "expected true or false");
}
const std::string& as_str(const Value& v, int line) {
  if (auto p = std::get_if<std::string>(&v)) return *p;
  fail(line, "expected a quoted string");
}
std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

template <typename Get>
Field int_ref(std::string key, Get get) {
  return {key,
          [get](ExperimentConfig& c, const Value& v, int line) {
            auto& ref = get(c);
            ref = static_cast<std::remove_reference_t<decltype(ref)>>(as_int(v, line));
          },
          [get](const ExperimentConfig& c) -> std::optional<std::string> {
            return std::to_string(get(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Get>
Field real_ref(std::string key, Get get) {
  return {key, [get](ExperimentConfig& c, const Value& v, int line) { get(c) = as_real(v, line); },
          [get](const ExperimentConfig& c) -> std::optional<std::string> {
            return format_double(get(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Get>
Field bool_ref(std::string key, Get get) {
  return {key, [get](ExperimentConfig& c, const Value& v, int line) { get(c) = as_bool(v, line); },
          [get](const ExperimentConfig& c) -> std::optional<std::string> {
            return get(const_cast<ExperimentConfig&>(c)) ? "true" : "false";
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back({"maze.kind",
                 [](C& c, const Value& x, int line) {
                   auto k = world::parse_maze_kind(as_str(x, line));
                   if (!k) fail(line, "unknown maze kind '" + as_str(x, line) + "'");
                   c.maze_kind = *k;
                 },
                 [](const C& c) -> std::optional<std::string> {
                   return quote(std::string(world::to_string(c.maze_kind)));
                 }});
    v.push_back(int_ref("maze.seed", [](C& c) -> auto& { return c.maze_seed; }));
    v.push_back({"maze.layout_file",
                 [](C& c, const Value& x, int line) { c.layout_file = as_str(x, line); },
                 [](const C& c) -> std::optional<std::string> {
                   if (c.layout_file.empty()) return std::nullopt;
                   return quote(c.layout_file);
                 }});

    v.push_back(real_ref("physics.accel", [](C& c) -> auto& { return c.env.physics.accel; }));
    v.push_back(real_ref("physics.max_speed", [](C& c) -> auto& { return c.env.physics.max_speed; }));
    v.push_back(real_ref("physics.rotate_step", [](C& c) -> auto& { return c.env.physics.rotate_step; }));
    v.push_back(real_ref("physics.angular_accel", [](C& c) -> auto& { return c.env.physics.angular_accel; }));
    v.push_back(real_ref("physics.damping", [](C& c) -> auto& { return c.env.physics.damping; }));
    v.push_back(int_ref("render.width", [](C& c) -> auto& { return c.env.render.width; }));
    v.push_back(int_ref("render.height", [](C& c) -> auto& { return c.env.render.height; }));
    v.push_back(real_ref("render.fov", [](C& c) -> auto& { return c.env.render.fov; }));
    v.push_back(real_ref("render.max_range", [](C& c) -> auto& { return c.env.render.max_range; }));
    v.push_back(real_ref("render.near_plane", [](C& c) -> auto& { return c.env.render.near_plane; }));

    v.push_back({"agent.variant",
                 [](C& c, const Value& x, int line) {
                   auto k = agent::parse_variant(as_str(x, line));
                   if (!k) fail(line, "unknown variant '" + as_str(x, line) + "' (ff, lstm, nav)");
                   c.arch.variant = *k;
                 },
                 [](const C& c) -> std::optional<std::string> {
                   return quote(std::string(agent::to_string(c.arch.variant)));
                 }});
    v.push_back({"agent.input",
                 [](C& c, const Value& x, int line) {
                   auto k = agent::parse_input_mode(as_str(x, line));
                   if (!k) fail(line, "unknown input mode '" + as_str(x, line) + "' (rgb, rgbd)");
                   c.arch.input_mode = *k;
                 },
                 [](const C& c) -> std::optional<std::string> {
                   return quote(std::string(agent::to_string(c.arch.input_mode)));
                 }});
    v.push_back({"agent.heads",
                 [](C& c, const Value& x, int line) {
                   auto h = agent::parse_heads(as_str(x, line));
                   if (!h) fail(line, "bad head list '" + as_str(x, line) + "' (e.g. \"D1D2L\")");
                   c.arch.heads = *h;
                 },
                 [](const C& c) -> std::optional<std::string> {
                   return quote(agent::heads_string(c.arch.heads));
                 }});
    v.push_back({"agent.depth_mode",
                 [](C& c, const Value& x, int line) {
                   auto k = agent::parse_depth_mode(as_str(x, line));
                   if (!k) fail(line, "unknown depth mode '" + as_str(x, line) + "'");
                   c.arch.depth_mode = *k;
                 },
                 [](const C& c) -> std::optional<std::string> {
                   return quote(std::string(agent::to_string(c.arch.depth_mode)));
                 }});
    v.push_back(int_ref("agent.lstm1_width", [](C& c) -> auto& { return c.arch.lstm1_width; }));
    v.push_back(int_ref("agent.lstm2_width", [](C& c) -> auto& { return c.arch.lstm2_width; }));
    v.push_back(int_ref("agent.fc_width", [](C& c) -> auto& { return c.arch.fc_width; }));
    v.push_back(int_ref("agent.aux_hidden", [](C& c) -> auto& { return c.arch.aux_hidden; }));

    v.push_back({"train.hyperparams",
                 [](C& c, const Value& x, int line) {
                   const std::string& s = as_str(x, line);
                   if (s == "explicit") {
                     c.sweep = 0;
                   } else if (s.rfind("sample:", 0) == 0) {
                     int n = 0;
                     auto [p, ec] = std::from_chars(s.data() + 7, s.data() + s.size(), n);
                     if (ec != std::errc() || p != s.data() + s.size() || n <= 0)
                       fail(line, "expected \"sample:N\" with N > 0");
                     if (n > kMaxSweep)
                       fail(line, "sweep of " + std::to_string(n) + " exceeds the cap of " +
                                      std::to_string(kMaxSweep));
                     c.sweep = n;
                   } else {
                     fail(line, "hyperparams must be \"explicit\" or \"sample:N\"");
                   }
                 },
                 [](const C& c) -> std::optional<std::string> {
                   return quote(c.sweep > 0 ? "sample:" + std::to_string(c.sweep) : "explicit");
                 }});
    v.push_back(real_ref("train.lr", [](C& c) -> auto& { return c.hp.lr; }));
    v.push_back(real_ref("train.beta_entropy", [](C& c) -> auto& { return c.hp.beta_entropy; }));
    v.push_back(real_ref("train.beta_d1", [](C& c) -> auto& { return c.hp.beta_d1; }));
    v.push_back(real_ref("train.beta_d2", [](C& c) -> auto& { return c.hp.beta_d2; }));
    v.push_back(real_ref("train.beta_l", [](C& c) -> auto& { return c.hp.beta_l; }));
    v.push_back(real_ref("train.beta_r", [](C& c) -> auto& { return c.hp.beta_r; }));
    v.push_back(real_ref("train.gamma", [](C& c) -> auto& { return c.hp.gamma; }));
    v.push_back(int_ref("train.chunk_len", [](C& c) -> auto& { return c.hp.chunk_len; }));
    v.push_back(bool_ref("train.reward_clip", [](C& c) -> auto& { return c.hp.reward_clip; }));
    v.push_back(real_ref("train.reward_scale", [](C& c) -> auto& { return c.hp.reward_scale; }));
    v.push_back(int_ref("train.workers", [](C& c) -> auto& { return c.hp.n_workers; }));
    v.push_back(real_ref("train.value_coef", [](C& c) -> auto& { return c.hp.value_coef; }));
    v.push_back(real_ref("train.grad_clip", [](C& c) -> auto& { return c.hp.grad_clip; }));
    v.push_back(int_ref("train.seed", [](C& c) -> auto& { return c.seed; }));
    v.push_back(bool_ref("train.deterministic", [](C& c) -> auto& { return c.deterministic; }));
    v.push_back(int_ref("train.max_agent_steps", [](C& c) -> auto& { return c.max_agent_steps; }));
    v.push_back(
        int_ref("train.window_env_steps", [](C& c) -> auto& { return c.window_env_steps; }));
    v.push_back(
        int_ref("train.checkpoint_every", [](C& c) -> auto& { return c.checkpoint_every; }));
    v.push_back({"train.stop_score",
                 [](C& c, const Value& x, int line) { c.stop_score = as_real(x, line); },
                 [](const C& c) -> std::optional<std::string> {
                   if (!c.stop_score) return std::nullopt;
                   return format_double(*c.stop_score);
                 }});

    v.push_back(int_ref("eval.episodes", [](C& c) -> auto& { return c.eval_episodes; }));
    v.push_back(int_ref("serve.port", [](C& c) -> auto& { return c.port; }));
    v.push_back(bool_ref("serve.raw_depth", [](C& c) -> auto& { return c.raw_depth; }));
    v.push_back({"output.dir", [](C& c, const Value& x, int line) { c.out_dir = as_str(x, line); },
                 [](const C& c) -> std::optional<std::string> { return quote(c.out_dir); }});
    return v;
  }();
  return f;
}

}  // namespace

void ExperimentConfig::validate() const {
  arch.validate();
  hp.validate();
  if (env.render.width != arch.image_width || env.render.height != arch.image_height)
    throw ConfigError("render size must equal the agent image size");
  if (env.render.width < 16 || env.render.height < 16)
    throw ConfigError("render size must be at least 16x16");
  if (!(env.render.fov > 0 && env.render.fov < 3.1))
    throw ConfigError("render.fov must be in (0, 3.1) radians");
  if (!(env.render.near_plane > 0 && env.render.max_range > env.render.near_plane))
    throw ConfigError("render needs 0 < near_plane < max_range");
  const auto& ph = env.physics;
  if (!(ph.accel > 0 && ph.max_speed > 0 && ph.rotate_step > 0 && ph.angular_accel >= 0))
    throw ConfigError("physics constants must be positive");
  if (!(ph.damping > 0 && ph.damping <= 1)) throw ConfigError("physics.damping must be in (0, 1]");
  if (ph.max_speed >= 0.5)
    throw ConfigError("physics.max_speed must stay below half a cell per env step");
  if (sweep < 0 || sweep > kMaxSweep) throw ConfigError("sweep size out of range");
  if (max_agent_steps < 0) throw ConfigError("max_agent_steps must be >= 0");
  if (window_env_steps <= 0) throw ConfigError("window_env_steps must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (eval_episodes < 0) throw ConfigError("eval.episodes must be >= 0");
  if (port < 0 || port > 65535) throw ConfigError("serve.port out of range");
  if (out_dir.empty()) throw ConfigError("output.dir must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (section.empty()) fail(line, "empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (key.empty()) fail(line, "missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (entries.count(full)) fail(line, "duplicate key '" + full + "'");
    entries[full] = {parse_value(trim(std::string_view(s).substr(eq + 1)), line), line};
  }

  ExperimentConfig cfg;
  // Image size follows the render size unless the agent says otherwise.
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  for (const auto& [key, e] : entries) {
    auto it = by_key.find(key);
    if (it == by_key.end()) fail(e.line, "unknown key '" + key + "'");
    it->second->apply(cfg, e.value, e.line);
  }
  cfg.arch.image_width = cfg.env.render.width;
  cfg.arch.image_height = cfg.env.render.height;
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    // Point at the most relevant line we know of.
    int at = entries.empty() ? 0 : entries.begin()->second.line;
    for (const auto& [key, e] : entries)
      if (std::string(err.what()).find(key.substr(key.find('.') + 1)) != std::string::npos) at = e.line;
    fail(at, err.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ":" + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto v = f.emit(cfg);
    if (!v) continue;
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += f.key.substr(dot + 1) + " = " + *v + "\n";
  }
  return out;
}

world::MazeLayout make_layout(const ExperimentConfig& cfg) {
  if (cfg.layout_file.empty()) return world::generate_layout(cfg.maze_kind, cfg.maze_seed);
  std::ifstream f(cfg.layout_file);
  if (!f) throw ConfigError(cfg.layout_file + ": cannot open layout file");
  return world::read_layout(f);
}

}  // namespace nav::runner
