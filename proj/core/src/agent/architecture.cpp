// SPDX-License-Identifier: Apache-2.0
#include "nav/agent/architecture.hpp"

#include "nav/errors.hpp"
#include "nav/targets/depth.hpp"
#include "nav/world/world.hpp"

namespace nav::agent {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kFF: return "ff";
    case Variant::kLstm1: return "lstm";
    case Variant::kNav2Lstm: return "nav";
  }
  return "?";
}
std::string_view to_string(InputMode m) { return m == InputMode::kRGB ? "rgb" : "rgbd"; }
std::string_view to_string(DepthMode m) {
  return m == DepthMode::kClassify8 ? "classify8" : "regress";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "ff") return Variant::kFF;
  if (s == "lstm") return Variant::kLstm1;
  if (s == "nav") return Variant::kNav2Lstm;
  return std::nullopt;
}
std::optional<InputMode> parse_input_mode(std::string_view s) {
  if (s == "rgb") return InputMode::kRGB;
  if (s == "rgbd") return InputMode::kRGBD;
  return std::nullopt;
}
std::optional<DepthMode> parse_depth_mode(std::string_view s) {
  if (s == "classify8") return DepthMode::kClassify8;
  if (s == "regress") return DepthMode::kRegress;
  return std::nullopt;
}

std::optional<Heads> parse_heads(std::string_view s) {
  Heads h;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.substr(i, 2) == "D1") {
      h.d1 = true;
      i += 2;
    } else if (s.substr(i, 2) == "D2") {
      h.d2 = true;
      i += 2;
    } else if (s[i] == 'L') {
      h.loop = true;
      ++i;
    } else if (s[i] == 'R') {
      h.reward = true;
      ++i;
    } else {
      return std::nullopt;
    }
  }
  return h;
}

std::string heads_string(const Heads& h) {
  std::string s;
  if (h.d1) s += "D1";
  if (h.d2) s += "D2";
  if (h.loop) s += "L";
  if (h.reward) s += "R";
  return s;
}

void ArchitectureSpec::validate() const {
  if (image_height <= 0 || image_width <= 0) throw ConfigError("image size must be positive");
  if (conv1.filters <= 0 || conv2.filters <= 0 || conv1.kernel <= 0 || conv2.kernel <= 0 ||
      conv1.stride <= 0 || conv2.stride <= 0)
    throw ConfigError("conv layer sizes must be positive");
  if (conv1.kernel > image_height || conv1.kernel > image_width)
    throw ConfigError("conv1 kernel larger than the image");
  if (conv2.kernel > conv1_out_h() || conv2.kernel > conv1_out_w())
    throw ConfigError("conv2 kernel larger than conv1 output");
  if (fc_width <= 0 || aux_hidden <= 0) throw ConfigError("layer widths must be positive");
  if (variant == Variant::kNav2Lstm && (lstm1_width <= 0 || lstm2_width <= 0))
    throw ConfigError("LSTM widths must be positive");
  if (variant == Variant::kLstm1 && lstm2_width <= 0) throw ConfigError("LSTM width must be positive");
  if (!recurrent() && (heads.d2 || heads.loop))
    throw ConfigError("D2 and L heads need a recurrent variant");
  if (input_mode == InputMode::kRGBD && (heads.d1 || heads.d2))
    throw ConfigError("RGBD input is the alternative to depth prediction, not combined with it");
}

int ArchitectureSpec::top_width() const {
  // LSTM A3C uses a single LSTM of lstm2_width units.
  return variant == Variant::kFF ? fc_width : lstm2_width;
}

int ArchitectureSpec::depth_outputs() const {
  return depth_mode == DepthMode::kClassify8 ? targets::kDepthPixels * targets::kDepthBands
                                             : targets::kDepthPixels;
}

std::string ArchitectureSpec::display_name() const {
  std::string s;
  switch (variant) {
    case Variant::kFF: s = "FF A3C"; break;
    case Variant::kLstm1: s = "LSTM A3C"; break;
    case Variant::kNav2Lstm: s = "Nav A3C"; break;
  }
  if (input_mode == InputMode::kRGBD) s += " (RGBD)";
  const std::string h = heads_string(heads);
  if (!h.empty()) s += "+" + h;
  if (depth_mode == DepthMode::kRegress && (heads.d1 || heads.d2)) s += "[MSE]";
  return s;
}

namespace {

std::size_t linear_params(std::size_t in, std::size_t out) { return out * in + out; }
std::size_t lstm_params(std::size_t in, std::size_t n) { return 4 * n * (in + n) + 4 * n; }

}  // namespace

std::size_t expected_parameter_count(const ArchitectureSpec& s) {
  const std::size_t c = static_cast<std::size_t>(s.input_channels());
  std::size_t n = 0;
  n += s.conv1.filters * c * s.conv1.kernel * s.conv1.kernel + s.conv1.filters;
  n += s.conv2.filters * s.conv1.filters * s.conv2.kernel * s.conv2.kernel + s.conv2.filters;
  n += linear_params(s.conv_out_size(), s.fc_width);
  const std::size_t f = s.fc_width;
  const std::size_t top = s.top_width();
  switch (s.variant) {
    case Variant::kFF: break;
    case Variant::kLstm1: n += lstm_params(f, s.lstm2_width); break;
    case Variant::kNav2Lstm:
      n += lstm_params(f + 1, s.lstm1_width);
      n += lstm_params(s.lstm1_width + f + world::kVelocityDims + world::kNumActions, s.lstm2_width);
      break;
  }
  n += linear_params(top, world::kNumActions);
  n += linear_params(top, 1);
  const std::size_t hid = s.aux_hidden;
  const std::size_t depth_out = s.depth_outputs();
  if (s.heads.d1) n += linear_params(f, hid) + linear_params(hid, depth_out);
  if (s.heads.d2) n += linear_params(top, hid) + linear_params(hid, depth_out);
  if (s.heads.loop) n += linear_params(top, hid) + linear_params(hid, 1);
  if (s.heads.reward) n += linear_params(f, hid) + linear_params(hid, 3);
  return n;
}

}  // namespace nav::agent
