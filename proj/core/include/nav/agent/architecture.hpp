// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace nav::agent {

enum class Variant { kFF, kLstm1, kNav2Lstm };
enum class InputMode { kRGB, kRGBD };
enum class DepthMode { kClassify8, kRegress };

std::string_view to_string(Variant v);
std::string_view to_string(InputMode m);
std::string_view to_string(DepthMode m);
std::optional<Variant> parse_variant(std::string_view s);
std::optional<InputMode> parse_input_mode(std::string_view s);
std::optional<DepthMode> parse_depth_mode(std::string_view s);

struct Heads {
  bool d1 = false;      // depth from the conv features
  bool d2 = false;      // depth from the top LSTM
  bool loop = false;    // loop closure from the top LSTM
  bool reward = false;  // reward class from the conv features (replay)

  bool any() const { return d1 || d2 || loop || reward; }
  bool operator==(const Heads&) const = default;
};

// Parses "D1D2LR"-style head lists ("", "D2", "D1L", ...).
std::optional<Heads> parse_heads(std::string_view s);
std::string heads_string(const Heads& h);

struct ConvSpec {
  int filters = 16;
  int kernel = 8;
  int stride = 4;
  bool operator==(const ConvSpec&) const = default;
};

struct ArchitectureSpec {
  Variant variant = Variant::kNav2Lstm;
  InputMode input_mode = InputMode::kRGB;
  Heads heads;
  DepthMode depth_mode = DepthMode::kClassify8;
  int lstm1_width = 64;
  int lstm2_width = 256;
  int fc_width = 256;
  int aux_hidden = 128;
  int image_height = 84;
  int image_width = 84;
  ConvSpec conv1{16, 8, 4};
  ConvSpec conv2{32, 4, 2};

  // Throws ConfigError for impossible combinations (e.g. D2 on FF).
  void validate() const;

  int input_channels() const { return input_mode == InputMode::kRGBD ? 4 : 3; }
  int conv1_out_h() const { return (image_height - conv1.kernel) / conv1.stride + 1; }
  int conv1_out_w() const { return (image_width - conv1.kernel) / conv1.stride + 1; }
  int conv2_out_h() const { return (conv1_out_h() - conv2.kernel) / conv2.stride + 1; }
  int conv2_out_w() const { return (conv1_out_w() - conv2.kernel) / conv2.stride + 1; }
  int conv_out_size() const { return conv2.filters * conv2_out_h() * conv2_out_w(); }
  bool recurrent() const { return variant != Variant::kFF; }
  // Width of the layer policy and value read from.
  int top_width() const;
  int depth_outputs() const;

  // e.g. "Nav A3C+D2", "LSTM A3C", "FF A3C+D1"
  std::string display_name() const;

  bool operator==(const ArchitectureSpec&) const = default;
};

// Closed-form parameter count from the declared layer shapes.
std::size_t expected_parameter_count(const ArchitectureSpec& spec);

}  // namespace nav::agent
