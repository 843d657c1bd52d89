// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nav/world/world.hpp"

namespace nav::runner::wire {

// Frame: u32 payload length (little-endian, type byte excluded), u8 type,
// payload.
enum class MsgType : std::uint8_t { kReset = 1, kStep = 2, kObs = 3, kErr = 4 };

enum ErrCode : std::uint16_t {
  kStepBeforeReset = 100,
  kBadAction = 101,
  kMalformed = 102,
  kStepAfterDone = 103,
};

inline constexpr std::uint32_t kMaxPayload = 1u << 24;
inline constexpr std::uint8_t kNoAction = 0xFF;

struct Message {
  MsgType type = MsgType::kErr;
  std::vector<std::uint8_t> payload;
};

// OBS payload:
//   u16 height, u16 width, u8 depth_kind (0 = 4x16 grid, 1 = raw H*W),
//   rgb H*W*3 bytes (row-major, interleaved), depth f32[64 or H*W],
//   velocity f32[6], u8 prev_action (0xFF at episode start), f32 prev_reward,
//   f32 reward, u8 done.
struct Obs {
  int height = 0;
  int width = 0;
  bool raw_depth = false;
  std::vector<std::uint8_t> rgb;
  std::vector<float> depth;
  std::array<float, world::kVelocityDims> velocity{};
  std::uint8_t prev_action = kNoAction;
  float prev_reward = 0;
  float reward = 0;
  bool done = false;

  bool operator==(const Obs&) const = default;
};

struct Err {
  std::uint16_t code = 0;
  std::string message;
};

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::uint16_t code, const std::string& msg)
      : std::runtime_error("protocol error " + std::to_string(code) + ": " + msg), code_(code) {}
  std::uint16_t code() const { return code_; }

 private:
  std::uint16_t code_;
};

std::vector<std::uint8_t> encode(const Message& m);
// Parses one complete frame from the front of `bytes`. Returns nullopt when
// more bytes are needed; throws ProtocolError(kMalformed) when the header is
// invalid. `consumed` receives the frame size.
std::optional<Message> decode(std::span<const std::uint8_t> bytes, std::size_t& consumed);

Message make_reset(std::uint64_t seed);
Message make_step(std::uint8_t action);
Message make_err(std::uint16_t code, const std::string& msg);
Message make_obs(const Obs& obs);

// Throw ProtocolError(kMalformed) on payload length/shape mismatches.
std::uint64_t parse_reset(const Message& m);
std::uint8_t parse_step(const Message& m);
Err parse_err(const Message& m);
Obs parse_obs(const Message& m);

// Observation as the server sends it after RESET (reward 0) or STEP.
Obs observation_from_env(const world::MazeEnv& env, bool raw_depth, bool after_reset);

}  // namespace nav::runner::wire
