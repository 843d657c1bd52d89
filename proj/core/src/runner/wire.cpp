// SPDX-License-Identifier: Apache-2.0
#include "nav/runner/wire.hpp"

#include <bit>
#include <cstring>

#include "nav/targets/depth.hpp"

namespace nav::runner::wire {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw ProtocolError(kMalformed, "payload too short");
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void finish() const {
    if (pos_ != b_.size()) throw ProtocolError(kMalformed, "trailing bytes in payload");
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void expect(const Message& m, MsgType t) {
  if (m.type != t) throw ProtocolError(kMalformed, "unexpected message type");
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& m) {
  if (m.payload.size() > kMaxPayload) throw ProtocolError(kMalformed, "payload too large");
  Writer w;
  w.u32(static_cast<std::uint32_t>(m.payload.size()));
  w.u8(static_cast<std::uint8_t>(m.type));
  w.bytes(m.payload);
  return w.take();
}

std::optional<Message> decode(std::span<const std::uint8_t> bytes, std::size_t& consumed) {
  consumed = 0;
  if (bytes.size() < 5) return std::nullopt;
  Reader r(bytes);
  const std::uint32_t len = r.u32();
  const std::uint8_t type = r.u8();
  if (len > kMaxPayload) throw ProtocolError(kMalformed, "declared payload too large");
  if (type < 1 || type > 4) throw ProtocolError(kMalformed, "unknown message type");
  if (bytes.size() < 5 + static_cast<std::size_t>(len)) return std::nullopt;
  Message m;
  m.type = static_cast<MsgType>(type);
  m.payload.assign(bytes.begin() + 5, bytes.begin() + 5 + len);
  consumed = 5 + len;
  return m;
}

Message make_reset(std::uint64_t seed) {
  Writer w;
  w.u64(seed);
  return {MsgType::kReset, w.take()};
}

Message make_step(std::uint8_t action) { return {MsgType::kStep, {action}}; }

Message make_err(std::uint16_t code, const std::string& msg) {
  Writer w;
  w.u16(code);
  w.bytes({reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size()});
  return {MsgType::kErr, w.take()};
}

Message make_obs(const Obs& o) {
  const std::size_t plane = static_cast<std::size_t>(o.height) * o.width;
  if (o.rgb.size() != 3 * plane) throw ProtocolError(kMalformed, "rgb size does not match H*W*3");
  if (o.depth.size() != (o.raw_depth ? plane : static_cast<std::size_t>(targets::kDepthPixels)))
    throw ProtocolError(kMalformed, "depth size does not match depth kind");
  Writer w;
  w.u16(static_cast<std::uint16_t>(o.height));
  w.u16(static_cast<std::uint16_t>(o.width));
  w.u8(o.raw_depth ? 1 : 0);
  w.bytes(o.rgb);
  for (float d : o.depth) w.f32(d);
  for (float v : o.velocity) w.f32(v);
  w.u8(o.prev_action);
  w.f32(o.prev_reward);
  w.f32(o.reward);
  w.u8(o.done ? 1 : 0);
  return {MsgType::kObs, w.take()};
}

std::uint64_t parse_reset(const Message& m) {
  expect(m, MsgType::kReset);
  Reader r(m.payload);
  const std::uint64_t seed = r.u64();
  r.finish();
  return seed;
}

std::uint8_t parse_step(const Message& m) {
  expect(m, MsgType::kStep);
  Reader r(m.payload);
  const std::uint8_t a = r.u8();
  r.finish();
  return a;
}

Err parse_err(const Message& m) {
  expect(m, MsgType::kErr);
  Reader r(m.payload);
  Err e;
  e.code = r.u16();
  const auto rest = r.bytes(m.payload.size() - 2);
  e.message.assign(rest.begin(), rest.end());
  return e;
}

Obs parse_obs(const Message& m) {
  expect(m, MsgType::kObs);
  Reader r(m.payload);
  Obs o;
  o.height = r.u16();
  o.width = r.u16();
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw ProtocolError(kMalformed, "unknown depth kind");
  o.raw_depth = kind == 1;
  const std::size_t plane = static_cast<std::size_t>(o.height) * o.width;
  const auto rgb = r.bytes(3 * plane);
  o.rgb.assign(rgb.begin(), rgb.end());
  o.depth.resize(o.raw_depth ? plane : targets::kDepthPixels);
  for (float& d : o.depth) d = r.f32();
  for (float& v : o.velocity) v = r.f32();
  o.prev_action = r.u8();
  o.prev_reward = r.f32();
  o.reward = r.f32();
  o.done = r.u8() != 0;
  r.finish();
  return o;
}

Obs observation_from_env(const world::MazeEnv& env, bool raw_depth, bool after_reset) {
  const auto& obs = env.observation();
  const auto& fr = obs.frame;
  Obs o;
  o.height = fr.height;
  o.width = fr.width;
  o.raw_depth = raw_depth;
  const std::size_t plane = static_cast<std::size_t>(fr.height) * fr.width;
  o.rgb.resize(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) o.rgb[3 * i + c] = fr.rgb[c * plane + i];
  if (raw_depth) {
    o.depth = fr.depth;
  } else {
    const auto& rc = env.config().render;
    const auto bytes = targets::depth_to_bytes(fr.depth, rc.near_plane, rc.max_range);
    const auto grid = targets::preprocess_depth(bytes, fr.height, fr.width);
    o.depth.assign(grid.begin(), grid.end());
  }
  o.velocity = obs.velocity;
  o.prev_action = env.state().last_action < 0 ? kNoAction
                                               : static_cast<std::uint8_t>(env.state().last_action);
  o.prev_reward = obs.prev_reward;
  o.reward = after_reset ? 0.0f : static_cast<float>(env.last_step().reward);
  o.done = env.done();
  return o;
}

}  // namespace nav::runner::wire
