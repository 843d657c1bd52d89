// SPDX-License-Identifier: Apache-2.0
#include "nav/autodiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nav::ad {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
      std::uint32_t{b[3]} << 24;
  return true;
}

std::uint32_t need_u32(std::istream& in, const char* what) {
  std::uint32_t v;
  if (!get_u32(in, v)) throw DataError(std::string("truncated checkpoint reading ") + what);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<CheckpointRecord>& records) {
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  for (const auto& r : records) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put_u32(out, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put_u32(out, d);
    for (float f : r.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw DataError("failed writing checkpoint");
}

std::vector<CheckpointRecord> read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw DataError("not a NAVW checkpoint");
  const auto version = need_u32(in, "version");
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  std::vector<CheckpointRecord> records;
  std::uint32_t name_len;
  while (get_u32(in, name_len)) {
    if (name_len > 4096) throw DataError("checkpoint record name too long");
    CheckpointRecord r;
    r.name.resize(name_len);
    if (!in.read(r.name.data(), name_len)) throw DataError("truncated checkpoint name");
    const auto ndims = need_u32(in, "dim count");
    if (ndims > 8) throw DataError("checkpoint record " + r.name + " has too many dims");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndims; ++i) {
      r.dims.push_back(need_u32(in, "dims"));
      count *= r.dims.back();
    }
    if (count > (std::size_t{1} << 30)) throw DataError("checkpoint record too large");
    r.values.resize(count);
    for (auto& f : r.values) f = std::bit_cast<float>(need_u32(in, "payload"));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<CheckpointRecord> to_records(const ParamVector<float>& params) {
  std::vector<CheckpointRecord> out;
  for (const auto& s : params.registry()) {
    CheckpointRecord r;
    r.name = s.name;
    for (int i = 0; i < s.shape.rank; ++i) r.dims.push_back(static_cast<std::uint32_t>(s.shape[i]));
    auto v = params.values(s);
    r.values.assign(v.begin(), v.end());
    out.push_back(std::move(r));
  }
  return out;
}

void load_records(const std::vector<CheckpointRecord>& records, ParamVector<float>& params) {
  for (const auto& s : params.registry()) {
    const CheckpointRecord* found = nullptr;
    for (const auto& r : records)
      if (r.name == s.name) found = &r;
    if (!found) throw DataError("checkpoint is missing parameter " + s.name);
    bool same = static_cast<int>(found->dims.size()) == s.shape.rank;
    for (int i = 0; same && i < s.shape.rank; ++i)
      same = found->dims[i] == static_cast<std::uint32_t>(s.shape[i]);
    if (!same) throw DataError("checkpoint shape mismatch for " + s.name);
    auto dst = params.values(s);
    std::copy(found->values.begin(), found->values.end(), dst.begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamVector<float>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, to_records(params));
}

void load_checkpoint(const std::filesystem::path& path, ParamVector<float>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  load_records(read_checkpoint(in), params);
}

}  // namespace nav::ad
