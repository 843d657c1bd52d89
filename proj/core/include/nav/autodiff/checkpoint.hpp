// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nav/autodiff/param_vector.hpp"

namespace nav::ad {

// Checkpoint layout (all integers little-endian u32):
//   "NAVW" | version | repeated { name_len | name | ndims | dims... | f32 payload }
inline constexpr char kCheckpointMagic[4] = {'N', 'A', 'V', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

void write_checkpoint(std::ostream& out, const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_checkpoint(std::istream& in);

// One record per registered slice, in registry order.
std::vector<CheckpointRecord> to_records(const ParamVector<float>& params);
// Copies matching records into params. Every registered slice must be present
// with an identical shape; unknown records are ignored.
void load_records(const std::vector<CheckpointRecord>& records, ParamVector<float>& params);

void save_checkpoint(const std::filesystem::path& path, const ParamVector<float>& params);
void load_checkpoint(const std::filesystem::path& path, ParamVector<float>& params);

}  // namespace nav::ad
