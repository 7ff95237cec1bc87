#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aquaseg/decoder.hpp"

namespace aquaseg {

// Layout, little-endian:
//   "AQCKPT1" | u16 version | u32 len + JSON header {decoder config, step, provenance}
//   | u32 tensor count | per tensor: u32 len + name, u32 rows, u32 cols, rows*cols f64 (column-major)
//   | u32 CRC32 of every preceding byte
inline constexpr char kCheckpointMagic[7] = {'A', 'Q', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointInfo {
  DecoderConfig config;
  std::int64_t step = 0;
  std::string provenance_json = "{}";  ///< training config and inputs echoed for traceability
};

template <typename Scalar>
struct LoadedCheckpoint {
  CheckpointInfo info;
  DecoderParams<Scalar> params;
};

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointInfo& info, const DecoderParams<double>& params);
LoadedCheckpoint<double> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source);

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info, const DecoderParams<Scalar>& params);

/// Validates magic, version, CRC and every tensor's shape by name against the stored config.
template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

}  // namespace aquaseg
