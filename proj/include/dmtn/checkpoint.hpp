#pragma once

// Binary checkpoint, little-endian:
//   magic "DMTNCKPT" | u32 version | str config | u64 n, n x str vocab
//   | u64 n, n x (str name, u8 kind, u8 rank, rank x u64 dim, numel x f64)
//   | u64 FNV-1a hash of every preceding byte
// where str is u64 length followed by raw bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dmtn/babi.hpp"
#include "dmtn/config.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  babi::Vocabulary vocab;
  ParameterStore params;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError (with byte offset) on truncation or corruption and
/// VersionError on an unknown format version.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmtn
