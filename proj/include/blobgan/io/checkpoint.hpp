#pragma once

// Binary model checkpoint:
//   "BLBG" | u32 version | u32 header length | JSON header |
//   u32 tensor count | per tensor: u32 name length, name, u32 rank,
//   u64 extents[rank], f32 data
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <string>

#include "blobgan/model.hpp"

namespace blobgan::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Model& model);
// Throws FormatError naming the failing section ("magic", "version",
// "header", "tensors" or "tensor:<name>").
Model decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace blobgan::io
