#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "creagen/grad_check.hpp"
#include "json.hpp"

namespace creagen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// File layout (all integers little-endian):
///   "CREAGEN\0" | u32 version | u64 header length | header JSON (UTF-8)
///   | u32 tensor count | per tensor: u32 name length, name, u32 rank,
///   rank x u64 dims, float32 values.
struct Checkpoint {
    nlohmann::ordered_json header;
    std::vector<NamedTensor> tensors;

    const Tensor& find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::ordered_json& header, const std::vector<NamedTensor>& tensors);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and renames, so a crash never leaves a torn file.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::ordered_json& header,
                     const std::vector<NamedTensor>& tensors);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `targets` by name. Every target must be present
/// with a matching shape.
void restore_tensors(const Checkpoint& ckpt, const std::vector<NamedTensor>& targets);

}  // namespace creagen
