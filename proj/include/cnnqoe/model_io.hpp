#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cnnqoe/model.hpp"

namespace cnnqoe {

// Binary model format, little-endian throughout:
//   magic "CQOE" | u16 version | u32 filter_width | u32 num_blocks | u32 filters
//   | u32 in_channels | u8 variant | f64 dropout_p | f64 params... | u32 crc32
// Parameters appear in param_refs order; the checksum covers every preceding byte.
inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// On-disk size of a model with the given parameter count.
long long model_file_size(long long param_count);

// IEEE CRC-32 (reflected, init/xorout 0xFFFFFFFF).
std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

}  // namespace cnnqoe
