#pragma once

// Model file layout (all integers little-endian):
//
//   "BFDM"                      magic
//   u16 version = 1
//   u16 x3 input rows, cols, channels
//   u16 layer count
//   per layer: u8 kind, u16 x4 (filter_h, filter_w, filter_count, stride), u8 activation
//   f32 weights of every layer, in layer order
//   f32 biases of every layer, in layer order
//   u32 CRC-32 (IEEE) of every byte after the magic
//
// Pools write their declared channel count as filter_count; dense layers
// write zeros for filter size and stride.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bfd/model.hpp"
#include "bfd/network.hpp"

namespace bfd {

inline constexpr char kModelMagic[4] = {'B', 'F', 'D', 'M'};
inline constexpr std::uint16_t kModelVersion = 1;

struct LoadedModel {
  Architecture arch;
  ModelParams params;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_model(const Architecture& arch, const ModelParams& params);
LoadedModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelParams& params, const Architecture& arch, const std::filesystem::path& path);
LoadedModel load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Weight-only payload size: what the device keeps in flash.
std::size_t weight_payload_bytes(const ModelParams& params);

}  // namespace bfd
