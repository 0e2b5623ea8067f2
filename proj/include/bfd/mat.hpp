#pragma once

// Reader for the uncompressed numeric subset of MATLAB Level-5 MAT files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bfd/signal.hpp"

namespace bfd {

// MAT data-type codes used by the reader.
enum MatType : std::uint32_t {
  kMiInt8 = 1,
  kMiUint8 = 2,
  kMiInt16 = 3,
  kMiUint16 = 4,
  kMiInt32 = 5,
  kMiUint32 = 6,
  kMiSingle = 7,
  kMiDouble = 9,
  kMiInt64 = 12,
  kMiUint64 = 13,
  kMiMatrix = 14,
  kMiCompressed = 15,
};

struct MatElement {
  std::uint32_t type_tag = 0;
  std::uint32_t byte_length = 0;
  std::span<const std::uint8_t> payload;
};

struct MatArray {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> values;  // column-major
};

// Every real numeric matrix in the file. Non-numeric, complex, sparse and
// unknown elements are skipped. Throws NotMatFile, CompressedUnsupported or
// MalformedElement.
std::vector<MatArray> parse_mat(std::span<const std::uint8_t> bytes);
std::vector<MatArray> read_mat_file(const std::filesystem::path& path);

struct RecordingMeta {
  int sample_rate_hz = kDefaultSampleRateHz;
  int rpm = kDefaultRpm;
  FaultLabel label = kFaultLabels[0];
};

// The single array whose name ends in suffix ("_DE_time"). Throws
// ChannelNotFound or AmbiguousChannel.
Recording select_channel(std::span<const MatArray> arrays, std::string_view suffix, const RecordingMeta& meta = {});

}  // namespace bfd
