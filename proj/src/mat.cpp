#include "bfd/mat.hpp"

#include <bit>
#include <cstring>
#include <cstdio>

#include "bfd/error.hpp"
#include "bfd/serialize.hpp"

namespace bfd {

namespace {

constexpr std::size_t kHeaderBytes = 128;
constexpr std::uint32_t kComplexFlag = 0x0800;

// mxClass codes of the numeric classes.
constexpr std::uint32_t kMxDouble = 6;
constexpr std::uint32_t kMxUint64 = 15;

[[noreturn]] void malformed(const std::string& what, std::size_t offset) {
  raise(ErrorCode::kMalformedElement, what + " at byte " + std::to_string(offset));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

  template <typename T>
  T load(std::size_t at) const {
    T v;
    std::memcpy(&v, bytes_.data() + at, sizeof(T));
    if (big_ != (std::endian::native == std::endian::big)) v = byteswap(v);
    return v;
  }

  std::span<const std::uint8_t> bytes() const { return bytes_; }

 private:
  template <typename T>
  static T byteswap(T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  bool big_;
};

struct Parsed {
  MatElement element;
  std::size_t next = 0;  // offset after the element and its padding
};

// Reads the element tag at `at` inside [at, end). Small elements pack type and
// length into the first word and the data into the second.
Parsed read_element(const Reader& r, std::size_t at, std::size_t end, std::size_t base) {
  if (end - at < 8) malformed("truncated element tag", base + at);
  const auto first = r.load<std::uint32_t>(at);
  Parsed p;
  if ((first >> 16) != 0) {
    p.element.type_tag = first & 0xFFFF;
    p.element.byte_length = first >> 16;
    if (p.element.byte_length > 4) malformed("small element longer than 4 bytes", base + at);
    p.element.payload = r.bytes().subspan(at + 4, p.element.byte_length);
    p.next = at + 8;
    return p;
  }
  p.element.type_tag = first;
  p.element.byte_length = r.load<std::uint32_t>(at + 4);
  const std::size_t body = at + 8;
  if (p.element.byte_length > end - body) malformed("element length overruns its container", base + at);
  p.element.payload = r.bytes().subspan(body, p.element.byte_length);
  const std::size_t padded = (static_cast<std::size_t>(p.element.byte_length) + 7) / 8 * 8;
  if (p.element.type_tag != kMiCompressed && padded > end - body) malformed("missing element padding", base + at);
  p.next = body + std::min(padded, end - body);
  return p;
}

std::size_t type_size(std::uint32_t t) {
  switch (t) {
    case kMiInt8:
    case kMiUint8:
      return 1;
    case kMiInt16:
    case kMiUint16:
      return 2;
    case kMiInt32:
    case kMiUint32:
    case kMiSingle:
      return 4;
    case kMiDouble:
    case kMiInt64:
    case kMiUint64:
      return 8;
    default:
      return 0;
  }
}

std::vector<double> numeric_values(const Reader& r, const MatElement& e, std::size_t offset, std::size_t base) {
  const std::size_t width = type_size(e.type_tag);
  if (width == 0) malformed("unsupported numeric type " + std::to_string(e.type_tag), base + offset);
  if (e.byte_length % width != 0) malformed("payload not a multiple of its element width", base + offset);
  const std::size_t n = e.byte_length / width;
  const std::size_t at = static_cast<std::size_t>(e.payload.data() - r.bytes().data());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = at + i * width;
    switch (e.type_tag) {
      case kMiInt8: out[i] = r.load<std::int8_t>(p); break;
      case kMiUint8: out[i] = r.load<std::uint8_t>(p); break;
      case kMiInt16: out[i] = r.load<std::int16_t>(p); break;
      case kMiUint16: out[i] = r.load<std::uint16_t>(p); break;
      case kMiInt32: out[i] = r.load<std::int32_t>(p); break;
      case kMiUint32: out[i] = r.load<std::uint32_t>(p); break;
      case kMiSingle: out[i] = r.load<float>(p); break;
      case kMiDouble: out[i] = r.load<double>(p); break;
      case kMiInt64: out[i] = static_cast<double>(r.load<std::int64_t>(p)); break;
      case kMiUint64: out[i] = static_cast<double>(r.load<std::uint64_t>(p)); break;
    }
  }
  return out;
}

// Returns false for matrices the reader skips (non-numeric or complex classes).
bool parse_matrix(const Reader& r, const MatElement& m, std::size_t base, MatArray& out) {
  const std::size_t start = static_cast<std::size_t>(m.payload.data() - r.bytes().data());
  const std::size_t end = start + m.byte_length;
  if (m.byte_length == 0) return false;  // empty placeholder element

  auto flags = read_element(r, start, end, base);
  if (flags.element.type_tag != kMiUint32 || flags.element.byte_length != 8) {
    malformed("matrix without array flags", base + start);
  }
  const auto word = r.load<std::uint32_t>(static_cast<std::size_t>(flags.element.payload.data() - r.bytes().data()));
  const std::uint32_t cls = word & 0xFF;

  auto dims = read_element(r, flags.next, end, base);
  if (dims.element.type_tag != kMiInt32 || dims.element.byte_length < 8 || dims.element.byte_length % 4 != 0) {
    malformed("matrix without dimensions", base + flags.next);
  }
  auto name = read_element(r, dims.next, end, base);
  if (name.element.type_tag != kMiInt8 && name.element.type_tag != kMiUint8) {
    malformed("matrix without a name", base + dims.next);
  }

  if (cls < kMxDouble || cls > kMxUint64 || (word & kComplexFlag) != 0) return false;

  const std::size_t dims_at = static_cast<std::size_t>(dims.element.payload.data() - r.bytes().data());
  std::size_t count = 1;
  out.dims.clear();
  for (std::size_t i = 0; i < dims.element.byte_length / 4; ++i) {
    const auto d = r.load<std::int32_t>(dims_at + 4 * i);
    if (d < 0) malformed("negative dimension", base + dims_at);
    out.dims.push_back(static_cast<std::size_t>(d));
    count *= static_cast<std::size_t>(d);
  }
  out.name.assign(reinterpret_cast<const char*>(name.element.payload.data()), name.element.byte_length);

  auto real = read_element(r, name.next, end, base);
  out.values = numeric_values(r, real.element, name.next, base);
  if (out.values.size() != count) malformed("array '" + out.name + "' holds a different count than its dims", base + name.next);
  return count > 0;
}

}  // namespace

std::vector<MatArray> parse_mat(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    raise(ErrorCode::kNotMatFile, "input is " + std::to_string(bytes.size()) + " bytes, shorter than a MAT header");
  }
  bool big = false;
  if (bytes[126] == 'I' && bytes[127] == 'M') {
    big = false;
  } else if (bytes[126] == 'M' && bytes[127] == 'I') {
    big = true;
  } else {
    raise(ErrorCode::kNotMatFile, "missing Level-5 endian indicator");
  }
  const Reader r(bytes, big);
  const auto version = r.load<std::uint16_t>(124);
  if (version != 0x0100) {
    char hex[8];
    std::snprintf(hex, sizeof(hex), "%04x", version);
    raise(ErrorCode::kNotMatFile,
          std::string("unsupported MAT version 0x") + hex + " (v7.3 HDF5 containers are not Level-5 files)");
  }

  std::vector<MatArray> out;
  std::size_t at = kHeaderBytes;
  std::size_t elements = 0;
  while (at < bytes.size()) {
    const auto p = read_element(r, at, bytes.size(), 0);
    ++elements;
    if (p.element.type_tag == kMiCompressed) {
      raise(ErrorCode::kCompressedUnsupported,
            "compressed element at byte " + std::to_string(at) +
                "; re-save the file uncompressed (save -v6) or export the channel to CSV and use the CSV path");
    }
    if (p.element.type_tag == kMiMatrix) {
      MatArray a;
      if (parse_matrix(r, p.element, 0, a)) out.push_back(std::move(a));
    }
    at = p.next;
  }
  if (elements == 0) raise(ErrorCode::kMalformedElement, "MAT file holds no data elements");
  return out;
}

std::vector<MatArray> read_mat_file(const std::filesystem::path& path) { return parse_mat(read_file_bytes(path)); }

Recording select_channel(std::span<const MatArray> arrays, std::string_view suffix, const RecordingMeta& meta) {
  const MatArray* found = nullptr;
  for (const auto& a : arrays) {
    if (std::string_view(a.name).ends_with(suffix)) {
      if (found) raise(ErrorCode::kAmbiguousChannel, "both '" + found->name + "' and '" + a.name + "' end in '" + std::string(suffix) + "'");
      found = &a;
    }
  }
  if (!found) raise(ErrorCode::kChannelNotFound, "no array name ends in '" + std::string(suffix) + "'");
  Recording rec;
  rec.samples = found->values;
  rec.sample_rate_hz = meta.sample_rate_hz;
  rec.rpm = meta.rpm;
  rec.label = meta.label;
  rec.source_name = found->name;
  return rec;
}

}  // namespace bfd
