#include "bfd/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bfd {

namespace {

constexpr std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1U) ? 0xEDB88320U ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const char> s) { out_.insert(out_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) raise(ErrorCode::kCorruptModel, "model file truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint16_t narrow16(int v, const char* what) {
  if (v < 0 || v > 0xFFFF) raise(ErrorCode::kShapeMismatch, std::string(what) + " does not fit in 16 bits");
  return static_cast<std::uint16_t>(v);
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  std::uint32_t c = 0xFFFFFFFFU;
  for (auto b : bytes) c = kCrcTable[(c ^ b) & 0xFFU] ^ (c >> 8);
  return c ^ 0xFFFFFFFFU;
}

std::vector<std::uint8_t> encode_model(const Architecture& arch, const ModelParams& params) {
  validate(arch);
  check_params(arch, params);
  Writer w;
  w.raw(kModelMagic);
  w.u16(kModelVersion);
  w.u16(narrow16(arch.input.rows, "input rows"));
  w.u16(narrow16(arch.input.cols, "input cols"));
  w.u16(narrow16(arch.input.channels, "input channels"));
  w.u16(narrow16(static_cast<int>(arch.layers.size()), "layer count"));
  for (const auto& l : arch.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u16(narrow16(l.filter_h, "filter height"));
    w.u16(narrow16(l.filter_w, "filter width"));
    w.u16(narrow16(l.filter_count, "filter count"));
    w.u16(narrow16(l.stride, "stride"));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
  for (const auto& l : params.layers) {
    for (float v : l.weights) w.f32(v);
  }
  for (const auto& l : params.layers) {
    for (float v : l.bias) w.f32(v);
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc = crc32(std::span<const std::uint8_t>(bytes).subspan(sizeof(kModelMagic)));
  w.u32(crc);
  return std::move(bytes);
}

LoadedModel decode_model(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kMinSize = sizeof(kModelMagic) + 2 + 6 + 2 + 4;
  if (bytes.size() < kMinSize) raise(ErrorCode::kCorruptModel, "model file too short");
  if (std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
    raise(ErrorCode::kCorruptModel, "bad magic");
  }
  const auto body = bytes.subspan(sizeof(kModelMagic), bytes.size() - sizeof(kModelMagic) - 4);
  Reader tail(bytes.subspan(bytes.size() - 4));
  if (crc32(body) != tail.u32()) raise(ErrorCode::kCorruptModel, "checksum mismatch");

  Reader r(body);
  const std::uint16_t version = r.u16();
  if (version != kModelVersion) raise(ErrorCode::kCorruptModel, "unsupported version " + std::to_string(version));
  LoadedModel m;
  m.arch.input.rows = r.u16();
  m.arch.input.cols = r.u16();
  m.arch.input.channels = r.u16();
  const std::uint16_t count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) {
    LayerSpec l;
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::kSoftmaxDense)) raise(ErrorCode::kCorruptModel, "bad layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.filter_h = r.u16();
    l.filter_w = r.u16();
    l.filter_count = r.u16();
    l.stride = r.u16();
    const std::uint8_t act = r.u8();
    if (act > static_cast<std::uint8_t>(Activation::kRelu)) raise(ErrorCode::kCorruptModel, "bad activation");
    l.activation = static_cast<Activation>(act);
    m.arch.layers.push_back(l);
  }
  try {
    validate(m.arch);
  } catch (const Error& e) {
    raise(ErrorCode::kCorruptModel, std::string("invalid architecture: ") + e.what());
  }
  m.params = zero_params<float>(m.arch);
  std::size_t need = 0;
  for (const auto& l : m.params.layers) need += (l.weights.size() + l.bias.size()) * 4;
  if (r.remaining() != need) raise(ErrorCode::kCorruptModel, "payload length does not match architecture");
  for (auto& l : m.params.layers) {
    for (auto& v : l.weights) v = r.f32();
  }
  for (auto& l : m.params.layers) {
    for (auto& v : l.bias) v = r.f32();
  }
  return m;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void save_model(const ModelParams& params, const Architecture& arch, const std::filesystem::path& path) {
  const auto bytes = encode_model(arch, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorCode::kIo, "write failed for " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) raise(ErrorCode::kIo, "model file " + path.string() + " does not exist");
  return decode_model(read_file_bytes(path));
}

std::size_t weight_payload_bytes(const ModelParams& params) { return params.scalar_count() * sizeof(float); }

}  // namespace bfd
