#include "bfd/model.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "bfd/ops.hpp"

namespace bfd {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmaxDense: return "softmax-dense";
  }
  return "unknown";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kNone: return "none";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "none") return Activation::kNone;
  raise(ErrorCode::kInvalidArgument, "unknown activation '" + name + "' (expected tanh, relu or none)");
}

LayerSpec LayerSpec::conv(int kh, int kw, int filters, Activation act) {
  return LayerSpec{LayerKind::kConv, kh, kw, filters, 1, act};
}

LayerSpec LayerSpec::maxpool(int k, int channels, int stride) {
  return LayerSpec{LayerKind::kMaxPool, k, k, channels, stride, Activation::kNone};
}

LayerSpec LayerSpec::dense(int units, Activation act) {
  return LayerSpec{LayerKind::kDense, 0, 0, units, 0, act};
}

LayerSpec LayerSpec::softmax_dense(int classes) {
  return LayerSpec{LayerKind::kSoftmaxDense, 0, 0, classes, 0, Activation::kNone};
}

int Architecture::num_classes() const {
  if (layers.empty()) return 0;
  return layers.back().filter_count;
}

Architecture canonical_architecture() {
  Architecture arch;
  arch.input = Shape{20, 20, 1};
  arch.layers = {
      LayerSpec::conv(10, 10, 4),   LayerSpec::conv(5, 5, 8),     LayerSpec::maxpool(4, 8, 2),
      LayerSpec::conv(3, 3, 16),    LayerSpec::conv(3, 3, 16),    LayerSpec::maxpool(2, 16, 2),
      LayerSpec::conv(3, 3, 32),    LayerSpec::conv(3, 3, 64),    LayerSpec::maxpool(1, 64, 2),
      LayerSpec::dense(32),         LayerSpec::softmax_dense(10),
  };
  return arch;
}

Architecture with_activation(Architecture arch, Activation act) {
  for (auto& layer : arch.layers) {
    if (layer.kind == LayerKind::kConv || layer.kind == LayerKind::kDense) layer.activation = act;
  }
  return arch;
}

namespace {

[[noreturn]] void fail(std::size_t index, const std::string& what) {
  raise(ErrorCode::kShapeMismatch, "layer " + std::to_string(index + 1) + ": " + what);
}

Shape step_shape(const Shape& in, const LayerSpec& layer, std::size_t index) {
  switch (layer.kind) {
    case LayerKind::kConv:
      if (layer.filter_h < 1 || layer.filter_w < 1 || layer.filter_count < 1) fail(index, "conv dims must be positive");
      if (layer.stride != 1) fail(index, "conv stride must be 1");
      return Shape{in.rows, in.cols, layer.filter_count};
    case LayerKind::kMaxPool: {
      if (layer.activation != Activation::kNone) fail(index, "pools carry no activation");
      if (layer.filter_h != layer.filter_w || layer.filter_h < 1) fail(index, "pool window must be square and positive");
      if (layer.stride < 1) fail(index, "pool stride must be positive");
      if (layer.filter_count != in.channels) {
        fail(index, "pool declares " + std::to_string(layer.filter_count) + " channels but input has " +
                        std::to_string(in.channels));
      }
      const int k = layer.filter_h;
      if (k > std::min(in.rows, in.cols)) fail(index, "pool window larger than input " + to_string(in));
      return Shape{pooled_extent(in.rows, k, layer.stride), pooled_extent(in.cols, k, layer.stride), in.channels};
    }
    case LayerKind::kDense:
    case LayerKind::kSoftmaxDense:
      if (layer.filter_count < 1) fail(index, "dense units must be positive");
      if (layer.stride != 0 || layer.filter_h != 0 || layer.filter_w != 0) fail(index, "dense layers carry no filter or stride");
      if (layer.kind == LayerKind::kSoftmaxDense && layer.activation != Activation::kNone) {
        fail(index, "softmax layer carries no extra activation");
      }
      return Shape::flat(layer.filter_count);
  }
  fail(index, "unknown layer kind");
  return in;
}

}  // namespace

std::vector<Shape> infer_shapes(const Architecture& arch) {
  if (!arch.input.valid()) raise(ErrorCode::kShapeMismatch, "input shape " + to_string(arch.input) + " is invalid");
  if (arch.layers.empty()) raise(ErrorCode::kShapeMismatch, "architecture has no layers");
  std::vector<Shape> shapes;
  shapes.reserve(arch.layers.size());
  Shape cur = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].kind == LayerKind::kSoftmaxDense && i + 1 != arch.layers.size()) {
      fail(i, "softmax layer must be last");
    }
    cur = step_shape(cur, arch.layers[i], i);
    shapes.push_back(cur);
  }
  if (arch.layers.back().kind != LayerKind::kSoftmaxDense) {
    raise(ErrorCode::kShapeMismatch, "final layer must be softmax-dense");
  }
  return shapes;
}

void validate(const Architecture& arch) { (void)infer_shapes(arch); }

std::vector<std::string> layer_names(const Architecture& arch) {
  int conv = 0, pool = 0, dense = 0;
  std::vector<std::string> names;
  for (const auto& layer : arch.layers) {
    switch (layer.kind) {
      case LayerKind::kConv: names.push_back("Conv" + std::to_string(++conv)); break;
      case LayerKind::kMaxPool: names.push_back("Maxpool" + std::to_string(++pool)); break;
      case LayerKind::kDense: names.push_back("Dense" + std::to_string(++dense)); break;
      case LayerKind::kSoftmaxDense: names.push_back("Softmax"); break;
    }
  }
  return names;
}

std::vector<LayerParamCount> parameter_layout(const Architecture& arch) {
  const auto shapes = infer_shapes(arch);
  std::vector<LayerParamCount> out;
  Shape in = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    LayerParamCount count;
    switch (layer.kind) {
      case LayerKind::kConv:
        count.weights = static_cast<std::size_t>(layer.filter_h) * layer.filter_w * in.channels * layer.filter_count;
        count.bias = layer.filter_count;
        break;
      case LayerKind::kDense:
      case LayerKind::kSoftmaxDense:
        count.weights = in.size() * layer.filter_count;
        count.bias = layer.filter_count;
        break;
      case LayerKind::kMaxPool: break;
    }
    out.push_back(count);
    in = shapes[i];
  }
  return out;
}

std::size_t parameter_count(const Architecture& arch) {
  std::size_t total = 0;
  for (const auto& c : parameter_layout(arch)) total += c.total();
  return total;
}

std::vector<std::uint64_t> layer_macc(const Architecture& arch) {
  const auto shapes = infer_shapes(arch);
  std::vector<std::uint64_t> out;
  Shape in = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    std::uint64_t macc = 0;
    switch (layer.kind) {
      case LayerKind::kConv:
        macc = static_cast<std::uint64_t>(shapes[i].size()) * layer.filter_h * layer.filter_w * in.channels;
        break;
      case LayerKind::kDense:
      case LayerKind::kSoftmaxDense:
        macc = static_cast<std::uint64_t>(in.size()) * layer.filter_count;
        break;
      case LayerKind::kMaxPool: break;
    }
    out.push_back(macc);
    in = shapes[i];
  }
  return out;
}

std::uint64_t count_macc(const Architecture& arch) {
  std::uint64_t total = 0;
  for (auto m : layer_macc(arch)) total += m;
  return total;
}

ResourceReport plan_memory(const Architecture& arch) {
  ResourceReport rep;
  rep.layer_shapes = infer_shapes(arch);
  rep.layer_names = layer_names(arch);
  rep.layer_macc = layer_macc(arch);
  for (const auto& c : parameter_layout(arch)) rep.layer_params.push_back(c.total());
  rep.input_bytes = arch.input.size() * kBytesPerScalar;

  std::size_t prev = rep.input_bytes;
  for (std::size_t i = 0; i < rep.layer_shapes.size(); ++i) {
    const std::size_t bytes = rep.layer_shapes[i].size() * kBytesPerScalar;
    rep.layer_ram_bytes.push_back(bytes);
    if (prev + bytes > rep.peak_ram_bytes) {
      rep.peak_ram_bytes = prev + bytes;
      rep.peak_layer = i;
    }
    prev = bytes;
  }
  for (auto p : rep.layer_params) rep.param_count += p;
  for (auto m : rep.layer_macc) rep.macc_total += m;
  rep.flash_bytes = rep.param_count * kBytesPerScalar;
  return rep;
}

namespace {

// 36390 -> "36,390"
std::string grouped(std::uint64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string kb(std::size_t bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f KB", static_cast<double>(bytes) / 1024.0);
  return buf;
}

}  // namespace

std::string render_report(const ResourceReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %-12s %10s %12s %10s\n", "layer", "shape", "params", "MACC", "RAM bytes");
  os << line;
  std::snprintf(line, sizeof(line), "%-10s %-12s %10s %12s %10s\n", "input", "", "-", "-", grouped(r.input_bytes).c_str());
  os << line;
  for (std::size_t i = 0; i < r.layer_names.size(); ++i) {
    std::snprintf(line, sizeof(line), "%-10s %-12s %10s %12s %10s\n", r.layer_names[i].c_str(),
                  to_string(r.layer_shapes[i]).c_str(), grouped(r.layer_params[i]).c_str(),
                  grouped(r.layer_macc[i]).c_str(), grouped(r.layer_ram_bytes[i]).c_str());
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-10s %-12s %10s %12s %10s\n", "total", "", grouped(r.param_count).c_str(),
                grouped(r.macc_total).c_str(), "");
  os << line;
  os << "params          : " << grouped(r.param_count) << "\n";
  os << "MACC            : " << grouped(r.macc_total) << " (multiplies only; tool-reported reference "
     << grouped(kReferenceToolMacc) << ")\n";
  os << "flash bytes     : " << grouped(r.flash_bytes) << " (" << kb(r.flash_bytes) << ")\n";
  os << "peak RAM bytes  : " << grouped(r.peak_ram_bytes) << " (" << kb(r.peak_ram_bytes) << ", at "
     << (r.peak_layer < r.layer_names.size() ? r.layer_names[r.peak_layer] : std::string("?"))
     << "; tool-reported reference 11.32 KB)\n";
  return os.str();
}

}  // namespace bfd
