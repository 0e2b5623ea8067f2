#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfd/tensor.hpp"

namespace bfd {

enum class LayerKind : std::uint8_t { kConv = 0, kMaxPool = 1, kDense = 2, kSoftmaxDense = 3 };
enum class Activation : std::uint8_t { kNone = 0, kTanh = 1, kRelu = 2 };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

// One row of the layer table. For pools, filter_count records the channel
// count passing through (must equal the input channels). Dense layers use
// filter_count as the unit count and carry no filter size or stride.
struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int filter_h = 0;
  int filter_w = 0;
  int filter_count = 0;
  int stride = 0;
  Activation activation = Activation::kNone;

  static LayerSpec conv(int kh, int kw, int filters, Activation act = Activation::kTanh);
  static LayerSpec maxpool(int k, int channels, int stride);
  static LayerSpec dense(int units, Activation act = Activation::kTanh);
  static LayerSpec softmax_dense(int classes);

  bool has_weights() const { return kind != LayerKind::kMaxPool; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
  Shape input{20, 20, 1};
  std::vector<LayerSpec> layers;

  int num_classes() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// The 11-layer network over a 20x20x1 frame, tanh throughout, softmax over
// the ten fault classes.
Architecture canonical_architecture();

// Copy of arch with every conv/dense activation replaced.
Architecture with_activation(Architecture arch, Activation act);

// Throws ShapeMismatch on illegal layer combinations or collapsing shapes.
void validate(const Architecture& arch);

// Output shape of every layer, in order.
std::vector<Shape> infer_shapes(const Architecture& arch);

// Display names in the style Conv1, Maxpool1, Dense1, Softmax.
std::vector<std::string> layer_names(const Architecture& arch);

struct LayerParamCount {
  std::size_t weights = 0;
  std::size_t bias = 0;
  std::size_t total() const { return weights + bias; }
};

std::vector<LayerParamCount> parameter_layout(const Architecture& arch);
std::size_t parameter_count(const Architecture& arch);

// One MACC per kernel multiply; bias adds, activations and pooling excluded.
std::uint64_t count_macc(const Architecture& arch);
std::vector<std::uint64_t> layer_macc(const Architecture& arch);

// The figure the vendor deployment tool reported for this network. Carried
// as reference metadata next to our own count; the two conventions differ.
inline constexpr std::uint64_t kReferenceToolMacc = 1238380;
inline constexpr double kReferenceToolRamKb = 11.32;

inline constexpr std::size_t kBytesPerScalar = 4;

struct ResourceReport {
  std::vector<std::string> layer_names;
  std::vector<Shape> layer_shapes;
  std::vector<std::size_t> layer_params;
  std::vector<std::uint64_t> layer_macc;
  // Output activation bytes of each layer.
  std::vector<std::size_t> layer_ram_bytes;
  std::size_t input_bytes = 0;
  std::size_t param_count = 0;
  std::uint64_t macc_total = 0;
  std::size_t flash_bytes = 0;
  // Largest input + output activation pair (two alternating buffers).
  std::size_t peak_ram_bytes = 0;
  std::size_t peak_layer = 0;
};

ResourceReport plan_memory(const Architecture& arch);

// Fixed-width text table, one row per layer plus totals.
std::string render_report(const ResourceReport& report);

}  // namespace bfd
