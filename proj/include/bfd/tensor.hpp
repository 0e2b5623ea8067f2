#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bfd/error.hpp"

namespace bfd {

// rows x cols x channels. Flat vectors use rows = cols = 1.
struct Shape {
  int rows = 1;
  int cols = 1;
  int channels = 1;

  constexpr std::size_t size() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) *
           static_cast<std::size_t>(channels);
  }
  constexpr bool is_flat() const { return rows == 1 && cols == 1; }
  constexpr bool valid() const { return rows > 0 && cols > 0 && channels > 0; }

  static constexpr Shape flat(int n) { return Shape{1, 1, n}; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

// "(20,20,4)" for spatial shapes, "32" for flat vectors.
inline std::string to_string(const Shape& s) {
  if (s.is_flat()) return std::to_string(s.channels);
  return "(" + std::to_string(s.rows) + "," + std::to_string(s.cols) + "," +
         std::to_string(s.channels) + ")";
}

// Dense channels-last array: index = (r * cols + c) * channels + ch.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(checked(shape)), data_(shape.size(), T{}) {}

  BasicTensor(Shape shape, std::vector<T> data) : shape_(checked(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      raise(ErrorCode::kShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                           " does not match shape " + to_string(shape_));
    }
  }

  static BasicTensor flat(std::vector<T> data) {
    const int n = static_cast<int>(data.size());
    return BasicTensor(Shape::flat(n), std::move(data));
  }

  const Shape& shape() const { return shape_; }
  int rows() const { return shape_.rows; }
  int cols() const { return shape_.cols; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * shape_.cols + c) * shape_.channels + ch;
  }
  T& at(int r, int c, int ch) { return data_[index(r, c, ch)]; }
  const T& at(int r, int c, int ch) const { return data_[index(r, c, ch)]; }

  // Same data viewed as a flat vector; the channels-last layout already
  // matches row-major flattening.
  BasicTensor flattened() const& { return BasicTensor(Shape::flat(static_cast<int>(size())), data_); }
  BasicTensor flattened() && {
    const int n = static_cast<int>(size());
    return BasicTensor(Shape::flat(n), std::move(data_));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  static Shape checked(Shape s) {
    if (!s.valid()) raise(ErrorCode::kShapeMismatch, "non-positive tensor dimension " + to_string(s));
    return s;
  }

  Shape shape_{};
  std::vector<T> data_ = std::vector<T>(1);
};

using Tensor = BasicTensor<float>;

}  // namespace bfd
