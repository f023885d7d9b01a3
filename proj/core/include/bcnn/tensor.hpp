#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bcnn/error.hpp"

namespace bcnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

/// Dense row-major n-dimensional array. A default-constructed tensor is
/// "unset": rank 0 and no storage. Every other tensor has dims >= 1 and
/// exactly shape_size(shape) elements.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    check_dims(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims(shape_);
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<T> values)
      : BasicTensor(std::move(shape), std::vector<T>(values)) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  bool empty() const noexcept { return data_.empty(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Number of elements per leading-axis slice (per sample for batched data).
  std::size_t row_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  BasicTensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }

  void reshape(Shape shape) {
    check_dims(shape);
    if (shape_size(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                       shape_to_string(shape));
    }
    shape_ = std::move(shape);
  }

  /// Rows [first, first + count) along the leading axis.
  BasicTensor slice_rows(std::size_t first, std::size_t count) const {
    if (shape_.empty() || first + count > shape_[0] || count == 0) {
      throw ShapeError("row slice out of range for " + shape_to_string(shape_));
    }
    Shape s = shape_;
    s[0] = count;
    const std::size_t stride = row_size();
    return BasicTensor(std::move(s),
                       std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                                      data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride)));
  }

  /// Element-wise equality of shape and values (value ==, not bit patterns).
  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return BasicTensor<U>(shape_, std::move(out));
  }

 private:
  static void check_dims(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dimension must be >= 1, got " + shape_to_string(shape));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Bitwise comparison: same shape and identical object representation.
template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace bcnn
