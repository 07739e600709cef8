#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cloudlstm {

using Shape = std::vector<std::size_t>;

/// Number of elements described by a shape; the empty shape is a scalar (1).
[[nodiscard]] std::size_t element_count(const Shape& shape);

/// "[2, 3, 4]"
[[nodiscard]] std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// The flat buffer always holds exactly element_count(shape()) values. Spatial
/// tensors use channels-last layout: images are [H, W, C], convolution kernels
/// are [k, k, Cin, Cout], sequences are [T, H, W, C].
class Tensor {
 public:
  /// Rank-0 scalar holding 0.0.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  /// Throws ShapeError if data.size() does not match the shape.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::size_t extent(std::size_t axis) const;

  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t flat) noexcept { return data_[flat]; }
  double operator[](std::size_t flat) const noexcept { return data_[flat]; }

  /// Bounds-checked multi-index access.
  [[nodiscard]] double& at(std::initializer_list<std::size_t> index);
  [[nodiscard]] double at(std::initializer_list<std::size_t> index) const;

  /// Row-major flat offset of a multi-index (bounds-checked).
  [[nodiscard]] std::size_t offset(std::initializer_list<std::size_t> index) const;

  /// Same data, new shape with identical element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const;

  void fill(double value);

  /// Value equality (NaN != NaN, -0.0 == 0.0).
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// True iff shapes match and every value has the same bit pattern.
[[nodiscard]] bool bit_equal(const Tensor& a, const Tensor& b);

/// Throws ShapeError naming `what` and both shapes unless they are identical.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

[[nodiscard]] Tensor elementwise_mul(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor elementwise_add(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor scaled(const Tensor& a, double factor);

/// Numerically stable logistic function; never overflows.
[[nodiscard]] double sigmoid(double x) noexcept;
[[nodiscard]] Tensor sigmoid(const Tensor& a);
[[nodiscard]] Tensor tanh(const Tensor& a);

/// Cross-correlation of an [H, W, Cin] image with a [k, k, Cin, Cout] kernel,
/// zero padded by (k-1)/2 so the output is [H, W, Cout]. k must be odd.
[[nodiscard]] Tensor conv2d_same(const Tensor& input, const Tensor& kernel);

/// Gradient of conv2d_same with respect to its input, given the output gradient.
[[nodiscard]] Tensor conv2d_same_grad_input(const Tensor& grad_output, const Tensor& kernel);

/// Gradient of conv2d_same with respect to the kernel; `kernel_grad` is
/// accumulated into, so it must already have the kernel's shape.
void conv2d_same_grad_kernel(const Tensor& input, const Tensor& grad_output, Tensor& kernel_grad);

/// Concatenate two [..., C] tensors with equal leading extents along the last axis.
[[nodiscard]] Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Channels [begin, end) of the last axis.
[[nodiscard]] Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t end);

/// Sub-tensor at index `i` of the leading axis, e.g. one frame of a [T, H, W, C] sequence.
[[nodiscard]] Tensor leading_slice(const Tensor& t, std::size_t i);

[[nodiscard]] bool all_finite(const Tensor& t) noexcept;

}  // namespace cloudlstm
