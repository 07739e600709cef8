#include "cloudlstm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "cloudlstm/errors.hpp"
#include "conv_kernels.hpp"

namespace cloudlstm {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match shape " +
                     shape_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) {
      throw ShapeError("index " + std::to_string(i) + " out of range on axis " +
                       std::to_string(axis) + " of " + shape_string(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

namespace {

template <typename Op>
Tensor binary(const Tensor& a, const Tensor& b, const char* what, Op op) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

template <typename Op>
Tensor unary(const Tensor& a, Op op) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i]);
  return out;
}

}  // namespace

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "elementwise_mul", [](double x, double y) { return x * y; });
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "elementwise_add", [](double x, double y) { return x + y; });
}

Tensor scaled(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; });
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return sigmoid(x); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); });
}

namespace {

detail::ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d_same: input must be [H, W, Cin], got " + shape_string(input.shape()));
  }
  if (kernel.rank() != 4 || kernel.extent(0) != kernel.extent(1)) {
    throw ShapeError("conv2d_same: kernel must be [k, k, Cin, Cout], got " +
                     shape_string(kernel.shape()));
  }
  if (kernel.extent(0) % 2 == 0) {
    throw ShapeError("conv2d_same: kernel size must be odd, got " +
                     std::to_string(kernel.extent(0)));
  }
  if (kernel.extent(2) != input.extent(2)) {
    throw ShapeError("conv2d_same: kernel input channels " + std::to_string(kernel.extent(2)) +
                     " do not match input channels " + std::to_string(input.extent(2)));
  }
  return {input.extent(0), input.extent(1), input.extent(2), kernel.extent(3), kernel.extent(0)};
}

}  // namespace

Tensor conv2d_same(const Tensor& input, const Tensor& kernel) {
  const auto g = conv_geometry(input, kernel);
  Tensor out({g.height, g.width, g.out_channels});
  std::vector<double> scratch;
  detail::conv_forward(input.data(), kernel.data(), g, out.data(), false, scratch);
  return out;
}

Tensor conv2d_same_grad_input(const Tensor& grad_output, const Tensor& kernel) {
  if (grad_output.rank() != 3 || kernel.rank() != 4 || grad_output.extent(2) != kernel.extent(3)) {
    throw ShapeError("conv2d_same_grad_input: gradient " + shape_string(grad_output.shape()) +
                     " incompatible with kernel " + shape_string(kernel.shape()));
  }
  Tensor probe({grad_output.extent(0), grad_output.extent(1), kernel.extent(2)});
  const auto g = conv_geometry(probe, kernel);
  std::vector<double> scratch;
  detail::conv_backward_input(grad_output.data(), kernel.data(), g, probe.data(), scratch);
  return probe;
}

void conv2d_same_grad_kernel(const Tensor& input, const Tensor& grad_output, Tensor& kernel_grad) {
  const auto g = conv_geometry(input, kernel_grad);
  if (grad_output.shape() != Shape{g.height, g.width, g.out_channels}) {
    throw ShapeError("conv2d_same_grad_kernel: output gradient " +
                     shape_string(grad_output.shape()) + " does not match geometry");
  }
  std::vector<double> scratch;
  detail::conv_backward_kernel(input.data(), grad_output.data(), g, kernel_grad.data(), scratch);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t ca = a.shape().back();
  const std::size_t cb = b.shape().back();
  Shape shape = a.shape();
  shape.back() = ca + cb;
  Tensor out(shape);
  const std::size_t rows = a.size() / std::max<std::size_t>(ca, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * ca, ca, out.data().data() + r * (ca + cb));
    std::copy_n(b.data().data() + r * cb, cb, out.data().data() + r * (ca + cb) + ca);
  }
  return out;
}

Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || begin > end || end > t.shape().back()) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + shape_string(t.shape()));
  }
  const std::size_t c = t.shape().back();
  const std::size_t width = end - begin;
  Shape shape = t.shape();
  shape.back() = width;
  Tensor out(shape);
  const std::size_t rows = c == 0 ? 0 : t.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(t.data().data() + r * c + begin, width, out.data().data() + r * width);
  }
  return out;
}

Tensor leading_slice(const Tensor& t, std::size_t i) {
  if (t.rank() == 0 || i >= t.extent(0)) {
    throw ShapeError("leading_slice: index " + std::to_string(i) + " out of range for " +
                     shape_string(t.shape()));
  }
  Shape shape(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = element_count(shape);
  std::vector<double> data(t.data().begin() + static_cast<std::ptrdiff_t>(i * n),
                           t.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  return Tensor(std::move(shape), std::move(data));
}

bool all_finite(const Tensor& t) noexcept {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace cloudlstm
