#include "conv_kernels.hpp"

#include <algorithm>

#include <Eigen/Core>

namespace cloudlstm::detail {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

}  // namespace

void im2col(std::span<const double> input, const ConvGeometry& g, std::vector<double>& cols) {
  const std::size_t k = g.kernel;
  const std::size_t cin = g.in_channels;
  const std::size_t patch = g.patch();
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  cols.assign(g.pixels() * patch, 0.0);

  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double* row = cols.data() + static_cast<std::size_t>(y * w + x) * patch;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(dy) - pad;
        if (sy < 0 || sy >= h) continue;
        for (std::size_t dx = 0; dx < k; ++dx) {
          const std::ptrdiff_t sx = x + static_cast<std::ptrdiff_t>(dx) - pad;
          if (sx < 0 || sx >= w) continue;
          const double* src = input.data() + static_cast<std::size_t>(sy * w + sx) * cin;
          std::copy_n(src, cin, row + (dy * k + dx) * cin);
        }
      }
    }
  }
}

void col2im_add(std::span<const double> cols, const ConvGeometry& g, std::span<double> image) {
  const std::size_t k = g.kernel;
  const std::size_t cin = g.in_channels;
  const std::size_t patch = g.patch();
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);

  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double* row = cols.data() + static_cast<std::size_t>(y * w + x) * patch;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(dy) - pad;
        if (sy < 0 || sy >= h) continue;
        for (std::size_t dx = 0; dx < k; ++dx) {
          const std::ptrdiff_t sx = x + static_cast<std::ptrdiff_t>(dx) - pad;
          if (sx < 0 || sx >= w) continue;
          double* dst = image.data() + static_cast<std::size_t>(sy * w + sx) * cin;
          const double* src = row + (dy * k + dx) * cin;
          for (std::size_t c = 0; c < cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

void conv_forward(std::span<const double> input, std::span<const double> kernel,
                  const ConvGeometry& g, std::span<double> out, bool accumulate,
                  std::vector<double>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.pixels());
  const auto depth = static_cast<Eigen::Index>(g.patch());
  const auto cols = static_cast<Eigen::Index>(g.out_channels);

  const double* lhs = input.data();
  if (g.kernel != 1) {
    im2col(input, g, scratch);
    lhs = scratch.data();
  }
  ConstMap a(lhs, rows, depth);
  ConstMap b(kernel.data(), depth, cols);
  MutableMap c(out.data(), rows, cols);
  if (accumulate) {
    c.noalias() += a * b;
  } else {
    c.noalias() = a * b;
  }
}

void conv_backward_input(std::span<const double> grad_out, std::span<const double> kernel,
                         const ConvGeometry& g, std::span<double> grad_input,
                         std::vector<double>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.pixels());
  const auto depth = static_cast<Eigen::Index>(g.patch());
  const auto cols = static_cast<Eigen::Index>(g.out_channels);

  ConstMap dout(grad_out.data(), rows, cols);
  ConstMap b(kernel.data(), depth, cols);
  if (g.kernel == 1) {
    MutableMap din(grad_input.data(), rows, depth);
    din.noalias() += dout * b.transpose();
    return;
  }
  scratch.resize(static_cast<std::size_t>(rows * depth));
  MutableMap dcols(scratch.data(), rows, depth);
  dcols.noalias() = dout * b.transpose();
  col2im_add(scratch, g, grad_input);
}

void conv_backward_kernel(std::span<const double> input, std::span<const double> grad_out,
                          const ConvGeometry& g, std::span<double> kernel_grad,
                          std::vector<double>& scratch) {
  const auto rows = static_cast<Eigen::Index>(g.pixels());
  const auto depth = static_cast<Eigen::Index>(g.patch());
  const auto cols = static_cast<Eigen::Index>(g.out_channels);

  const double* lhs = input.data();
  if (g.kernel != 1) {
    im2col(input, g, scratch);
    lhs = scratch.data();
  }
  ConstMap a(lhs, rows, depth);
  ConstMap dout(grad_out.data(), rows, cols);
  MutableMap dk(kernel_grad.data(), depth, cols);
  dk.noalias() += a.transpose() * dout;
}

}  // namespace cloudlstm::detail
