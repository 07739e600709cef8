#pragma once

// GEMM-backed "same" cross-correlation on raw channels-last buffers. Shared by
// the tensor ops, the recurrent cell and the backward pass.

#include <cstddef>
#include <span>
#include <vector>

namespace cloudlstm::detail {

struct ConvGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;

  [[nodiscard]] std::size_t pixels() const noexcept { return height * width; }
  [[nodiscard]] std::size_t patch() const noexcept { return kernel * kernel * in_channels; }
};

/// Patch matrix [H*W, k*k*Cin]; column order matches a row-major [k, k, Cin] kernel.
void im2col(std::span<const double> input, const ConvGeometry& g, std::vector<double>& cols);

/// Scatter-add a patch matrix back onto an [H, W, Cin] buffer.
void col2im_add(std::span<const double> cols, const ConvGeometry& g, std::span<double> image);

/// out (= or +=) input ⋆ kernel. `scratch` is reused between calls.
void conv_forward(std::span<const double> input, std::span<const double> kernel,
                  const ConvGeometry& g, std::span<double> out, bool accumulate,
                  std::vector<double>& scratch);

/// grad_input += d(out)/d(input)^T grad_out
void conv_backward_input(std::span<const double> grad_out, std::span<const double> kernel,
                         const ConvGeometry& g, std::span<double> grad_input,
                         std::vector<double>& scratch);

/// kernel_grad += d(out)/d(kernel)^T grad_out
void conv_backward_kernel(std::span<const double> input, std::span<const double> grad_out,
                          const ConvGeometry& g, std::span<double> kernel_grad,
                          std::vector<double>& scratch);

}  // namespace cloudlstm::detail
