#pragma once

// Fused-gate evaluation of the recurrent cell. The four input kernels (and the
// four hidden kernels) are packed side by side into one [k, k, Cin, 4r] matrix
// so each step costs two GEMMs instead of eight. Gate order in the packed
// channel axis is f, i, j, o.

#include <array>
#include <span>
#include <vector>

#include "cloudlstm/convlstm.hpp"
#include "conv_kernels.hpp"

namespace cloudlstm::detail {

struct PackedCell {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t input_channels = 0;
  std::size_t hidden = 0;
  std::size_t kernel = 1;
  LstmVariant variant = LstmVariant::printed;
  std::vector<double> wx;  // [k, k, d, 4r]
  std::vector<double> wh;  // [k, k, r, 4r]

  static PackedCell pack(const ConvLstmParams& p, LstmVariant variant, std::size_t height,
                         std::size_t width);

  [[nodiscard]] ConvGeometry x_geometry() const {
    return {height, width, input_channels, 4 * hidden, kernel};
  }
  [[nodiscard]] ConvGeometry h_geometry() const { return {height, width, hidden, 4 * hidden, kernel}; }
  [[nodiscard]] std::size_t state_size() const { return height * width * hidden; }
};

struct Workspace {
  std::vector<double> cols;
  std::vector<double> z;
};

/// Interleave four [rows, r] kernels into one [rows, 4r] matrix.
void pack_gates(const std::array<const Tensor*, 4>& gates, std::vector<double>& out);

/// Add the four [rows, r] blocks of a packed [rows, 4r] gradient into the gate tensors.
void unpack_gates_add(std::span<const double> packed, const std::array<Tensor*, 4>& gates);

/// Evaluate one step; `out` tensors are (re)allocated to [H, W, r].
void forward_step(const PackedCell& cell, std::span<const double> x, std::span<const double> h_prev,
                  std::span<const double> c_prev, GateRecord& out, Workspace& ws);

/// Encode with every step recorded. Used by the backward pass.
GateTrace forward_trace(const PackedCell& cell, const ImageSequence& seq, Workspace& ws);

}  // namespace cloudlstm::detail
