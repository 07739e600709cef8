#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cloudlstm/tensor.hpp"

namespace cloudlstm {

/// Reflectance stack [T, H, W, D] with one normalized timestamp per frame.
struct ImageSequence {
  Tensor frames;
  std::vector<double> timestamps;

  [[nodiscard]] std::size_t length() const { return frames.rank() == 4 ? frames.extent(0) : 0; }
  [[nodiscard]] std::size_t height() const { return frames.extent(1); }
  [[nodiscard]] std::size_t width() const { return frames.extent(2); }
  [[nodiscard]] std::size_t bands() const { return frames.extent(3); }

  /// Frame t as an [H, W, D] tensor.
  [[nodiscard]] Tensor frame(std::size_t t) const { return leading_slice(frames, t); }
  [[nodiscard]] std::span<const double> frame_data(std::size_t t) const;

  [[nodiscard]] ImageSequence reversed() const;
  /// Frames at the given indices, in the given order.
  [[nodiscard]] ImageSequence select(std::span<const std::size_t> indices) const;

  /// Throws ShapeError unless frames is rank 4 and timestamps has T entries.
  void validate() const;

  /// Evenly spaced timestamps t/T for t in [0, T).
  static std::vector<double> even_timestamps(std::size_t length);
};

/// Per-frame boolean cloud mask [T, H, W] (stored as 0.0 / 1.0) with exact coverage ratios.
struct CloudMask {
  Tensor mask;
  std::vector<double> coverage;

  /// Builds the mask and computes coverage[t] = cloudy pixels / (H * W).
  static CloudMask from_mask(Tensor mask);

  [[nodiscard]] std::size_t length() const { return mask.extent(0); }
  [[nodiscard]] bool cloudy(std::size_t t, std::size_t y, std::size_t x) const;
  [[nodiscard]] CloudMask select(std::span<const std::size_t> indices) const;
  [[nodiscard]] CloudMask inverted() const;
};

/// Class index per pixel, stored as an [H, W] tensor of integral values.
struct LabelMap {
  Tensor classes;

  static LabelMap from_indices(std::size_t height, std::size_t width,
                               std::span<const std::size_t> indices);

  [[nodiscard]] std::size_t height() const { return classes.extent(0); }
  [[nodiscard]] std::size_t width() const { return classes.extent(1); }
  [[nodiscard]] std::size_t pixels() const { return classes.size(); }
  [[nodiscard]] std::size_t at(std::size_t flat) const { return static_cast<std::size_t>(classes[flat]); }

  /// Throws ShapeError unless every entry is an integer in [0, num_classes).
  void validate(std::size_t num_classes) const;

  /// [H, W, C] one-hot encoding.
  [[nodiscard]] Tensor one_hot(std::size_t num_classes) const;
};

}  // namespace cloudlstm
