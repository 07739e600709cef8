#include "cloudlstm/sequence.hpp"

#include <algorithm>
#include <cmath>

#include "cloudlstm/errors.hpp"

namespace cloudlstm {

std::span<const double> ImageSequence::frame_data(std::size_t t) const {
  const std::size_t n = height() * width() * bands();
  return frames.data().subspan(t * n, n);
}

ImageSequence ImageSequence::reversed() const {
  std::vector<std::size_t> order(length());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = order.size() - 1 - t;
  return select(order);
}

ImageSequence ImageSequence::select(std::span<const std::size_t> indices) const {
  validate();
  const std::size_t n = height() * width() * bands();
  Tensor out({indices.size(), height(), width(), bands()});
  std::vector<double> stamps;
  stamps.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t t = indices[k];
    if (t >= length()) {
      throw ShapeError("frame index " + std::to_string(t) + " out of range for sequence of length " +
                       std::to_string(length()));
    }
    std::copy_n(frames.data().data() + t * n, n, out.data().data() + k * n);
    stamps.push_back(timestamps[t]);
  }
  return {std::move(out), std::move(stamps)};
}

void ImageSequence::validate() const {
  if (frames.rank() != 4) {
    throw ShapeError("image sequence must be [T, H, W, D], got " + shape_string(frames.shape()));
  }
  if (timestamps.size() != frames.extent(0)) {
    throw ShapeError("image sequence has " + std::to_string(frames.extent(0)) + " frames but " +
                     std::to_string(timestamps.size()) + " timestamps");
  }
}

std::vector<double> ImageSequence::even_timestamps(std::size_t length) {
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    out[t] = static_cast<double>(t) / static_cast<double>(length);
  }
  return out;
}

CloudMask CloudMask::from_mask(Tensor mask) {
  if (mask.rank() != 3) {
    throw ShapeError("cloud mask must be [T, H, W], got " + shape_string(mask.shape()));
  }
  const std::size_t frames = mask.extent(0);
  const std::size_t n = mask.extent(1) * mask.extent(2);
  std::vector<double> coverage(frames, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t cloudy = 0;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = mask[t * n + p];
      if (v != 0.0 && v != 1.0) {
        throw ShapeError("cloud mask values must be 0 or 1, found " + std::to_string(v));
      }
      cloudy += v == 1.0 ? 1 : 0;
    }
    coverage[t] = n == 0 ? 0.0 : static_cast<double>(cloudy) / static_cast<double>(n);
  }
  return {std::move(mask), std::move(coverage)};
}

bool CloudMask::cloudy(std::size_t t, std::size_t y, std::size_t x) const {
  return mask[(t * mask.extent(1) + y) * mask.extent(2) + x] != 0.0;
}

CloudMask CloudMask::select(std::span<const std::size_t> indices) const {
  const std::size_t n = mask.extent(1) * mask.extent(2);
  Tensor out({indices.size(), mask.extent(1), mask.extent(2)});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= length()) throw ShapeError("mask frame index out of range");
    std::copy_n(mask.data().data() + indices[k] * n, n, out.data().data() + k * n);
  }
  return from_mask(std::move(out));
}

CloudMask CloudMask::inverted() const {
  Tensor out(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] != 0.0 ? 0.0 : 1.0;
  return from_mask(std::move(out));
}

LabelMap LabelMap::from_indices(std::size_t height, std::size_t width,
                                std::span<const std::size_t> indices) {
  if (indices.size() != height * width) {
    throw ShapeError("label map needs " + std::to_string(height * width) + " entries, got " +
                     std::to_string(indices.size()));
  }
  Tensor classes({height, width});
  for (std::size_t i = 0; i < indices.size(); ++i) classes[i] = static_cast<double>(indices[i]);
  return {std::move(classes)};
}

void LabelMap::validate(std::size_t num_classes) const {
  if (classes.rank() != 2) {
    throw ShapeError("label map must be [H, W], got " + shape_string(classes.shape()));
  }
  for (double v : classes.data()) {
    if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(num_classes)) {
      throw ShapeError("label value " + std::to_string(v) + " is not a class index below " +
                       std::to_string(num_classes));
    }
  }
}

Tensor LabelMap::one_hot(std::size_t num_classes) const {
  validate(num_classes);
  Tensor out({height(), width(), num_classes});
  for (std::size_t p = 0; p < pixels(); ++p) out[p * num_classes + at(p)] = 1.0;
  return out;
}

}  // namespace cloudlstm
