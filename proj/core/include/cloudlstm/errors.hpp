#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cloudlstm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or parameter shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file. The message always names the file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Coverage filtering removed every frame of a sequence.
class EmptyAfterFilterError : public Error {
 public:
  using Error::Error;
};

/// A cloud mask with no cloudy or no clear pixels was passed where both are needed.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared during a forward or backward pass.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace cloudlstm
