#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "cloudlstm/tensor.hpp"

namespace cloudlstm {

// CLT1 tensor encoding: the magic bytes "CLT1", the rank as u32 LE, each extent
// as u32 LE, then every value as an IEEE-754 binary64 LE in row-major order.

void write_tensor(std::ostream& out, const Tensor& tensor);

/// `source` names the stream in error messages (usually a file path).
[[nodiscard]] Tensor read_tensor(std::istream& in, const std::string& source);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
[[nodiscard]] Tensor load_tensor(const std::filesystem::path& path);

namespace io {

void write_u32(std::ostream& out, std::uint32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
void write_f64(std::ostream& out, double value);
void write_string(std::ostream& out, const std::string& value);

std::uint32_t read_u32(std::istream& in, const std::string& source);
std::uint64_t read_u64(std::istream& in, const std::string& source);
double read_f64(std::istream& in, const std::string& source);
std::string read_string(std::istream& in, const std::string& source);

}  // namespace io
}  // namespace cloudlstm
