#include "cloudlstm/tensor_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "cloudlstm/errors.hpp"

namespace cloudlstm {
namespace {

constexpr std::array<char, 4> kMagic{'C', 'L', 'T', '1'};
// Largest element count accepted from a file header.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;
constexpr std::uint32_t kMaxRank = 16;
constexpr std::uint32_t kMaxString = 1u << 16;

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt read_le(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(source + ": unexpected end of data");
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

namespace io {

void write_u32(std::ostream& out, std::uint32_t value) { write_le(out, value); }
void write_u64(std::ostream& out, std::uint64_t value) { write_le(out, value); }
void write_f64(std::ostream& out, double value) { write_le(out, std::bit_cast<std::uint64_t>(value)); }

void write_string(std::ostream& out, const std::string& value) {
  write_u32(out, static_cast<std::uint32_t>(value.size()));
  out.write(value.data(), static_cast<std::streamsize>(value.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& source) {
  return read_le<std::uint32_t>(in, source);
}

std::uint64_t read_u64(std::istream& in, const std::string& source) {
  return read_le<std::uint64_t>(in, source);
}

double read_f64(std::istream& in, const std::string& source) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in, source));
}

std::string read_string(std::istream& in, const std::string& source) {
  const std::uint32_t length = read_u32(in, source);
  if (length > kMaxString) throw FormatError(source + ": string length " + std::to_string(length) + " too large");
  std::string value(length, '\0');
  in.read(value.data(), length);
  if (in.gcount() != static_cast<std::streamsize>(length)) {
    throw FormatError(source + ": unexpected end of data in string");
  }
  return value;
}

}  // namespace io

void write_tensor(std::ostream& out, const Tensor& tensor) {
  out.write(kMagic.data(), kMagic.size());
  io::write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t extent : tensor.shape()) {
    if (extent > std::numeric_limits<std::uint32_t>::max()) {
      throw ShapeError("tensor extent " + std::to_string(extent) + " exceeds u32");
    }
    io::write_u32(out, static_cast<std::uint32_t>(extent));
  }
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.data().data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  } else {
    for (double v : tensor.data()) io::write_f64(out, v);
  }
}

Tensor read_tensor(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) {
    throw FormatError(source + ": missing CLT1 magic");
  }
  const std::uint32_t rank = io::read_u32(in, source);
  if (rank > kMaxRank) throw FormatError(source + ": implausible rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& extent : shape) {
    extent = io::read_u32(in, source);
    count *= extent;
    if (count > kMaxElements) throw FormatError(source + ": implausible tensor size");
  }
  std::vector<double> data(static_cast<std::size_t>(count));
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = static_cast<std::streamsize>(data.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(data.data()), bytes);
    if (in.gcount() != bytes) {
      throw FormatError(source + ": truncated tensor data (expected " + std::to_string(count) +
                        " values)");
    }
  } else {
    for (auto& v : data) v = io::read_f64(in, source);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_tensor(out, tensor);
  if (!out) throw Error("failed writing " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  Tensor t = read_tensor(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after tensor");
  }
  return t;
}

}  // namespace cloudlstm
