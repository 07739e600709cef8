#include "cloudlstm/checkpoint.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

#include "cloudlstm/errors.hpp"
#include "cloudlstm/tensor_io.hpp"

namespace cloudlstm {
namespace {

constexpr std::array<char, 4> kMagic{'C', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_checkpoint(std::ostream& out, const EncoderParams& params) {
  params.validate();
  const CellConfig& cfg = params.config;
  out.write(kMagic.data(), kMagic.size());
  io::write_u32(out, kVersion);
  for (std::size_t v : {cfg.kernel, cfg.input_channels, cfg.hidden_channels, cfg.height, cfg.width}) {
    io::write_u32(out, static_cast<std::uint32_t>(v));
  }
  io::write_u32(out, static_cast<std::uint32_t>(cfg.variant));
  const auto tensors = params.named();
  io::write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    io::write_string(out, name);
    write_tensor(out, *tensor);
  }
}

EncoderParams read_checkpoint(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw FormatError(source + ": not a checkpoint file");
  const std::uint32_t version = io::read_u32(in, source);
  if (version != kVersion) {
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  EncoderParams params;
  CellConfig& cfg = params.config;
  cfg.kernel = io::read_u32(in, source);
  cfg.input_channels = io::read_u32(in, source);
  cfg.hidden_channels = io::read_u32(in, source);
  cfg.height = io::read_u32(in, source);
  cfg.width = io::read_u32(in, source);
  const std::uint32_t variant = io::read_u32(in, source);
  if (variant > 1) throw FormatError(source + ": unknown variant " + std::to_string(variant));
  cfg.variant = static_cast<LstmVariant>(variant);

  auto slots = params.named();
  const std::uint32_t count = io::read_u32(in, source);
  if (count != slots.size()) {
    throw FormatError(source + ": expected " + std::to_string(slots.size()) + " tensors, found " +
                      std::to_string(count));
  }
  for (auto& [expected, slot] : slots) {
    const std::string name = io::read_string(in, source);
    if (name != expected) {
      throw FormatError(source + ": expected tensor '" + expected + "', found '" + name + "'");
    }
    *slot = read_tensor(in, source);
  }
  try {
    params.validate();
  } catch (const Error& e) {
    throw FormatError(source + ": " + e.what());
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
  if (!out) throw Error("failed writing " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return read_checkpoint(in, path.string());
}

}  // namespace cloudlstm
