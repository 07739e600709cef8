#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cloudlstm/convlstm.hpp"

namespace cloudlstm {

// Checkpoint container:
//   "CLCK", version u32 (=1),
//   kernel, input_channels, hidden_channels, height, width, variant (u32 LE each),
//   tensor count u32,
//   per tensor: name (u32 length + bytes) followed by a CLT1 tensor.
// Tensors are written in EncoderParams::named() order.

void write_checkpoint(std::ostream& out, const EncoderParams& params);
[[nodiscard]] EncoderParams read_checkpoint(std::istream& in, const std::string& source);

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);
[[nodiscard]] EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace cloudlstm
