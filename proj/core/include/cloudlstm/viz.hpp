#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cloudlstm/convlstm.hpp"
#include "cloudlstm/sequence.hpp"

namespace cloudlstm {

enum class PanelSource { input, i, j, f, o, c, h };

[[nodiscard]] std::string to_string(PanelSource s);

struct PanelRow {
  PanelSource source = PanelSource::i;
  std::size_t channel = 0;
  /// Overrides the default normalization range of the source.
  std::optional<std::pair<double, double>> range;
};

/// Steps run along columns, rows stack sources top to bottom.
struct PanelSpec {
  std::vector<PanelRow> rows;
  std::vector<std::size_t> timesteps;  // 1-based
  std::size_t cell_scale = 1;          // nearest-neighbour magnification of each cell
  std::size_t gap = 2;                 // mid-gray pixels between cells

  /// Input, input gate, modulation gate and cell state of one hidden channel.
  static PanelSpec gate_panel(std::size_t channel, std::vector<std::size_t> timesteps);
};

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  [[nodiscard]] std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

inline constexpr std::uint8_t kGapGray = 128;

/// Linear map of [lo, hi] onto [0, 255], rounded and clamped.
[[nodiscard]] std::uint8_t to_gray(double value, double lo, double hi);

/// Default row ranges: input [0, 1.2] on the mean of the first three bands,
/// i and f [0, 1], j and o [-1, 1], c and h symmetric max-abs over the selected steps.
[[nodiscard]] GrayImage render_panel(const GateTrace& trace, const ImageSequence& seq,
                                     const PanelSpec& spec);

/// Binary PGM: "P5\n<w> <h>\n255\n" then the raw bytes.
[[nodiscard]] std::string encode_pgm(const GrayImage& image);
void write_image(const GrayImage& image, const std::filesystem::path& path);

/// "<prefix>_cell<channel>_t<first>-<last>.pgm"
[[nodiscard]] std::string panel_filename(const std::string& prefix, std::size_t channel,
                                         std::size_t first, std::size_t last);

}  // namespace cloudlstm
