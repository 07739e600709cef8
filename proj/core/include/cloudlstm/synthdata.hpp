#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cloudlstm/sequence.hpp"

namespace cloudlstm {

/// Synthetic scene parameters. Pixel units assume a nominal 10 m ground sampling.
struct SceneConfig {
  std::size_t height = 192;
  std::size_t width = 192;
  std::size_t tile_size = 24;
  std::size_t frames = 30;
  std::size_t bands = 4;
  std::size_t classes = 6;
  double parcel_size = 16.0;        // parcels are split until their longer side is <= this
  double cloud_probability = 0.4;   // chance a frame receives a cloud event
  double cloud_opacity = 1.0;       // reflectance written into cloudy pixels, all bands
  double noise_std = 0.02;
  bool shadows = false;             // darken a displaced copy of each cloud by 0.5
  std::size_t block_size = 96;
  std::size_t margin = 12;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Per-class temporal signature: baseline[b] + amplitude[b] * exp(-(t - center)^2 / (2 width^2)).
struct ClassProfile {
  double center = 0.5;
  double width = 0.1;
  std::vector<double> baseline;
  std::vector<double> amplitude;

  [[nodiscard]] double reflectance(std::size_t band, double time) const;
};

struct Scene {
  ImageSequence sequence;
  LabelMap labels;
  CloudMask clouds;
  std::vector<ClassProfile> profiles;
};

[[nodiscard]] Scene generate_scene(const SceneConfig& cfg);

/// Indices of frames with coverage < threshold; threshold 0 keeps coverage == 0.
[[nodiscard]] std::vector<std::size_t> kept_frames(std::span<const double> coverage, double threshold);

struct FilteredSequence {
  ImageSequence sequence;
  CloudMask clouds;
  std::vector<std::size_t> kept;
};

/// Throws EmptyAfterFilterError when no frame survives.
[[nodiscard]] FilteredSequence coverage_filter(const ImageSequence& seq, const CloudMask& mask,
                                               double threshold);

enum class Partition : std::uint8_t { train, valid, eval, margin };

[[nodiscard]] std::string to_string(Partition p);
[[nodiscard]] Partition parse_partition(const std::string& text);

struct TileInfo {
  std::size_t index = 0;
  std::size_t y0 = 0;  // top-left pixel
  std::size_t x0 = 0;
  std::size_t block = 0;
  Partition partition = Partition::margin;
};

struct PartitionAssignment {
  std::size_t tile_size = 0;
  std::size_t block_size = 0;
  std::size_t margin = 0;
  std::size_t block_rows = 0;
  std::size_t block_cols = 0;
  std::vector<Partition> blocks;  // row-major over the block grid
  std::vector<TileInfo> tiles;    // row-major over the tile grid

  [[nodiscard]] std::size_t count(Partition p) const;
};

/// Regular block grid with train/valid/eval shares proportional to `ratios`.
/// Every internal block border carries a strip of `margin` pixels split between
/// the two neighbours; tiles overlapping their block's strip become Partition::margin.
[[nodiscard]] PartitionAssignment partition_blocks(std::size_t height, std::size_t width,
                                                   std::size_t tile_size, std::size_t block_size,
                                                   std::size_t margin,
                                                   std::array<std::size_t, 3> ratios,
                                                   std::uint64_t seed);

struct DatasetTile {
  std::string id;
  TileInfo info;
  ImageSequence sequence;  // [T, tile, tile, D]
  LabelMap labels;         // [tile, tile]
  CloudMask clouds;        // [T, tile, tile]
};

struct Dataset {
  SceneConfig config;
  std::vector<ClassProfile> profiles;
  std::vector<double> coverage;  // scene-wide, per frame
  std::vector<DatasetTile> tiles;

  [[nodiscard]] std::vector<const DatasetTile*> in_partition(Partition p) const;
  [[nodiscard]] const DatasetTile& tile(const std::string& id) const;
};

/// generate_scene + partition_blocks (4:1:1) + tiling.
[[nodiscard]] Dataset build_dataset(const SceneConfig& cfg);

// Directory layout: manifest.txt plus tiles/<id>.clt, labels/<id>.clt and
// masks/<id>.clt, all CLT1 tensors.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace cloudlstm
