#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cloudlstm/convlstm.hpp"
#include "cloudlstm/synthdata.hpp"
#include "cloudlstm/train.hpp"

namespace cloudlstm::app {

/// Every knob of the experiment workflow. Serialized as key=value lines.
struct RunConfig {
  std::uint64_t seed = 7;
  SceneConfig scene;
  std::size_t kernel = 3;
  std::size_t hidden_channels = 32;
  LstmVariant variant = LstmVariant::printed;
  TrainConfig train;
  std::size_t checkpoint_every = 10;  // 0 writes only the final checkpoint
  bool wall_clock = true;             // false logs 0 in the wall_seconds column
  std::vector<double> thresholds{1.01, 0.5, 0.25, 0.1, 0.0};
  std::size_t panel_scale = 4;
  std::filesystem::path out = "run";

  /// Assigns one key; throws ConfigError naming the key on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Applies every key=value line of a file. Blank lines and '#' comments are skipped.
  void load_file(const std::filesystem::path& path);
  /// Parses "key=value".
  void apply_assignment(const std::string& assignment);

  [[nodiscard]] std::string to_text() const;
  void write(const std::filesystem::path& path) const;
  void validate() const;

  /// scene.seed and train.seed follow the top-level seed.
  [[nodiscard]] SceneConfig scene_config() const;
  [[nodiscard]] TrainConfig train_config() const;
  [[nodiscard]] CellConfig cell_config(std::size_t input_channels, std::size_t tile) const;

  [[nodiscard]] static std::vector<std::string> keys();
};

inline constexpr const char* kResolvedConfigName = "run_config.txt";

}  // namespace cloudlstm::app
