#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cloudlstm/metrics.hpp"
#include "cloudlstm/synthdata.hpp"
#include "cloudlstm/train.hpp"
#include "cloudlstm_app/run_config.hpp"

namespace cloudlstm::app {

/// Tiles of the given partition, each restricted to the scene frames whose
/// coverage passes the threshold.
[[nodiscard]] std::vector<TrainingSample> partition_samples(const Dataset& dataset, Partition p,
                                                            double threshold);
[[nodiscard]] TrainingData training_data(const Dataset& dataset, double threshold);

/// Writes the dataset into cfg.out and prints the per-frame coverage table.
void cmd_generate(const RunConfig& cfg, std::ostream& log);

/// Trains on the dataset into `out`: metrics.tsv, checkpoints/epoch_<n>.clck, final.clck.
TrainResult train_run(const RunConfig& cfg, const Dataset& dataset, double threshold,
                      std::uint64_t seed, const std::filesystem::path& out, std::ostream& log);

void cmd_train(const RunConfig& cfg, const std::filesystem::path& data, double threshold,
               std::ostream& log);

struct AblationRow {
  double threshold = 0.0;
  std::size_t frames = 0;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double final_val_accuracy = 0.0;
  double eval_accuracy = 0.0;
  std::filesystem::path dir;
};

/// One independently seeded run per threshold (seed = cfg.seed + index) under
/// cfg.out/run<index>, plus cfg.out/ablation.tsv.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const std::filesystem::path& data,
                                    std::ostream& log);

struct EvaluationResult {
  double overall_accuracy = 0.0;
  ConfusionMatrix confusion;
  std::size_t tiles = 0;
};

[[nodiscard]] EvaluationResult evaluate_partition(const EncoderParams& params, const Dataset& dataset,
                                                  Partition p, double threshold);

/// Prints accuracy and confusion matrix; writes cfg.out/evaluation.json.
EvaluationResult cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                              const std::filesystem::path& data, Partition p, double threshold,
                              std::ostream& log);

struct VisualizeOptions {
  std::string tile;                   // empty: first eval tile
  std::vector<std::size_t> channels;  // empty: the top-ranked channels
  std::size_t top = 1;
  std::optional<std::pair<std::size_t, std::size_t>> steps;  // 1-based, inclusive
  std::string prefix = "panel";
  double threshold = 1.01;
};

struct VisualizeResult {
  CloudSensitivityReport report;
  std::vector<std::filesystem::path> panels;
};

/// Forward-direction trace on one tile: <prefix>_sensitivity.tsv and one PGM panel per channel.
VisualizeResult cmd_visualize(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                              const std::filesystem::path& data, const VisualizeOptions& opts,
                              std::ostream& log);

/// Full command line: subcommand, --config, --seed, --out, --set key=value, ...
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cloudlstm::app
