#include "cloudlstm_app/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "cloudlstm/checkpoint.hpp"
#include "cloudlstm/errors.hpp"
#include "cloudlstm/viz.hpp"

namespace cloudlstm::app {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void prepare_out(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  cfg.write(dir / kResolvedConfigName);
}

void check_compatible(const EncoderParams& params, const Dataset& dataset) {
  const CellConfig& c = params.config;
  if (c.input_channels != dataset.config.bands || c.height != dataset.config.tile_size ||
      c.width != dataset.config.tile_size || params.classes() != dataset.config.classes) {
    throw ShapeError("checkpoint expects " + std::to_string(c.height) + "x" + std::to_string(c.width) +
                     " tiles with " + std::to_string(c.input_channels) + " bands and " +
                     std::to_string(params.classes()) + " classes; dataset does not match");
  }
}

}  // namespace

std::vector<TrainingSample> partition_samples(const Dataset& dataset, Partition p, double threshold) {
  const auto kept = kept_frames(dataset.coverage, threshold);
  if (kept.empty()) {
    throw EmptyAfterFilterError("threshold " + fmt("%g", threshold) + " removes every frame");
  }
  std::vector<TrainingSample> out;
  for (const DatasetTile* tile : dataset.in_partition(p)) {
    out.push_back({tile->sequence.select(kept), tile->labels});
  }
  return out;
}

TrainingData training_data(const Dataset& dataset, double threshold) {
  return {partition_samples(dataset, Partition::train, threshold),
          partition_samples(dataset, Partition::valid, threshold)};
}

void cmd_generate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Dataset dataset = build_dataset(cfg.scene_config());
  write_dataset(cfg.out, dataset);
  cfg.write(cfg.out / kResolvedConfigName);
  const std::size_t pixels = cfg.scene.height * cfg.scene.width;
  log << "frame\tcoverage\tcloudy_pixels\n";
  for (std::size_t t = 0; t < dataset.coverage.size(); ++t) {
    const auto cloudy = static_cast<std::size_t>(std::llround(dataset.coverage[t] * static_cast<double>(pixels)));
    log << t + 1 << '\t' << fmt("%.6f", dataset.coverage[t]) << '\t' << cloudy << '\n';
  }
  log << "tiles\ttrain=" << dataset.in_partition(Partition::train).size()
      << "\tvalid=" << dataset.in_partition(Partition::valid).size()
      << "\teval=" << dataset.in_partition(Partition::eval).size()
      << "\tmargin=" << dataset.in_partition(Partition::margin).size() << '\n';
}

TrainResult train_run(const RunConfig& cfg, const Dataset& dataset, double threshold,
                      std::uint64_t seed, const fs::path& out, std::ostream& log) {
  TrainingData data = training_data(dataset, threshold);
  TrainConfig tc = cfg.train_config();
  tc.seed = seed;
  const CellConfig cell = cfg.cell_config(dataset.config.bands, dataset.config.tile_size);

  fs::create_directories(out);
  std::ofstream metrics(out / "metrics.tsv", std::ios::binary);
  if (!metrics) throw Error("cannot write " + (out / "metrics.tsv").string());
  auto on_epoch = [&](const EpochMetrics& m, const EncoderParams& params) {
    EpochMetrics row = m;
    if (!cfg.wall_clock) row.wall_seconds = 0.0;
    const std::string line = format_metrics_line(row);
    metrics << line << '\n' << std::flush;
    log << line << '\n' << std::flush;
    if (cfg.checkpoint_every > 0 && m.epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.clck", m.epoch);
      fs::create_directories(out / "checkpoints");
      save_checkpoint(out / "checkpoints" / name, params);
    }
  };
  TrainResult result = train_loop(data, cell, dataset.config.classes, tc, on_epoch);
  save_checkpoint(out / "final.clck", result.params);
  if (!cfg.wall_clock) {
    for (auto& m : result.log) m.wall_seconds = 0.0;
  }
  return result;
}

void cmd_train(const RunConfig& cfg, const fs::path& data, double threshold, std::ostream& log) {
  cfg.validate();
  const Dataset dataset = read_dataset(data);
  prepare_out(cfg, cfg.out);
  log << "epoch\ttrain_loss\tval_overall_accuracy\twall_seconds\n";
  (void)train_run(cfg, dataset, threshold, cfg.seed, cfg.out, log);
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const fs::path& data, std::ostream& log) {
  cfg.validate();
  const Dataset dataset = read_dataset(data);
  prepare_out(cfg, cfg.out);
  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k < cfg.thresholds.size(); ++k) {
    AblationRow row;
    row.threshold = cfg.thresholds[k];
    row.frames = kept_frames(dataset.coverage, row.threshold).size();
    row.seed = cfg.seed + k;
    row.dir = cfg.out / ("run" + std::to_string(k));
    log << "# threshold " << fmt("%g", row.threshold) << ": " << row.frames << " frames, seed " << row.seed << '\n';
    const TrainResult result = train_run(cfg, dataset, row.threshold, row.seed, row.dir, log);
    row.final_train_loss = result.log.back().train_loss;
    row.final_val_accuracy = result.log.back().val_accuracy;
    row.eval_accuracy = evaluate_partition(result.params, dataset, Partition::eval, row.threshold).overall_accuracy;
    rows.push_back(row);
  }

  std::ofstream summary(cfg.out / "ablation.tsv", std::ios::binary);
  summary << "threshold\tframes\tseed\tfinal_train_loss\tfinal_val_accuracy\teval_accuracy\n";
  for (const auto& r : rows) {
    summary << fmt("%g", r.threshold) << '\t' << r.frames << '\t' << r.seed << '\t'
            << fmt("%.10f", r.final_train_loss) << '\t' << fmt("%.6f", r.final_val_accuracy) << '\t'
            << fmt("%.6f", r.eval_accuracy) << '\n';
  }
  if (!summary) throw Error("cannot write " + (cfg.out / "ablation.tsv").string());
  return rows;
}

EvaluationResult evaluate_partition(const EncoderParams& params, const Dataset& dataset, Partition p,
                                    double threshold) {
  check_compatible(params, dataset);
  const auto samples = partition_samples(dataset, p, threshold);
  if (samples.empty()) throw ConfigError("partition " + to_string(p) + " has no tiles");
  const std::size_t C = params.classes();
  EvaluationResult result;
  result.confusion.classes = C;
  result.confusion.counts.assign(C * C, 0);
  for (const auto& s : samples) {
    const ConfusionMatrix cm = confusion(argmax_labels(predict(s.seq, params)), s.labels, C);
    for (std::size_t n = 0; n < cm.counts.size(); ++n) result.confusion.counts[n] += cm.counts[n];
  }
  result.tiles = samples.size();
  result.overall_accuracy =
      static_cast<double>(result.confusion.trace()) / static_cast<double>(result.confusion.total());
  return result;
}

EvaluationResult cmd_evaluate(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& data,
                              Partition p, double threshold, std::ostream& log) {
  const EncoderParams params = load_checkpoint(checkpoint);
  const Dataset dataset = read_dataset(data);
  const EvaluationResult result = evaluate_partition(params, dataset, p, threshold);
  prepare_out(cfg, cfg.out);

  const std::size_t C = result.confusion.classes;
  log << "partition\t" << to_string(p) << "\ntiles\t" << result.tiles << "\noverall_accuracy\t"
      << fmt("%.6f", result.overall_accuracy) << "\nconfusion (rows reference, columns predicted)\n";
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t r = 0; r < C; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < C; ++c) {
      log << (c ? "\t" : "") << result.confusion.at(r, c);
      row.push_back(result.confusion.at(r, c));
    }
    log << '\n';
    matrix.push_back(row);
  }
  const nlohmann::json doc = {{"checkpoint", checkpoint.string()},
                              {"dataset", data.string()},
                              {"partition", to_string(p)},
                              {"threshold", threshold},
                              {"tiles", result.tiles},
                              {"overall_accuracy", result.overall_accuracy},
                              {"confusion", matrix}};
  std::ofstream(cfg.out / "evaluation.json", std::ios::binary) << doc.dump(2) << '\n';
  return result;
}

VisualizeResult cmd_visualize(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& data,
                              const VisualizeOptions& opts, std::ostream& log) {
  const EncoderParams params = load_checkpoint(checkpoint);
  const Dataset dataset = read_dataset(data);
  check_compatible(params, dataset);
  const std::size_t r = params.config.hidden_channels;
  for (std::size_t ch : opts.channels) {
    if (ch >= r) {
      throw ConfigError("--channels: channel " + std::to_string(ch) + " out of range, the checkpoint has " +
                        std::to_string(r) + " hidden channels");
    }
  }
  if (opts.channels.empty() && (opts.top == 0 || opts.top > r)) {
    throw ConfigError("--top must lie in [1, " + std::to_string(r) + "]");
  }

  const DatasetTile* tile = nullptr;
  if (opts.tile.empty()) {
    const auto eval = dataset.in_partition(Partition::eval);
    if (eval.empty()) throw ConfigError("--tile: dataset has no eval tiles");
    tile = eval.front();
  } else {
    tile = &dataset.tile(opts.tile);
  }
  const auto kept = kept_frames(dataset.coverage, opts.threshold);
  if (kept.empty()) throw EmptyAfterFilterError("--threshold removes every frame");
  const ImageSequence seq = tile->sequence.select(kept);
  const CloudMask clouds = tile->clouds.select(kept);
  const EncodeResult enc = encode(seq, params.forward, true, params.config.variant);

  VisualizeResult result;
  result.report = cloud_sensitivity(*enc.trace, clouds);

  std::size_t first = 1, last = seq.length();
  if (opts.steps) {
    std::tie(first, last) = *opts.steps;
    if (first < 1 || last < first || last > seq.length()) {
      throw ConfigError("--steps must lie within [1, " + std::to_string(seq.length()) + "]");
    }
  }
  std::vector<std::size_t> steps;
  for (std::size_t t = first; t <= last; ++t) steps.push_back(t);

  std::vector<std::size_t> channels = opts.channels;
  if (channels.empty()) {
    for (std::size_t n = 0; n < opts.top; ++n) channels.push_back(result.report.channels[n].channel);
  }

  prepare_out(cfg, cfg.out);
  std::ofstream(cfg.out / (opts.prefix + "_sensitivity.tsv"), std::ios::binary) << result.report.to_tsv();
  for (std::size_t ch : channels) {
    PanelSpec spec = PanelSpec::gate_panel(ch, steps);
    spec.cell_scale = cfg.panel_scale;
    const fs::path path = cfg.out / panel_filename(opts.prefix, ch, first, last);
    write_image(render_panel(*enc.trace, seq, spec), path);
    result.panels.push_back(path);
  }

  log << "tile\t" << tile->id << "\nchannel\tcloudy_mean\tclear_mean\tratio\n" << result.report.to_tsv();
  for (const auto& p : result.panels) log << "wrote\t" << p.string() << '\n';
  return result;
}

}  // namespace cloudlstm::app
