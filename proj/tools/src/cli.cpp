#include <ostream>

#include <CLI11.hpp>

#include "cloudlstm/errors.hpp"
#include "cloudlstm_app/commands.hpp"

namespace cloudlstm::app {

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--set", o.sets, "Override one config key (key=value), repeatable");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config.empty()) cfg.load_file(o.config);
  for (const auto& s : o.sets) cfg.apply_assignment(s);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  cfg.validate();
  return cfg;
}

std::pair<std::size_t, std::size_t> parse_steps(const std::string& text) {
  const auto dash = text.find('-');
  try {
    if (dash == std::string::npos) {
      const std::size_t t = std::stoul(text);
      return {t, t};
    }
    return {std::stoul(text.substr(0, dash)), std::stoul(text.substr(dash + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--steps expects <first>-<last>, got '" + text + "'");
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ConvLSTM cloud-robustness experiments on synthetic satellite time series", "cloudlstm"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* gen = app.add_subcommand("generate", "Build a synthetic dataset directory");
  add_common(gen, common);

  std::string data;
  double threshold = 1.01;
  auto* train = app.add_subcommand("train", "Train on a dataset, writing metrics.tsv and checkpoints");
  add_common(train, common);
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--threshold", threshold, "Keep frames with coverage below this ratio");

  auto* ablate = app.add_subcommand("ablate", "Train one model per coverage threshold");
  add_common(ablate, common);
  ablate->add_option("--data", data, "Dataset directory")->required();

  std::string checkpoint;
  std::string partition = "eval";
  auto* evaluate = app.add_subcommand("evaluate", "Overall accuracy and confusion matrix of a checkpoint");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--data", data, "Dataset directory")->required();
  evaluate->add_option("--partition", partition, "train, valid or eval");
  evaluate->add_option("--threshold", threshold, "Keep frames with coverage below this ratio");

  VisualizeOptions vis;
  std::string steps;
  auto* visualize = app.add_subcommand("visualize", "Cloud-sensitivity report and gate panels for one tile");
  add_common(visualize, common);
  visualize->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  visualize->add_option("--data", data, "Dataset directory")->required();
  visualize->add_option("--tile", vis.tile, "Tile id (default: first eval tile)");
  visualize->add_option("--channels", vis.channels, "Hidden channels to render")->delimiter(',');
  visualize->add_option("--top", vis.top, "Render the top-ranked channels when --channels is absent");
  visualize->add_option("--steps", steps, "Timestep range <first>-<last>, 1-based");
  visualize->add_option("--prefix", vis.prefix, "Output file prefix");
  visualize->add_option("--threshold", vis.threshold, "Keep frames with coverage below this ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const RunConfig cfg = resolve(common);
    if (*gen) {
      cmd_generate(cfg, out);
    } else if (*train) {
      cmd_train(cfg, data, threshold, out);
    } else if (*ablate) {
      const auto rows = cmd_ablate(cfg, data, out);
      out << "threshold\tframes\tfinal_val_accuracy\teval_accuracy\n";
      for (const auto& r : rows)
        out << r.threshold << '\t' << r.frames << '\t' << r.final_val_accuracy << '\t' << r.eval_accuracy << '\n';
    } else if (*evaluate) {
      (void)cmd_evaluate(cfg, checkpoint, data, parse_partition(partition), threshold, out);
    } else if (*visualize) {
      if (!steps.empty()) vis.steps = parse_steps(steps);
      (void)cmd_visualize(cfg, checkpoint, data, vis, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cloudlstm::app
