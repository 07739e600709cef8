#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cloudlstm/convlstm.hpp"
#include "cloudlstm/random.hpp"
#include "cloudlstm/sequence.hpp"

namespace cloudlstm {

/// Log arguments are clamped to this floor, so a pixel contributes at most ~27.6.
inline constexpr double kProbabilityFloor = 1e-12;

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One tensor per EncoderParams tensor, identically shaped.
struct GradientSet {
  ConvLstmParams forward;
  ConvLstmParams backward;
  Tensor head;

  static GradientSet zeros_like(const EncoderParams& params);

  [[nodiscard]] std::vector<std::pair<std::string, Tensor*>> named();
  [[nodiscard]] std::vector<std::pair<std::string, const Tensor*>> named() const;

  /// this += factor * other
  void add_scaled(const GradientSet& other, double factor);
  [[nodiscard]] bool all_finite() const;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState for_shapes(std::span<const Shape> shapes);
  static AdamState for_params(const EncoderParams& params);
};

/// Mean over pixels of -sum_c label * log(max(prob, 1e-12)).
/// `labels` must be one-hot per pixel.
[[nodiscard]] double cross_entropy(const Tensor& probs, const Tensor& labels);

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

/// Loss and exact reverse-mode gradient of
/// cross_entropy(classify(encode_bidirectional(seq)), labels) for one tile.
[[nodiscard]] BackwardResult backward(const ImageSequence& seq, const LabelMap& labels,
                                      const EncoderParams& params);

struct TrainingSample {
  ImageSequence seq;
  LabelMap labels;
};

/// Mean loss and mean gradient over the samples, accumulated in index order.
[[nodiscard]] BackwardResult batch_backward(std::span<const TrainingSample> batch,
                                            const EncoderParams& params);

/// Bias-corrected Adam on parallel lists of parameter and gradient tensors.
void adam_update(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                 AdamState& state, const TrainConfig& cfg);

void adam_step(EncoderParams& params, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg);

/// Uniform entries in [-s, s] with s = 1/sqrt(k * k * fan_in); fan_in is the
/// kernel's input-channel extent.
[[nodiscard]] EncoderParams init_params(const CellConfig& cfg, std::size_t classes, Rng& rng);
[[nodiscard]] EncoderParams init_params(const CellConfig& cfg, std::size_t classes,
                                        std::uint64_t seed);

struct GradientCheckEntry {
  std::string tensor;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> tensors;
  [[nodiscard]] double max_relative_error() const;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
[[nodiscard]] double relative_error(double analytic, double numeric, double floor);

/// Central differences on every entry of every parameter tensor, compared with backward().
[[nodiscard]] GradientCheckReport check_gradients(const ImageSequence& seq, const LabelMap& labels,
                                                  const EncoderParams& params, double step,
                                                  double floor);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_seconds = 0.0;
};

/// "epoch\ttrain_loss\tval_overall_accuracy\twall_seconds"
[[nodiscard]] std::string format_metrics_line(const EpochMetrics& m);

struct TrainingData {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> valid;
};

struct TrainResult {
  EncoderParams params;
  std::vector<EpochMetrics> log;
};

using EpochCallback = std::function<void(const EpochMetrics&, const EncoderParams&)>;

/// Overall accuracy of argmax predictions over every pixel of the samples.
[[nodiscard]] double evaluate_accuracy(std::span<const TrainingSample> samples,
                                       const EncoderParams& params);

/// Seeds one generator with cfg.seed, initializes parameters from it, then for
/// every epoch shuffles the training tiles with it, takes an Adam step per
/// batch of mean gradients and records train loss and validation accuracy.
[[nodiscard]] TrainResult train_loop(const TrainingData& data, const CellConfig& cell,
                                     std::size_t classes, const TrainConfig& cfg,
                                     const EpochCallback& on_epoch = {});

}  // namespace cloudlstm
