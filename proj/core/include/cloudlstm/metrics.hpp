#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cloudlstm/convlstm.hpp"
#include "cloudlstm/sequence.hpp"

namespace cloudlstm {

/// Per-pixel argmax over the class axis of [H, W, C]; ties go to the lowest index.
[[nodiscard]] LabelMap argmax_labels(const Tensor& probs);

/// Correct pixels / total pixels.
[[nodiscard]] double overall_accuracy(const LabelMap& pred, const LabelMap& ref);

/// counts[reference][predicted]
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  [[nodiscard]] std::size_t at(std::size_t reference, std::size_t predicted) const {
    return counts[reference * classes + predicted];
  }
  [[nodiscard]] std::size_t total() const;
  [[nodiscard]] std::size_t trace() const;
};

[[nodiscard]] ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& ref,
                                        std::size_t classes);

struct ChannelSensitivity {
  std::size_t channel = 0;
  double cloudy_mean = 0.0;
  double clear_mean = 0.0;
  double ratio = 0.0;  // clear_mean / cloudy_mean
};

/// Input-gate statistics per hidden channel, sorted by ratio descending
/// (ties by channel index).
struct CloudSensitivityReport {
  std::vector<ChannelSensitivity> channels;

  /// Tab-separated "channel, cloudy_mean, clear_mean, ratio", one line per channel.
  [[nodiscard]] std::string to_tsv() const;
};

/// Mean input-gate activation per channel over cloudy vs clear (step, pixel)
/// pairs. Throws DegenerateMaskError if the mask is all cloudy or all clear.
[[nodiscard]] CloudSensitivityReport cloud_sensitivity(const GateTrace& trace, const CloudMask& mask);

}  // namespace cloudlstm
