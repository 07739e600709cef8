#include "cloudlstm/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "cloudlstm/errors.hpp"

namespace cloudlstm {

LabelMap argmax_labels(const Tensor& probs) {
  if (probs.rank() != 3 || probs.extent(2) == 0) {
    throw ShapeError("argmax_labels: expected [H, W, C], got " + shape_string(probs.shape()));
  }
  const std::size_t classes = probs.extent(2);
  Tensor out({probs.extent(0), probs.extent(1)});
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double* row = probs.data().data() + p * classes;
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[p] = static_cast<double>(best);
  }
  return {std::move(out)};
}

double overall_accuracy(const LabelMap& pred, const LabelMap& ref) {
  require_same_shape(pred.classes, ref.classes, "overall_accuracy");
  if (ref.pixels() == 0) throw ShapeError("overall_accuracy: empty label map");
  std::size_t correct = 0;
  for (std::size_t p = 0; p < ref.pixels(); ++p) correct += pred.classes[p] == ref.classes[p] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(ref.pixels());
}

std::size_t ConfusionMatrix::total() const {
  std::size_t sum = 0;
  for (std::size_t c : counts) sum += c;
  return sum;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t sum = 0;
  for (std::size_t c = 0; c < classes; ++c) sum += at(c, c);
  return sum;
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& ref, std::size_t classes) {
  require_same_shape(pred.classes, ref.classes, "confusion");
  pred.validate(classes);
  ref.validate(classes);
  ConfusionMatrix m{classes, std::vector<std::size_t>(classes * classes, 0)};
  for (std::size_t p = 0; p < ref.pixels(); ++p) ++m.counts[ref.at(p) * classes + pred.at(p)];
  return m;
}

std::string CloudSensitivityReport::to_tsv() const {
  std::string out;
  char line[160];
  for (const auto& c : channels) {
    std::snprintf(line, sizeof(line), "%zu\t%.6f\t%.6f\t%.6f\n", c.channel, c.cloudy_mean,
                  c.clear_mean, c.ratio);
    out += line;
  }
  return out;
}

CloudSensitivityReport cloud_sensitivity(const GateTrace& trace, const CloudMask& mask) {
  if (trace.length() == 0) throw ShapeError("cloud_sensitivity: empty trace");
  const Tensor& first = trace.steps.front().i;
  const std::size_t height = first.extent(0);
  const std::size_t width = first.extent(1);
  const std::size_t r = first.extent(2);
  if (mask.mask.shape() != Shape{trace.length(), height, width}) {
    throw ShapeError("cloud_sensitivity: mask " + shape_string(mask.mask.shape()) +
                     " does not cover trace of " + std::to_string(trace.length()) + " steps on " +
                     std::to_string(height) + "x" + std::to_string(width));
  }

  std::vector<double> cloudy_sum(r, 0.0);
  std::vector<double> clear_sum(r, 0.0);
  std::size_t cloudy_count = 0;
  std::size_t clear_count = 0;
  const std::size_t pixels = height * width;
  for (std::size_t t = 0; t < trace.length(); ++t) {
    const Tensor& gate = trace.steps[t].i;
    for (std::size_t p = 0; p < pixels; ++p) {
      const bool cloudy = mask.mask[t * pixels + p] != 0.0;
      auto& sums = cloudy ? cloudy_sum : clear_sum;
      (cloudy ? cloudy_count : clear_count) += 1;
      for (std::size_t q = 0; q < r; ++q) sums[q] += gate[p * r + q];
    }
  }
  if (cloudy_count == 0 || clear_count == 0) {
    throw DegenerateMaskError(cloudy_count == 0 ? "cloud_sensitivity: mask has no cloudy pixels"
                                                : "cloud_sensitivity: mask has no clear pixels");
  }

  CloudSensitivityReport report;
  for (std::size_t q = 0; q < r; ++q) {
    ChannelSensitivity c;
    c.channel = q;
    c.cloudy_mean = cloudy_sum[q] / static_cast<double>(cloudy_count);
    c.clear_mean = clear_sum[q] / static_cast<double>(clear_count);
    c.ratio = c.clear_mean / c.cloudy_mean;
    report.channels.push_back(c);
  }
  std::stable_sort(report.channels.begin(), report.channels.end(),
                   [](const auto& a, const auto& b) { return a.ratio > b.ratio; });
  return report;
}

}  // namespace cloudlstm
