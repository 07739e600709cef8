#include "cloudlstm/convlstm.hpp"

#include <algorithm>
#include <cmath>

#include "cell_engine.hpp"
#include "cloudlstm/errors.hpp"
#include "conv_kernels.hpp"

namespace cloudlstm {

std::string to_string(LstmVariant v) { return v == LstmVariant::standard ? "standard" : "printed"; }

LstmVariant parse_variant(const std::string& text) {
  if (text == "printed") return LstmVariant::printed;
  if (text == "standard") return LstmVariant::standard;
  throw ConfigError("variant must be 'printed' or 'standard', got '" + text + "'");
}

void CellConfig::validate() const {
  if (kernel == 0 || kernel % 2 == 0) {
    throw ConfigError("kernel size must be odd and >= 1, got " + std::to_string(kernel));
  }
  if (input_channels == 0) throw ConfigError("input_channels must be >= 1");
  if (hidden_channels == 0) throw ConfigError("hidden_channels must be >= 1");
  if (height == 0 || width == 0) throw ConfigError("spatial extents must be >= 1");
}

ConvLstmParams ConvLstmParams::zeros(const CellConfig& cfg) {
  const std::size_t k = cfg.kernel;
  const Shape in{k, k, cfg.input_channels, cfg.hidden_channels};
  const Shape hid{k, k, cfg.hidden_channels, cfg.hidden_channels};
  return {Tensor(in), Tensor(in), Tensor(in), Tensor(in),
          Tensor(hid), Tensor(hid), Tensor(hid), Tensor(hid)};
}

void ConvLstmParams::validate(const CellConfig& cfg) const {
  const std::size_t k = cfg.kernel;
  const Shape in{k, k, cfg.input_channels, cfg.hidden_channels};
  const Shape hid{k, k, cfg.hidden_channels, cfg.hidden_channels};
  for (const auto& [name, t] : named()) {
    const Shape& want = name.back() == 'x' ? in : hid;
    if (t->shape() != want) {
      throw ShapeError("kernel " + name + " has shape " + shape_string(t->shape()) + ", expected " +
                       shape_string(want));
    }
  }
}

std::vector<std::pair<std::string, Tensor*>> ConvLstmParams::named() {
  return {{"fx", &fx}, {"ix", &ix}, {"jx", &jx}, {"ox", &ox},
          {"fh", &fh}, {"ih", &ih}, {"jh", &jh}, {"oh", &oh}};
}

std::vector<std::pair<std::string, const Tensor*>> ConvLstmParams::named() const {
  return {{"fx", &fx}, {"ix", &ix}, {"jx", &jx}, {"ox", &ox},
          {"fh", &fh}, {"ih", &ih}, {"jh", &jh}, {"oh", &oh}};
}

CellState CellState::zeros(std::size_t height, std::size_t width, std::size_t hidden) {
  return {Tensor({height, width, hidden}), Tensor({height, width, hidden})};
}

StepResult cell_step(const Tensor& x, const CellState& prev, const ConvLstmParams& p,
                     LstmVariant variant) {
  if (x.rank() != 3) throw ShapeError("cell_step: input must be [H, W, d], got " + shape_string(x.shape()));
  if (x.extent(2) != p.input_channels()) {
    throw ShapeError("cell_step: input has " + std::to_string(x.extent(2)) +
                     " channels, kernels expect " + std::to_string(p.input_channels()));
  }
  const Shape state_shape{x.extent(0), x.extent(1), p.hidden_channels()};
  if (prev.h.shape() != state_shape || prev.c.shape() != state_shape) {
    throw ShapeError("cell_step: state shapes " + shape_string(prev.h.shape()) + " / " +
                     shape_string(prev.c.shape()) + " do not match " + shape_string(state_shape));
  }
  const auto cell = detail::PackedCell::pack(p, variant, x.extent(0), x.extent(1));
  detail::Workspace ws;
  StepResult result;
  detail::forward_step(cell, x.data(), prev.h.data(), prev.c.data(), result.gates, ws);
  result.state = {result.gates.h, result.gates.c};
  return result;
}

EncodeResult encode(const ImageSequence& seq, const ConvLstmParams& p, bool record_trace,
                    LstmVariant variant) {
  seq.validate();
  if (seq.length() == 0) throw ShapeError("encode: empty sequence");
  if (seq.bands() != p.input_channels()) {
    throw ShapeError("encode: sequence has " + std::to_string(seq.bands()) +
                     " bands, kernels expect " + std::to_string(p.input_channels()));
  }
  const auto cell = detail::PackedCell::pack(p, variant, seq.height(), seq.width());
  detail::Workspace ws;
  if (record_trace) {
    GateTrace trace = detail::forward_trace(cell, seq, ws);
    Tensor final_cell = trace.steps.back().c;
    return {std::move(final_cell), std::move(trace)};
  }

  GateRecord current;
  GateRecord previous;
  previous.h = Tensor({seq.height(), seq.width(), cell.hidden});
  previous.c = previous.h;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    detail::forward_step(cell, seq.frame_data(t), previous.h.data(), previous.c.data(), current, ws);
    if (!all_finite(current.c)) throw NonFiniteError("encode: non-finite cell state", t + 1);
    std::swap(current, previous);
  }
  return {std::move(previous.c), std::nullopt};
}

void EncoderParams::validate() const {
  config.validate();
  forward.validate(config);
  backward.validate(config);
  const std::size_t k = config.kernel;
  if (head.rank() != 4 || head.extent(0) != k || head.extent(1) != k ||
      head.extent(2) != 2 * config.hidden_channels || head.extent(3) == 0) {
    throw ShapeError("head kernel has shape " + shape_string(head.shape()) + ", expected [" +
                     std::to_string(k) + ", " + std::to_string(k) + ", " +
                     std::to_string(2 * config.hidden_channels) + ", C]");
  }
}

std::vector<std::pair<std::string, Tensor*>> EncoderParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& [name, t] : forward.named()) out.emplace_back("forward." + name, t);
  for (auto& [name, t] : backward.named()) out.emplace_back("backward." + name, t);
  out.emplace_back("head", &head);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> EncoderParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : forward.named()) out.emplace_back("forward." + name, t);
  for (auto& [name, t] : backward.named()) out.emplace_back("backward." + name, t);
  out.emplace_back("head", &head);
  return out;
}

Tensor encode_bidirectional(const ImageSequence& seq, const EncoderParams& p) {
  const Tensor fwd = encode(seq, p.forward, false, p.config.variant).final_cell;
  const Tensor bwd = encode(seq.reversed(), p.backward, false, p.config.variant).final_cell;
  return concat_channels(fwd, bwd);
}

Tensor softmax_channels(const Tensor& logits) {
  if (logits.rank() == 0 || logits.shape().back() == 0) {
    throw ShapeError("softmax_channels: need a non-empty class axis, got " +
                     shape_string(logits.shape()));
  }
  const std::size_t classes = logits.shape().back();
  const std::size_t pixels = logits.size() / classes;
  Tensor out(logits.shape());
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* z = logits.data().data() + p * classes;
    double* y = out.data().data() + p * classes;
    const double peak = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      y[c] = std::exp(z[c] - peak);
      total += y[c];
    }
    for (std::size_t c = 0; c < classes; ++c) y[c] /= total;
  }
  return out;
}

Tensor classify(const Tensor& state, const Tensor& head) {
  if (state.rank() != 3 || head.rank() != 4 || state.extent(2) != head.extent(2)) {
    throw ShapeError("classify: state " + shape_string(state.shape()) +
                     " incompatible with head " + shape_string(head.shape()));
  }
  return softmax_channels(conv2d_same(state, head));
}

Tensor predict(const ImageSequence& seq, const EncoderParams& p) {
  return classify(encode_bidirectional(seq, p), p.head);
}

}  // namespace cloudlstm
