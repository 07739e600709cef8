#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cloudlstm/sequence.hpp"
#include "cloudlstm/tensor.hpp"

namespace cloudlstm {

/// Gate formulation.
///
/// `printed`:  o = tanh(.), h = o * c
/// `standard`: o = sigmoid(.), h = o * tanh(c)
///
/// Both keep the constant +1 inside the forget-gate activation.
enum class LstmVariant : std::uint32_t { printed = 0, standard = 1 };

[[nodiscard]] std::string to_string(LstmVariant v);
[[nodiscard]] LstmVariant parse_variant(const std::string& text);

struct CellConfig {
  std::size_t kernel = 3;           // odd spatial kernel size k
  std::size_t input_channels = 4;   // d
  std::size_t hidden_channels = 32; // r, per direction
  std::size_t height = 24;
  std::size_t width = 24;
  LstmVariant variant = LstmVariant::printed;

  void validate() const;
  friend bool operator==(const CellConfig&, const CellConfig&) = default;
};

/// The eight gate kernels: input-to-gate [k, k, d, r] and hidden-to-gate [k, k, r, r].
struct ConvLstmParams {
  Tensor fx, ix, jx, ox;
  Tensor fh, ih, jh, oh;

  static ConvLstmParams zeros(const CellConfig& cfg);

  /// Throws ShapeError unless every kernel has the shape implied by cfg.
  void validate(const CellConfig& cfg) const;

  [[nodiscard]] std::size_t kernel() const { return fx.extent(0); }
  [[nodiscard]] std::size_t input_channels() const { return fx.extent(2); }
  [[nodiscard]] std::size_t hidden_channels() const { return fx.extent(3); }

  /// Tensors in the fixed order fx, ix, jx, ox, fh, ih, jh, oh.
  [[nodiscard]] std::vector<std::pair<std::string, Tensor*>> named();
  [[nodiscard]] std::vector<std::pair<std::string, const Tensor*>> named() const;
};

struct CellState {
  Tensor h;  // [H, W, r]
  Tensor c;  // [H, W, r]

  static CellState zeros(std::size_t height, std::size_t width, std::size_t hidden);
};

/// Activations of one step, each [H, W, r].
struct GateRecord {
  Tensor i, j, f, o, c, h;
};

struct GateTrace {
  std::vector<GateRecord> steps;  // steps[t - 1] holds step t

  [[nodiscard]] std::size_t length() const { return steps.size(); }
  [[nodiscard]] std::size_t hidden_channels() const { return steps.front().i.extent(2); }
};

struct StepResult {
  CellState state;
  GateRecord gates;
};

/// One recurrent update:
///   f = sigmoid(x*fx + h*fh + 1)    i = sigmoid(x*ix + h*ih)
///   j = tanh(x*jx + h*jh)           o = tanh(x*ox + h*oh)   (sigmoid if standard)
///   c' = c (.) f + i (.) j          h' = o (.) c'           (o (.) tanh(c') if standard)
/// where * is conv2d_same.
[[nodiscard]] StepResult cell_step(const Tensor& x, const CellState& prev, const ConvLstmParams& p,
                                   LstmVariant variant = LstmVariant::printed);

struct EncodeResult {
  Tensor final_cell;                 // c_T, [H, W, r]
  std::optional<GateTrace> trace;    // present when requested
};

/// Runs cell_step over t = 1..T from h0 = c0 = 0.
[[nodiscard]] EncodeResult encode(const ImageSequence& seq, const ConvLstmParams& p,
                                  bool record_trace, LstmVariant variant = LstmVariant::printed);

struct EncoderParams {
  CellConfig config;
  ConvLstmParams forward;
  ConvLstmParams backward;
  Tensor head;  // [k, k, 2r, C]

  [[nodiscard]] std::size_t classes() const { return head.extent(3); }
  void validate() const;

  /// All 17 tensors: forward.*, backward.*, head.
  [[nodiscard]] std::vector<std::pair<std::string, Tensor*>> named();
  [[nodiscard]] std::vector<std::pair<std::string, const Tensor*>> named() const;
};

/// Forward final cell state in channels [0, r), final cell state of the
/// time-reversed sequence in channels [r, 2r).
[[nodiscard]] Tensor encode_bidirectional(const ImageSequence& seq, const EncoderParams& p);

/// Per-pixel softmax over the last axis, max-subtracted.
[[nodiscard]] Tensor softmax_channels(const Tensor& logits);

/// softmax(conv2d_same(state, head)) -> [H, W, C] class probabilities.
[[nodiscard]] Tensor classify(const Tensor& state, const Tensor& head);

/// classify(encode_bidirectional(seq, p), p.head)
[[nodiscard]] Tensor predict(const ImageSequence& seq, const EncoderParams& p);

}  // namespace cloudlstm
