#include "cloudlstm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "cell_engine.hpp"
#include "cloudlstm/errors.hpp"
#include "cloudlstm/metrics.hpp"
#include "conv_kernels.hpp"

namespace cloudlstm {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

GradientSet GradientSet::zeros_like(const EncoderParams& params) {
  GradientSet g{ConvLstmParams::zeros(params.config), ConvLstmParams::zeros(params.config),
                Tensor(params.head.shape())};
  return g;
}

std::vector<std::pair<std::string, Tensor*>> GradientSet::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& [name, t] : forward.named()) out.emplace_back("forward." + name, t);
  for (auto& [name, t] : backward.named()) out.emplace_back("backward." + name, t);
  out.emplace_back("head", &head);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> GradientSet::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : forward.named()) out.emplace_back("forward." + name, t);
  for (auto& [name, t] : backward.named()) out.emplace_back("backward." + name, t);
  out.emplace_back("head", &head);
  return out;
}

void GradientSet::add_scaled(const GradientSet& other, double factor) {
  auto mine = named();
  const auto theirs = other.named();
  for (std::size_t n = 0; n < mine.size(); ++n) {
    Tensor& dst = *mine[n].second;
    const Tensor& src = *theirs[n].second;
    require_same_shape(dst, src, "GradientSet::add_scaled");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
  }
}

bool GradientSet::all_finite() const {
  for (const auto& [name, t] : named()) {
    if (!cloudlstm::all_finite(*t)) return false;
  }
  return true;
}

AdamState AdamState::for_shapes(std::span<const Shape> shapes) {
  AdamState state;
  for (const Shape& s : shapes) {
    state.first_moment.emplace_back(s);
    state.second_moment.emplace_back(s);
  }
  return state;
}

AdamState AdamState::for_params(const EncoderParams& params) {
  std::vector<Shape> shapes;
  for (const auto& [name, t] : params.named()) shapes.push_back(t->shape());
  return for_shapes(shapes);
}

double cross_entropy(const Tensor& probs, const Tensor& labels) {
  require_same_shape(probs, labels, "cross_entropy");
  if (probs.rank() != 3 || probs.extent(2) == 0) {
    throw ShapeError("cross_entropy: expected [H, W, C], got " + shape_string(probs.shape()));
  }
  const std::size_t classes = probs.extent(2);
  const std::size_t pixels = probs.size() / classes;
  double total = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t ones = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double l = labels[p * classes + c];
      if (l == 1.0) {
        ++ones;
        total -= std::log(std::max(probs[p * classes + c], kProbabilityFloor));
      } else if (l != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) {
      throw ShapeError("cross_entropy: label pixel " + std::to_string(p) + " is not one-hot");
    }
  }
  return total / static_cast<double>(pixels);
}

namespace {

/// Backpropagation through time for one direction. `dc_final` is dL/dc_T.
void backprop_direction(const detail::PackedCell& cell, const ImageSequence& seq,
                        const GateTrace& trace, std::span<const double> dc_final,
                        ConvLstmParams& grads, detail::Workspace& ws) {
  const std::size_t r = cell.hidden;
  const std::size_t pixels = cell.height * cell.width;
  const std::size_t n = cell.state_size();
  const bool standard = cell.variant == LstmVariant::standard;

  std::vector<double> dc(dc_final.begin(), dc_final.end());
  std::vector<double> dh(n, 0.0);
  std::vector<double> dz(pixels * 4 * r);
  std::vector<double> dwx(cell.wx.size(), 0.0);
  std::vector<double> dwh(cell.wh.size(), 0.0);

  for (std::size_t step = trace.length(); step-- > 0;) {
    const GateRecord& g = trace.steps[step];
    const double* c_prev = step > 0 ? trace.steps[step - 1].c.data().data() : nullptr;
    for (std::size_t p = 0; p < pixels; ++p) {
      double* z = dz.data() + p * 4 * r;
      for (std::size_t q = 0; q < r; ++q) {
        const std::size_t idx = p * r + q;
        const double f = g.f[idx];
        const double i = g.i[idx];
        const double j = g.j[idx];
        const double o = g.o[idx];
        const double c = g.c[idx];
        double d_o = 0.0;
        double d_c = dc[idx];
        if (standard) {
          const double tc = std::tanh(c);
          d_o = dh[idx] * tc;
          d_c += dh[idx] * o * (1.0 - tc * tc);
        } else {
          d_o = dh[idx] * c;
          d_c += dh[idx] * o;
        }
        const double cp = c_prev ? c_prev[idx] : 0.0;
        z[q] = d_c * cp * f * (1.0 - f);
        z[r + q] = d_c * j * i * (1.0 - i);
        z[2 * r + q] = d_c * i * (1.0 - j * j);
        z[3 * r + q] = standard ? d_o * o * (1.0 - o) : d_o * (1.0 - o * o);
        dc[idx] = d_c * f;
      }
    }
    detail::conv_backward_kernel(seq.frame_data(step), dz, cell.x_geometry(), dwx, ws.cols);
    if (step > 0) {
      const GateRecord& prev = trace.steps[step - 1];
      detail::conv_backward_kernel(prev.h.data(), dz, cell.h_geometry(), dwh, ws.cols);
      std::fill(dh.begin(), dh.end(), 0.0);
      detail::conv_backward_input(dz, cell.wh, cell.h_geometry(), dh, ws.cols);
      const bool finite = std::all_of(dh.begin(), dh.end(), [](double v) { return std::isfinite(v); }) &&
                          std::all_of(dc.begin(), dc.end(), [](double v) { return std::isfinite(v); });
      if (!finite) throw NonFiniteError("non-finite gradient in backward pass", step + 1);
    }
  }
  detail::unpack_gates_add(dwx, {&grads.fx, &grads.ix, &grads.jx, &grads.ox});
  detail::unpack_gates_add(dwh, {&grads.fh, &grads.ih, &grads.jh, &grads.oh});
}

}  // namespace

BackwardResult backward(const ImageSequence& seq, const LabelMap& labels,
                        const EncoderParams& params) {
  params.validate();
  seq.validate();
  if (seq.length() == 0) throw ShapeError("backward: empty sequence");
  const std::size_t classes = params.classes();
  const std::size_t r = params.config.hidden_channels;
  if (labels.classes.shape() != Shape{seq.height(), seq.width()}) {
    throw ShapeError("backward: labels " + shape_string(labels.classes.shape()) +
                     " do not match sequence extents");
  }
  const Tensor onehot = labels.one_hot(classes);

  const auto fwd_cell = detail::PackedCell::pack(params.forward, params.config.variant,
                                                 seq.height(), seq.width());
  const auto bwd_cell = detail::PackedCell::pack(params.backward, params.config.variant,
                                                 seq.height(), seq.width());
  detail::Workspace ws;
  const ImageSequence reversed = seq.reversed();
  const GateTrace fwd_trace = detail::forward_trace(fwd_cell, seq, ws);
  const GateTrace bwd_trace = detail::forward_trace(bwd_cell, reversed, ws);

  const Tensor state = concat_channels(fwd_trace.steps.back().c, bwd_trace.steps.back().c);
  const Tensor probs = classify(state, params.head);

  BackwardResult result;
  result.loss = cross_entropy(probs, onehot);
  result.grads = GradientSet::zeros_like(params);

  // Softmax + cross-entropy: dL/dlogits = (p - y) / pixels, or zero where the
  // log argument was clamped.
  const std::size_t pixels = seq.height() * seq.width();
  Tensor dlogits(probs.shape());
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::size_t label = labels.at(p);
    if (probs[p * classes + label] < kProbabilityFloor) continue;
    for (std::size_t c = 0; c < classes; ++c) {
      dlogits[p * classes + c] = (probs[p * classes + c] - onehot[p * classes + c]) /
                                 static_cast<double>(pixels);
    }
  }
  conv2d_same_grad_kernel(state, dlogits, result.grads.head);
  const Tensor dstate = conv2d_same_grad_input(dlogits, params.head);
  const Tensor dc_fwd = slice_channels(dstate, 0, r);
  const Tensor dc_bwd = slice_channels(dstate, r, 2 * r);

  backprop_direction(fwd_cell, seq, fwd_trace, dc_fwd.data(), result.grads.forward, ws);
  backprop_direction(bwd_cell, reversed, bwd_trace, dc_bwd.data(), result.grads.backward, ws);

  if (!result.grads.all_finite()) throw NonFiniteError("non-finite parameter gradient", 0);
  return result;
}

BackwardResult batch_backward(std::span<const TrainingSample> batch, const EncoderParams& params) {
  if (batch.empty()) throw ShapeError("batch_backward: empty batch");
  BackwardResult total;
  total.grads = GradientSet::zeros_like(params);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const TrainingSample& sample : batch) {
    const BackwardResult one = backward(sample.seq, sample.labels, params);
    total.loss += one.loss * weight;
    total.grads.add_scaled(one.grads, weight);
  }
  return total;
}

void adam_update(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                 AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment counts differ");
  }
  for (std::size_t n = 0; n < params.size(); ++n) {
    require_same_shape(*params[n], *grads[n], "adam_update");
    require_same_shape(*params[n], state.first_moment[n], "adam_update moments");
    if (!all_finite(*grads[n])) throw NonFiniteError("adam_update: non-finite gradient", state.step + 1);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t n = 0; n < params.size(); ++n) {
    Tensor& w = *params[n];
    const Tensor& g = *grads[n];
    Tensor& m = state.first_moment[n];
    Tensor& v = state.second_moment[n];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

void adam_step(EncoderParams& params, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg) {
  std::vector<Tensor*> p;
  std::vector<const Tensor*> g;
  for (auto& [name, t] : params.named()) p.push_back(t);
  for (const auto& [name, t] : grads.named()) g.push_back(t);
  adam_update(p, g, state, cfg);
}

EncoderParams init_params(const CellConfig& cfg, std::size_t classes, Rng& rng) {
  cfg.validate();
  if (classes == 0) throw ConfigError("classes must be >= 1");
  EncoderParams params{cfg, ConvLstmParams::zeros(cfg), ConvLstmParams::zeros(cfg),
                       Tensor({cfg.kernel, cfg.kernel, 2 * cfg.hidden_channels, classes})};
  for (auto& [name, t] : params.named()) {
    const double fan = static_cast<double>(cfg.kernel * cfg.kernel * t->extent(2));
    const double s = 1.0 / std::sqrt(fan);
    for (double& v : t->data()) v = rng.uniform(-s, s);
  }
  return params;
}

EncoderParams init_params(const CellConfig& cfg, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  return init_params(cfg, classes, rng);
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

double GradientCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : tensors) worst = std::max(worst, e.max_relative_error);
  return worst;
}

GradientCheckReport check_gradients(const ImageSequence& seq, const LabelMap& labels,
                                    const EncoderParams& params, double step, double floor) {
  const BackwardResult analytic = backward(seq, labels, params);
  const Tensor onehot = labels.one_hot(params.classes());
  EncoderParams probe = params;
  const auto loss_at = [&]() { return cross_entropy(predict(seq, probe), onehot); };

  GradientCheckReport report;
  auto slots = probe.named();
  const auto grads = analytic.grads.named();
  for (std::size_t n = 0; n < slots.size(); ++n) {
    Tensor& w = *slots[n].second;
    const Tensor& g = *grads[n].second;
    GradientCheckEntry entry{slots[n].first, w.size(), 0.0, 0.0};
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double original = w[i];
      w[i] = original + step;
      const double plus = loss_at();
      w[i] = original - step;
      const double minus = loss_at();
      w[i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      entry.max_relative_error =
          std::max(entry.max_relative_error, relative_error(g[i], numeric, floor));
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(g[i] - numeric));
    }
    report.tensors.push_back(entry);
  }
  return report;
}

std::string format_metrics_line(const EpochMetrics& m) {
  char buffer[128];
  std::snprintf(buffer, sizeof(buffer), "%zu\t%.10f\t%.6f\t%.3f", m.epoch, m.train_loss,
                m.val_accuracy, m.wall_seconds);
  return buffer;
}

double evaluate_accuracy(std::span<const TrainingSample> samples, const EncoderParams& params) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const TrainingSample& s : samples) {
    const LabelMap pred = argmax_labels(predict(s.seq, params));
    for (std::size_t p = 0; p < pred.pixels(); ++p) correct += pred.at(p) == s.labels.at(p) ? 1 : 0;
    total += pred.pixels();
  }
  return total == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train_loop(const TrainingData& data, const CellConfig& cell, std::size_t classes,
                       const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("train_loop: training partition is empty");

  Rng rng(cfg.seed);
  TrainResult result{init_params(cell, classes, rng), {}};
  AdamState adam = AdamState::for_params(result.params);

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t last = std::min(first + cfg.batch_size, order.size());
      GradientSet mean = GradientSet::zeros_like(result.params);
      const double weight = 1.0 / static_cast<double>(last - first);
      for (std::size_t b = first; b < last; ++b) {
        const TrainingSample& s = data.train[order[b]];
        const BackwardResult one = backward(s.seq, s.labels, result.params);
        loss_sum += one.loss;
        mean.add_scaled(one.grads, weight);
      }
      adam_step(result.params, mean, adam, cfg);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.val_accuracy = evaluate_accuracy(data.valid, result.params);
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(m);
    if (on_epoch) on_epoch(m, result.params);
  }
  return result;
}

}  // namespace cloudlstm
