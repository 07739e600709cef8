#include "cell_engine.hpp"

#include <algorithm>
#include <cmath>

#include "cloudlstm/errors.hpp"

namespace cloudlstm::detail {

void pack_gates(const std::array<const Tensor*, 4>& gates, std::vector<double>& out) {
  const std::size_t r = gates[0]->shape().back();
  const std::size_t rows = gates[0]->size() / r;
  out.assign(rows * 4 * r, 0.0);
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t g = 0; g < 4; ++g) {
      std::copy_n(gates[g]->data().data() + row * r, r, out.data() + row * 4 * r + g * r);
    }
  }
}

void unpack_gates_add(std::span<const double> packed, const std::array<Tensor*, 4>& gates) {
  const std::size_t r = gates[0]->shape().back();
  const std::size_t rows = gates[0]->size() / r;
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t g = 0; g < 4; ++g) {
      double* dst = gates[g]->data().data() + row * r;
      const double* src = packed.data() + row * 4 * r + g * r;
      for (std::size_t q = 0; q < r; ++q) dst[q] += src[q];
    }
  }
}

PackedCell PackedCell::pack(const ConvLstmParams& p, LstmVariant variant, std::size_t height,
                            std::size_t width) {
  PackedCell cell;
  cell.height = height;
  cell.width = width;
  cell.kernel = p.kernel();
  cell.input_channels = p.input_channels();
  cell.hidden = p.hidden_channels();
  cell.variant = variant;
  CellConfig cfg{cell.kernel, cell.input_channels, cell.hidden, height, width, variant};
  cfg.validate();
  p.validate(cfg);
  pack_gates({&p.fx, &p.ix, &p.jx, &p.ox}, cell.wx);
  pack_gates({&p.fh, &p.ih, &p.jh, &p.oh}, cell.wh);
  return cell;
}

void forward_step(const PackedCell& cell, std::span<const double> x, std::span<const double> h_prev,
                  std::span<const double> c_prev, GateRecord& out, Workspace& ws) {
  const std::size_t r = cell.hidden;
  const std::size_t pixels = cell.height * cell.width;
  const Shape state_shape{cell.height, cell.width, r};

  ws.z.resize(pixels * 4 * r);
  conv_forward(x, cell.wx, cell.x_geometry(), ws.z, false, ws.cols);
  conv_forward(h_prev, cell.wh, cell.h_geometry(), ws.z, true, ws.cols);

  for (Tensor* t : {&out.i, &out.j, &out.f, &out.o, &out.c, &out.h}) {
    if (t->shape() != state_shape) *t = Tensor(state_shape);
  }
  const bool standard = cell.variant == LstmVariant::standard;
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* z = ws.z.data() + p * 4 * r;
    for (std::size_t q = 0; q < r; ++q) {
      const std::size_t idx = p * r + q;
      const double f = sigmoid(z[q] + 1.0);
      const double i = sigmoid(z[r + q]);
      const double j = std::tanh(z[2 * r + q]);
      const double o = standard ? sigmoid(z[3 * r + q]) : std::tanh(z[3 * r + q]);
      const double c = c_prev[idx] * f + i * j;
      out.f[idx] = f;
      out.i[idx] = i;
      out.j[idx] = j;
      out.o[idx] = o;
      out.c[idx] = c;
      out.h[idx] = standard ? o * std::tanh(c) : o * c;
    }
  }
}

GateTrace forward_trace(const PackedCell& cell, const ImageSequence& seq, Workspace& ws) {
  GateTrace trace;
  trace.steps.resize(seq.length());
  const std::vector<double> zero(cell.state_size(), 0.0);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    std::span<const double> h_prev = t == 0 ? std::span<const double>(zero) : trace.steps[t - 1].h.data();
    std::span<const double> c_prev = t == 0 ? std::span<const double>(zero) : trace.steps[t - 1].c.data();
    forward_step(cell, seq.frame_data(t), h_prev, c_prev, trace.steps[t], ws);
    if (!all_finite(trace.steps[t].c) || !all_finite(trace.steps[t].h)) {
      throw NonFiniteError("non-finite cell state in forward pass", t + 1);
    }
  }
  return trace;
}

}  // namespace cloudlstm::detail
