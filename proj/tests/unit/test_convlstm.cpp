#include <cmath>
#include <sstream>

#include "doctest.h"
#include "cloudlstm/checkpoint.hpp"
#include "cloudlstm/convlstm.hpp"
#include "cloudlstm/errors.hpp"
#include "cloudlstm/train.hpp"
#include "oracles.hpp"

using namespace cloudlstm;

namespace {

ConvLstmParams random_params(const CellConfig& cfg, std::uint64_t seed, double scale = 0.5) {
  ConvLstmParams p = ConvLstmParams::zeros(cfg);
  std::uint64_t s = seed;
  for (auto& [name, t] : p.named()) *t = oracle::random_tensor(t->shape(), ++s, -scale, scale);
  return p;
}

ImageSequence random_sequence(std::size_t T, std::size_t H, std::size_t W, std::size_t D,
                              std::uint64_t seed) {
  return {oracle::random_tensor({T, H, W, D}, seed, 0.0, 1.0), ImageSequence::even_timestamps(T)};
}

std::vector<const Tensor*> kernels(const ConvLstmParams& p) {
  return {&p.fx, &p.ix, &p.jx, &p.ox, &p.fh, &p.ih, &p.jh, &p.oh};
}

}  // namespace

TEST_SUITE("convlstm") {
  TEST_CASE("zero weights and inputs expose the +1 forget bias") {
    const CellConfig cfg{3, 2, 3, 4, 4, LstmVariant::printed};
    const auto step = cell_step(Tensor({4, 4, 2}), CellState::zeros(4, 4, 3), ConvLstmParams::zeros(cfg));
    for (std::size_t n = 0; n < step.gates.f.size(); ++n) {
      CHECK(std::abs(step.gates.f[n] - 0.7310585786300049) <= 1e-12);
      CHECK(step.gates.i[n] == 0.5);
      CHECK(step.gates.j[n] == 0.0);
      CHECK(step.gates.o[n] == 0.0);
      CHECK(step.state.c[n] == 0.0);
      CHECK(step.state.h[n] == 0.0);
    }
  }

  TEST_CASE("closed input gate and open forget gate keep the cell state") {
    const CellConfig cfg{3, 2, 2, 4, 4, LstmVariant::printed};
    ConvLstmParams p = random_params(cfg, 50);
    // Band 1 is a constant indicator; its centre tap drives f to 1 and i to 0.
    for (std::size_t q = 0; q < 2; ++q) {
      p.fx.at({1, 1, 1, q}) = 1000.0;
      p.ix.at({1, 1, 1, q}) = -1000.0;
    }
    Tensor x = oracle::random_tensor({4, 4, 2}, 51, 0.0, 0.1);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t xx = 0; xx < 4; ++xx) x.at({y, xx, 1}) = 1.0;
    const CellState prev{oracle::random_tensor({4, 4, 2}, 52, -0.1, 0.1),
                         oracle::random_tensor({4, 4, 2}, 53, -2.0, 2.0)};
    const auto step = cell_step(x, prev, p);
    CHECK(bit_equal(step.state.c, prev.c));
  }

  TEST_CASE("cell_step matches the scalar per-pixel oracle") {
    for (auto variant : {LstmVariant::printed, LstmVariant::standard}) {
      const CellConfig cfg{3, 2, 3, 4, 4, variant};
      const ConvLstmParams p = random_params(cfg, 60);
      const Tensor x = oracle::random_tensor({4, 4, 2}, 61);
      const CellState prev{oracle::random_tensor({4, 4, 3}, 62), oracle::random_tensor({4, 4, 3}, 63)};
      const auto got = cell_step(x, prev, p, variant);
      const auto want = oracle::cell_step_scalar(x, prev.h, prev.c, kernels(p),
                                                 variant == LstmVariant::standard);
      CHECK(oracle::max_abs_diff(got.gates.i, want.i) <= 1e-12);
      CHECK(oracle::max_abs_diff(got.gates.j, want.j) <= 1e-12);
      CHECK(oracle::max_abs_diff(got.gates.f, want.f) <= 1e-12);
      CHECK(oracle::max_abs_diff(got.gates.o, want.o) <= 1e-12);
      CHECK(oracle::max_abs_diff(got.state.c, want.c) <= 1e-12);
      CHECK(oracle::max_abs_diff(got.state.h, want.h) <= 1e-12);
    }
  }

  TEST_CASE("cell_step rejects inconsistent shapes") {
    const CellConfig cfg{3, 2, 3, 4, 4, LstmVariant::printed};
    const auto p = ConvLstmParams::zeros(cfg);
    CHECK_THROWS_AS(cell_step(Tensor({4, 4, 3}), CellState::zeros(4, 4, 3), p), ShapeError);
    CHECK_THROWS_AS(cell_step(Tensor({4, 4, 2}), CellState::zeros(4, 5, 3), p), ShapeError);
    CHECK_THROWS_AS(cell_step(Tensor({4, 4, 2}), CellState::zeros(4, 4, 2), p), ShapeError);
  }

  TEST_CASE("encode base cases") {
    const CellConfig cfg{3, 2, 3, 5, 4, LstmVariant::printed};
    const auto p = random_params(cfg, 70);
    const auto seq1 = random_sequence(1, 5, 4, 2, 71);
    const auto one = encode(seq1, p, false);
    const auto step = cell_step(seq1.frame(0), CellState::zeros(5, 4, 3), p);
    CHECK(bit_equal(one.final_cell, step.state.c));

    const auto seq = random_sequence(6, 5, 4, 2, 72);
    CHECK(encode(seq, ConvLstmParams::zeros(cfg), false).final_cell == Tensor({5, 4, 3}));

    CHECK_THROWS_AS(encode(ImageSequence{Tensor({0, 5, 4, 2}), {}}, p, false), ShapeError);
  }

  TEST_CASE("encode equals chained cell_step calls bit for bit") {
    const CellConfig cfg{3, 2, 3, 5, 5, LstmVariant::printed};
    const auto p = random_params(cfg, 80);
    const auto seq = random_sequence(3, 5, 5, 2, 81);
    CellState state = CellState::zeros(5, 5, 3);
    for (std::size_t t = 0; t < 3; ++t) state = cell_step(seq.frame(t), state, p).state;
    const auto enc = encode(seq, p, true);
    CHECK(bit_equal(enc.final_cell, state.c));
    REQUIRE(enc.trace.has_value());
    CHECK(bit_equal(enc.trace->steps.back().c, state.c));
  }

  TEST_CASE("trace invariants") {
    const CellConfig cfg{3, 3, 4, 6, 6, LstmVariant::printed};
    for (std::uint64_t seed = 90; seed < 93; ++seed) {
      const auto p = random_params(cfg, seed, 1.0);
      const auto seq = random_sequence(5, 6, 6, 3, seed + 10);
      const auto enc = encode(seq, p, true);
      const GateTrace& trace = *enc.trace;
      CellState state = CellState::zeros(6, 6, 4);
      for (std::size_t t = 0; t < trace.length(); ++t) {
        const GateRecord& g = trace.steps[t];
        for (std::size_t n = 0; n < g.i.size(); ++n) {
          CHECK((g.i[n] > 0.0 && g.i[n] < 1.0));
          CHECK((g.f[n] > 0.0 && g.f[n] < 1.0));
          CHECK((g.j[n] > -1.0 && g.j[n] < 1.0));
          CHECK((g.o[n] > -1.0 && g.o[n] < 1.0));
        }
        // Chaining from the recorded previous state reproduces the record.
        const auto step = cell_step(seq.frame(t), state, p);
        CHECK(bit_equal(step.state.c, g.c));
        state = {g.h, g.c};
      }
      CHECK(bit_equal(state.c, enc.final_cell));
    }
  }

  TEST_CASE("encode is causal") {
    const CellConfig cfg{3, 2, 3, 5, 5, LstmVariant::printed};
    const auto p = random_params(cfg, 100);
    const auto seq = random_sequence(6, 5, 5, 2, 101);
    const auto full = encode(seq, p, true);
    for (std::size_t t = 1; t <= 6; ++t) {
      std::vector<std::size_t> prefix(t);
      for (std::size_t k = 0; k < t; ++k) prefix[k] = k;
      const auto part = encode(seq.select(prefix), p, true);
      for (std::size_t k = 0; k < t; ++k) CHECK(bit_equal(part.trace->steps[k].c, full.trace->steps[k].c));
    }
  }

  TEST_CASE("encode_bidirectional") {
    const CellConfig cfg{3, 2, 3, 4, 4, LstmVariant::printed};
    EncoderParams ep{cfg, random_params(cfg, 110), random_params(cfg, 120), Tensor({3, 3, 6, 2})};
    const auto seq = random_sequence(4, 4, 4, 2, 111);
    const Tensor both = encode_bidirectional(seq, ep);
    REQUIRE(both.shape() == Shape{4, 4, 6});
    CHECK(bit_equal(slice_channels(both, 0, 3), encode(seq, ep.forward, false).final_cell));
    CHECK(bit_equal(slice_channels(both, 3, 6), encode(seq.reversed(), ep.backward, false).final_cell));

    // Palindrome with shared weights: both halves agree.
    std::vector<std::size_t> order{0, 1, 2, 1, 0};
    const auto palindrome = seq.select(order);
    EncoderParams shared{cfg, ep.forward, ep.forward, ep.head};
    const Tensor sym = encode_bidirectional(palindrome, shared);
    CHECK(bit_equal(slice_channels(sym, 0, 3), slice_channels(sym, 3, 6)));
  }

  TEST_CASE("softmax and classify") {
    const Tensor uniform = softmax_channels(Tensor({2, 2, 4}));
    for (double v : uniform.data()) CHECK(v == 0.25);

    const Tensor logits = oracle::random_tensor({3, 3, 5}, 130, -4.0, 4.0);
    Tensor shifted = logits;
    for (std::size_t n = 0; n < 5; ++n) shifted[n] += 123.0;  // first pixel only
    CHECK(oracle::max_abs_diff(softmax_channels(logits), softmax_channels(shifted)) <= 1e-12);

    const Tensor state = oracle::random_tensor({3, 3, 4}, 131);
    const Tensor head = oracle::random_tensor({3, 3, 4, 5}, 132);
    const Tensor probs = classify(state, head);
    const Tensor z = oracle::conv2d_loops(state, head);
    for (std::size_t p = 0; p < 9; ++p) {
      double total = 0.0;
      for (std::size_t c = 0; c < 5; ++c) total += std::exp(z[p * 5 + c]);
      double sum = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        CHECK(std::abs(probs[p * 5 + c] - std::exp(z[p * 5 + c]) / total) <= 1e-12);
        CHECK(probs[p * 5 + c] > 0.0);
        sum += probs[p * 5 + c];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(classify(state, Tensor({3, 3, 3, 5})), ShapeError);
  }

  TEST_CASE("checkpoint round trip") {
    CellConfig cfg{3, 2, 4, 6, 6, LstmVariant::standard};
    const EncoderParams params = init_params(cfg, 3, 7);
    std::stringstream buffer;
    write_checkpoint(buffer, params);
    const EncoderParams back = read_checkpoint(buffer, "memory");
    CHECK(back.config == params.config);
    const auto a = params.named();
    const auto b = back.named();
    REQUIRE(a.size() == 17);
    for (std::size_t n = 0; n < a.size(); ++n) {
      CHECK(a[n].first == b[n].first);
      CHECK(bit_equal(*a[n].second, *b[n].second));
    }
    std::string truncated = buffer.str();
    std::stringstream again;
    write_checkpoint(again, params);
    truncated = again.str().substr(0, again.str().size() / 2);
    std::stringstream cut(truncated);
    CHECK_THROWS_AS(read_checkpoint(cut, "cut"), FormatError);
  }
}
