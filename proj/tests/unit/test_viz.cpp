#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "cloudlstm/errors.hpp"
#include "cloudlstm/train.hpp"
#include "cloudlstm/viz.hpp"
#include "golden_panel.hpp"

using namespace cloudlstm;
namespace fs = std::filesystem;

namespace {

GateTrace constant_trace(std::size_t T, std::size_t H, std::size_t W, std::size_t r, double value) {
  GateTrace trace;
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor v({H, W, r}, value);
    trace.steps.push_back({v, v, v, v, v, v});
  }
  return trace;
}

struct Fixture {
  ImageSequence seq;
  GateTrace trace;
};

Fixture seeded_fixture() {
  const CellConfig cfg{3, 4, 4, 8, 8, LstmVariant::printed};
  const EncoderParams p = init_params(cfg, 3, 42);
  ImageSequence seq{oracle::random_tensor({5, 8, 8, 4}, 43, 0.0, 1.2), ImageSequence::even_timestamps(5)};
  auto enc = encode(seq, p.forward, true);
  return {seq, std::move(*enc.trace)};
}

}  // namespace

TEST_SUITE("viz") {
  TEST_CASE("gray mapping endpoints") {
    const auto zero = constant_trace(2, 3, 3, 1, 0.0);
    const ImageSequence seq{Tensor({2, 3, 3, 3}), ImageSequence::even_timestamps(2)};
    PanelSpec spec;
    spec.rows = {{PanelSource::j, 0, std::nullopt}, {PanelSource::i, 0, std::nullopt}};
    spec.timesteps = {1, 2};
    spec.gap = 0;
    const GrayImage img = render_panel(zero, seq, spec);
    CHECK(img.width == 6);
    CHECK(img.height == 6);
    for (std::size_t x = 0; x < 6; ++x) {
      for (std::size_t y = 0; y < 3; ++y) CHECK(img.at(x, y) == 128);
      for (std::size_t y = 3; y < 6; ++y) CHECK(img.at(x, y) == 0);
    }

    const auto ones = constant_trace(1, 2, 2, 1, 1.0);
    PanelSpec irow;
    irow.rows = {{PanelSource::i, 0, std::nullopt}};
    irow.timesteps = {1};
    for (auto px : render_panel(ones, seq, irow).pixels) CHECK(px == 255);
    CHECK(to_gray(2.0, 0.0, 1.0) == 255);
    CHECK(to_gray(-2.0, 0.0, 1.0) == 0);
  }

  TEST_CASE("layout uses mid-gray gaps and scaled cells") {
    const auto trace = constant_trace(3, 2, 3, 2, 1.0);
    const ImageSequence seq{Tensor({3, 2, 3, 4}, 1.2), ImageSequence::even_timestamps(3)};
    PanelSpec spec;
    spec.rows = {{PanelSource::input, 0, std::nullopt}, {PanelSource::f, 1, std::nullopt}};
    spec.timesteps = {1, 3};
    spec.cell_scale = 2;
    spec.gap = 1;
    const GrayImage img = render_panel(trace, seq, spec);
    CHECK(img.width == 2 * 6 + 1);
    CHECK(img.height == 2 * 4 + 1);
    for (std::size_t y = 0; y < img.height; ++y) CHECK(img.at(6, y) == kGapGray);
    for (std::size_t x = 0; x < img.width; ++x) CHECK(img.at(x, 4) == kGapGray);
    CHECK(img.at(0, 0) == 255);
    CHECK(img.at(12, 8) == 255);
  }

  TEST_CASE("cell state rows use a symmetric range") {
    GateTrace trace = constant_trace(2, 1, 2, 1, 0.0);
    trace.steps[0].c = Tensor({1, 2, 1}, {-0.5, 0.25});
    trace.steps[1].c = Tensor({1, 2, 1}, {0.0, 0.5});
    PanelSpec spec;
    spec.rows = {{PanelSource::c, 0, std::nullopt}};
    spec.timesteps = {1, 2};
    spec.gap = 0;
    const ImageSequence seq{Tensor({2, 1, 2, 3}), ImageSequence::even_timestamps(2)};
    const GrayImage img = render_panel(trace, seq, spec);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, to_gray(0.25, -0.5, 0.5), 128, 255});
  }

  TEST_CASE("out of range requests are rejected") {
    const auto trace = constant_trace(2, 2, 2, 2, 0.5);
    const ImageSequence seq{Tensor({2, 2, 2, 3}), ImageSequence::even_timestamps(2)};
    CHECK_THROWS_AS(render_panel(trace, seq, PanelSpec::gate_panel(2, {1})), ConfigError);
    CHECK_THROWS_AS(render_panel(trace, seq, PanelSpec::gate_panel(0, {3})), ConfigError);
    CHECK_THROWS_AS(render_panel(trace, seq, PanelSpec::gate_panel(0, {0})), ConfigError);
  }

  TEST_CASE("PGM encoding") {
    GrayImage one{1, 1, {0}};
    const std::string bytes = encode_pgm(one);
    CHECK(bytes == std::string("P5\n1 1\n255\n") + '\0');
    CHECK(bytes.size() == 12);

    const auto fx = seeded_fixture();
    const GrayImage img = render_panel(fx.trace, fx.seq, PanelSpec::gate_panel(1, {1, 2, 3, 4, 5}));
    const fs::path path = fs::temp_directory_path() / "cloudlstm_test_panel.pgm";
    write_image(img, path);
    const auto back = oracle::read_pgm(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(std::vector<std::uint8_t>(back.bytes.begin(), back.bytes.end()) == img.pixels);
    fs::remove(path);

    CHECK_THROWS(write_image(one, "/nonexistent-dir/x.pgm"));
    CHECK(panel_filename("tile", 7, 1, 5) == "tile_cell7_t1-5.pgm");
  }

  TEST_CASE("seeded panel matches the golden image") {
    const std::string bytes = oracle::golden_panel_bytes();
    const fs::path golden = oracle::golden_panel_path(CLOUDLSTM_GOLDEN_DIR);
    if (std::getenv("CLOUDLSTM_UPDATE_GOLDEN") != nullptr) {
      std::ofstream(golden, std::ios::binary) << bytes;
    }
    REQUIRE(fs::exists(golden));
    CHECK(oracle::read_file(golden) == bytes);
  }
}
