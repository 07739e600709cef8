#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "cloudlstm/errors.hpp"
#include "cloudlstm/synthdata.hpp"
#include "cloudlstm/tensor_io.hpp"
#include "oracles.hpp"

using namespace cloudlstm;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene() {
  SceneConfig cfg;
  cfg.height = 48;
  cfg.width = 48;
  cfg.tile_size = 12;
  cfg.frames = 6;
  cfg.bands = 3;
  cfg.classes = 4;
  cfg.parcel_size = 10.0;
  cfg.block_size = 24;
  cfg.margin = 6;
  cfg.seed = 3;
  return cfg;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cloudlstm_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::size_t gap(std::size_t a0, std::size_t b0, std::size_t size) {
  if (a0 + size <= b0) return b0 - (a0 + size);
  if (b0 + size <= a0) return a0 - (b0 + size);
  return 0;
}

}  // namespace

TEST_SUITE("synthdata") {
  TEST_CASE("zero cloud probability yields zero coverage") {
    SceneConfig cfg = small_scene();
    cfg.cloud_probability = 0.0;
    const Scene scene = generate_scene(cfg);
    for (double c : scene.clouds.coverage) CHECK(c == 0.0);
    for (double v : scene.clouds.mask.data()) CHECK(v == 0.0);
  }

  TEST_CASE("same class pixels share a series without noise or clouds") {
    SceneConfig cfg = small_scene();
    cfg.cloud_probability = 0.0;
    cfg.noise_std = 0.0;
    const Scene scene = generate_scene(cfg);
    const std::size_t H = cfg.height, W = cfg.width, T = cfg.frames, D = cfg.bands;
    std::vector<std::ptrdiff_t> first(cfg.classes, -1);
    std::size_t compared = 0;
    for (std::size_t p = 0; p < H * W; ++p) {
      const auto c = static_cast<std::size_t>(scene.labels.classes[p]);
      if (first[c] < 0) {
        first[c] = static_cast<std::ptrdiff_t>(p);
        continue;
      }
      const auto q = static_cast<std::size_t>(first[c]);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < D; ++b)
          CHECK(scene.sequence.frames[(t * H * W + p) * D + b] == scene.sequence.frames[(t * H * W + q) * D + b]);
      ++compared;
    }
    CHECK(compared > 0);
  }

  TEST_CASE("cloudy pixels are brighter than the 95th percentile of clear pixels") {
    SceneConfig cfg = small_scene();
    cfg.frames = 12;
    cfg.cloud_probability = 1.0;
    cfg.cloud_opacity = 1.0;
    cfg.noise_std = 0.02;
    const Scene scene = generate_scene(cfg);
    const std::size_t HW = cfg.height * cfg.width, D = cfg.bands;
    std::size_t frames_checked = 0;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      std::vector<double> clear, cloudy;
      for (std::size_t p = 0; p < HW; ++p)
        for (std::size_t b = 0; b < D; ++b) {
          const double v = scene.sequence.frames[(t * HW + p) * D + b];
          (scene.clouds.mask[t * HW + p] != 0.0 ? cloudy : clear).push_back(v);
        }
      if (cloudy.empty() || clear.empty()) continue;
      std::sort(clear.begin(), clear.end());
      const double p95 = clear[static_cast<std::size_t>(0.95 * static_cast<double>(clear.size() - 1))];
      CHECK(*std::min_element(cloudy.begin(), cloudy.end()) >= p95);
      ++frames_checked;
    }
    CHECK(frames_checked > 0);
  }

  TEST_CASE("scenes are reproducible and coverage is exact") {
    const SceneConfig cfg = small_scene();
    const Scene a = generate_scene(cfg);
    const Scene b = generate_scene(cfg);
    CHECK(bit_equal(a.sequence.frames, b.sequence.frames));
    CHECK(bit_equal(a.labels.classes, b.labels.classes));
    CHECK(bit_equal(a.clouds.mask, b.clouds.mask));
    const std::size_t HW = cfg.height * cfg.width;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      std::size_t n = 0;
      for (std::size_t p = 0; p < HW; ++p) n += a.clouds.mask[t * HW + p] != 0.0;
      CHECK(a.clouds.coverage[t] == static_cast<double>(n) / static_cast<double>(HW));
    }
    for (double v : a.sequence.frames.data()) CHECK((v >= 0.0 && v <= 1.2));

    SceneConfig shadowed = cfg;
    shadowed.shadows = true;
    CHECK_NOTHROW((void)generate_scene(shadowed));

    SceneConfig bad = cfg;
    bad.height = 50;
    CHECK_THROWS_AS((void)generate_scene(bad), ConfigError);
    bad = cfg;
    bad.cloud_probability = 1.5;
    CHECK_THROWS_AS((void)generate_scene(bad), ConfigError);
    bad = cfg;
    bad.frames = 0;
    CHECK_THROWS_AS((void)generate_scene(bad), ConfigError);
  }

  TEST_CASE("coverage_filter") {
    const std::vector<double> coverage{0.0, 0.3, 0.6, 0.05};
    CHECK(kept_frames(coverage, 0.25) == std::vector<std::size_t>{0, 3});
    CHECK(kept_frames(coverage, 0.0) == std::vector<std::size_t>{0});
    CHECK(kept_frames(coverage, 1.01) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(kept_frames(coverage, 0.6) == std::vector<std::size_t>{0, 1, 3});

    SceneConfig cfg = small_scene();
    cfg.frames = 20;
    const Scene scene = generate_scene(cfg);
    std::vector<std::size_t> previous;
    bool first = true;
    for (double threshold : {1.01, 0.5, 0.25, 0.1, 0.0}) {
      const auto kept = kept_frames(scene.clouds.coverage, threshold);
      if (!first) CHECK(std::includes(previous.begin(), previous.end(), kept.begin(), kept.end()));
      CHECK(std::is_sorted(kept.begin(), kept.end()));
      previous = kept;
      first = false;
      if (kept.empty()) {
        CHECK_THROWS_AS((void)coverage_filter(scene.sequence, scene.clouds, threshold), EmptyAfterFilterError);
        continue;
      }
      const auto filtered = coverage_filter(scene.sequence, scene.clouds, threshold);
      CHECK(filtered.kept == kept);
      REQUIRE(filtered.sequence.length() == kept.size());
      for (std::size_t n = 0; n < kept.size(); ++n) {
        CHECK(bit_equal(filtered.sequence.frame(n), scene.sequence.frame(kept[n])));
        CHECK(filtered.sequence.timestamps[n] == scene.sequence.timestamps[kept[n]]);
        CHECK(filtered.clouds.coverage[n] == scene.clouds.coverage[kept[n]]);
      }
    }
    CHECK(kept_frames(scene.clouds.coverage, 1.01).size() == 20);

    const std::vector<double> cloudy{0.5, 0.7};
    CHECK(kept_frames(cloudy, 0.0).empty());
  }

  TEST_CASE("partition geometry") {
    const auto a = partition_blocks(192, 192, 24, 96, 12, {4, 1, 1}, 7);
    CHECK(a.blocks.size() == 4);
    CHECK(a.tiles.size() == 64);
    std::size_t pairs = 0;
    for (const auto& s : a.tiles) {
      if (s.partition == Partition::margin) continue;
      CHECK(s.partition == a.blocks[s.block]);
      // Kept tiles lie wholly inside their block.
      const std::size_t by = s.block / a.block_cols, bx = s.block % a.block_cols;
      CHECK(s.y0 >= by * 96);
      CHECK(s.y0 + 24 <= (by + 1) * 96);
      CHECK(s.x0 >= bx * 96);
      CHECK(s.x0 + 24 <= (bx + 1) * 96);
      for (const auto& u : a.tiles) {
        if (u.partition == Partition::margin || u.partition == s.partition) continue;
        CHECK(std::max(gap(s.y0, u.y0, 24), gap(s.x0, u.x0, 24)) >= 12);
        ++pairs;
      }
    }
    CHECK(pairs > 0);
    CHECK(a.count(Partition::train) + a.count(Partition::valid) + a.count(Partition::eval) +
              a.count(Partition::margin) == 64);

    const auto one = partition_blocks(48, 48, 12, 48, 0, {4, 1, 1}, 1);
    REQUIRE(one.blocks.size() == 1);
    for (const auto& s : one.tiles) CHECK(s.partition == one.blocks[0]);

    const auto many = partition_blocks(80, 120, 4, 4, 0, {4, 1, 1}, 9);
    REQUIRE(many.blocks.size() == 600);
    const double n = 600.0;
    CHECK(std::abs(static_cast<double>(std::count(many.blocks.begin(), many.blocks.end(), Partition::train)) / n - 4.0 / 6.0) <= 0.05);
    CHECK(std::abs(static_cast<double>(std::count(many.blocks.begin(), many.blocks.end(), Partition::valid)) / n - 1.0 / 6.0) <= 0.05);
    CHECK(std::abs(static_cast<double>(std::count(many.blocks.begin(), many.blocks.end(), Partition::eval)) / n - 1.0 / 6.0) <= 0.05);

    const auto again = partition_blocks(192, 192, 24, 96, 12, {4, 1, 1}, 7);
    CHECK(again.blocks == a.blocks);

    CHECK_THROWS_AS((void)partition_blocks(192, 192, 24, 100, 12, {4, 1, 1}, 7), ConfigError);
  }

  TEST_CASE("dataset round trip") {
    const Dataset ds = build_dataset(small_scene());
    const fs::path dir = scratch_dir("roundtrip");
    write_dataset(dir, ds);
    const Dataset back = read_dataset(dir);
    CHECK(back.coverage == ds.coverage);
    REQUIRE(back.profiles.size() == ds.profiles.size());
    for (std::size_t c = 0; c < ds.profiles.size(); ++c) {
      CHECK(back.profiles[c].center == ds.profiles[c].center);
      CHECK(back.profiles[c].width == ds.profiles[c].width);
      CHECK(back.profiles[c].baseline == ds.profiles[c].baseline);
      CHECK(back.profiles[c].amplitude == ds.profiles[c].amplitude);
    }
    CHECK(back.config.seed == ds.config.seed);
    CHECK(back.config.cloud_opacity == ds.config.cloud_opacity);
    REQUIRE(back.tiles.size() == ds.tiles.size());
    for (std::size_t n = 0; n < ds.tiles.size(); ++n) {
      const auto& x = ds.tiles[n];
      const auto& y = back.tiles[n];
      CHECK(x.id == y.id);
      CHECK(x.info.partition == y.info.partition);
      CHECK(x.info.y0 == y.info.y0);
      CHECK(x.info.x0 == y.info.x0);
      CHECK(bit_equal(x.sequence.frames, y.sequence.frames));
      CHECK(x.sequence.timestamps == y.sequence.timestamps);
      CHECK(bit_equal(x.labels.classes, y.labels.classes));
      CHECK(bit_equal(x.clouds.mask, y.clouds.mask));
      CHECK(x.clouds.coverage == y.clouds.coverage);
    }

    for (const char* sub : {"tiles", "labels", "masks"}) {
      std::size_t files = 0;
      for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / sub)) ++files;
      CHECK(files == ds.tiles.size());
    }

    const fs::path victim = dir / "tiles" / (ds.tiles[0].id + ".clt");
    fs::resize_file(victim, fs::file_size(victim) / 2);
    try {
      (void)read_dataset(dir);
      FAIL("truncated tile accepted");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(victim.string()) != std::string::npos);
    }
    fs::remove_all(dir);
  }

  TEST_CASE("build_dataset tiles the scene") {
    const SceneConfig cfg = small_scene();
    const Dataset ds = build_dataset(cfg);
    const Scene scene = generate_scene(cfg);
    CHECK(ds.tiles.size() == 16);
    std::set<std::string> ids;
    for (const auto& t : ds.tiles) {
      ids.insert(t.id);
      CHECK(t.sequence.frames.shape() == Shape{6, 12, 12, 3});
      CHECK(t.labels.classes.at({0, 0}) == scene.labels.classes.at({t.info.y0, t.info.x0}));
      CHECK(t.sequence.frames.at({2, 5, 7, 1}) == scene.sequence.frames.at({2, t.info.y0 + 5, t.info.x0 + 7, 1}));
    }
    CHECK(ids.size() == 16);
    CHECK(ds.coverage == scene.clouds.coverage);
  }
}
