#include "cloudlstm/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cloudlstm/errors.hpp"
#include "cloudlstm/random.hpp"

namespace cloudlstm {

void SceneConfig::validate() const {
  if (tile_size == 0) throw ConfigError("tile_size must be >= 1");
  if (height == 0 || width == 0) throw ConfigError("scene extents must be >= 1");
  if (height % tile_size != 0 || width % tile_size != 0) {
    throw ConfigError("scene extents " + std::to_string(height) + "x" + std::to_string(width) +
                      " are not divisible into tiles of " + std::to_string(tile_size));
  }
  if (frames == 0) throw ConfigError("frames must be >= 1");
  if (bands == 0) throw ConfigError("bands must be >= 1");
  if (classes == 0) throw ConfigError("classes must be >= 1");
  if (!(parcel_size >= 1.0)) throw ConfigError("parcel_size must be >= 1");
  if (!(cloud_probability >= 0.0 && cloud_probability <= 1.0)) {
    throw ConfigError("cloud_probability must lie in [0, 1]");
  }
  if (!(cloud_opacity >= 0.0 && cloud_opacity <= 1.2)) {
    throw ConfigError("cloud_opacity must lie in [0, 1.2]");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std must be >= 0");
  if (block_size == 0 || block_size % tile_size != 0) {
    throw ConfigError("block_size " + std::to_string(block_size) +
                      " must be a positive multiple of tile_size " + std::to_string(tile_size));
  }
}

double ClassProfile::reflectance(std::size_t band, double time) const {
  const double d = time - center;
  return baseline[band] + amplitude[band] * std::exp(-d * d / (2.0 * width * width));
}

namespace {

struct Rect {
  std::size_t y0, x0, h, w;
};

std::vector<ClassProfile> draw_profiles(const SceneConfig& cfg, Rng& rng) {
  std::vector<ClassProfile> profiles(cfg.classes);
  const double spacing = 1.0 / static_cast<double>(cfg.classes);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    ClassProfile& p = profiles[c];
    p.center = (static_cast<double>(c) + 0.5) * spacing + rng.uniform(-0.25, 0.25) * spacing;
    p.width = rng.uniform(0.05, 0.12);
    p.baseline.resize(cfg.bands);
    p.amplitude.resize(cfg.bands);
    for (std::size_t b = 0; b < cfg.bands; ++b) {
      p.baseline[b] = rng.uniform(0.08, 0.20);
      p.amplitude[b] = rng.uniform(0.10, 0.40);
    }
  }
  return profiles;
}

/// Recursive random splitting into rectangular parcels, one class each.
std::vector<std::size_t> draw_parcels(const SceneConfig& cfg, Rng& rng) {
  std::vector<std::size_t> labels(cfg.height * cfg.width, 0);
  std::vector<Rect> stack{{0, 0, cfg.height, cfg.width}};
  while (!stack.empty()) {
    const Rect r = stack.back();
    stack.pop_back();
    const std::size_t longer = std::max(r.h, r.w);
    if (static_cast<double>(longer) <= cfg.parcel_size || longer < 2) {
      const std::size_t cls = rng.index(cfg.classes);
      for (std::size_t y = r.y0; y < r.y0 + r.h; ++y) {
        std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(y * cfg.width + r.x0), r.w, cls);
      }
      continue;
    }
    const auto cut = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(rng.uniform(0.3, 0.7) * static_cast<double>(longer))), 1,
        longer - 1);
    if (r.h >= r.w) {
      stack.push_back({r.y0, r.x0, cut, r.w});
      stack.push_back({r.y0 + cut, r.x0, r.h - cut, r.w});
    } else {
      stack.push_back({r.y0, r.x0, r.h, cut});
      stack.push_back({r.y0, r.x0 + cut, r.h, r.w - cut});
    }
  }
  return labels;
}

/// Bilinearly interpolated lattice noise with smoothstep weights.
void add_octave(std::vector<double>& field, std::size_t height, std::size_t width, double cell,
                double weight, Rng& rng) {
  const std::size_t gh = static_cast<std::size_t>(std::ceil(static_cast<double>(height) / cell)) + 2;
  const std::size_t gw = static_cast<std::size_t>(std::ceil(static_cast<double>(width) / cell)) + 2;
  std::vector<double> lattice(gh * gw);
  for (double& v : lattice) v = rng.uniform();
  const double oy = rng.uniform(0.0, 1.0);
  const double ox = rng.uniform(0.0, 1.0);
  const auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = static_cast<double>(y) / cell + oy;
    const auto iy = static_cast<std::size_t>(fy);
    const double ty = smooth(fy - static_cast<double>(iy));
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / cell + ox;
      const auto ix = static_cast<std::size_t>(fx);
      const double tx = smooth(fx - static_cast<double>(ix));
      const double a = lattice[iy * gw + ix];
      const double b = lattice[iy * gw + ix + 1];
      const double c = lattice[(iy + 1) * gw + ix];
      const double d = lattice[(iy + 1) * gw + ix + 1];
      const double top = a + (b - a) * tx;
      const double bottom = c + (d - c) * tx;
      field[y * width + x] += weight * (top + (bottom - top) * ty);
    }
  }
}

/// One frame's cloud mask: the top `coverage` fraction of a smooth random field.
std::vector<char> draw_cloud_mask(const SceneConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.height * cfg.width;
  const double coverage = rng.uniform(0.02, 1.0);
  const double coarse = std::max(8.0, static_cast<double>(std::min(cfg.height, cfg.width)) / 4.0);
  std::vector<double> field(n, 0.0);
  add_octave(field, cfg.height, cfg.width, coarse, 1.0, rng);
  add_octave(field, cfg.height, cfg.width, coarse / 3.0, 0.5, rng);

  const auto cloudy = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(coverage * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return field[a] != field[b] ? field[a] > field[b] : a < b;
  });
  std::vector<char> mask(n, 0);
  for (std::size_t k = 0; k < cloudy; ++k) mask[order[k]] = 1;
  return mask;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t h = cfg.height;
  const std::size_t w = cfg.width;
  const std::size_t bands = cfg.bands;
  const std::size_t frames = cfg.frames;
  const std::size_t n = h * w;

  Scene scene;
  scene.profiles = draw_profiles(cfg, rng);
  const std::vector<std::size_t> classes = draw_parcels(cfg, rng);
  scene.labels = LabelMap::from_indices(h, w, classes);

  std::vector<std::vector<char>> clouds(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    if (rng.bernoulli(cfg.cloud_probability)) clouds[t] = draw_cloud_mask(cfg, rng);
  }

  Tensor values({frames, h, w, bands});
  Tensor mask({frames, h, w});
  const std::vector<double> stamps = ImageSequence::even_timestamps(frames);
  const std::size_t shadow_offset = std::max<std::size_t>(1, cfg.tile_size / 4);

  for (std::size_t t = 0; t < frames; ++t) {
    const std::vector<char>& cloud = clouds[t];
    for (std::size_t p = 0; p < n; ++p) {
      const ClassProfile& profile = scene.profiles[classes[p]];
      double* px = values.data().data() + (t * n + p) * bands;
      const bool is_cloud = !cloud.empty() && cloud[p];
      mask[t * n + p] = is_cloud ? 1.0 : 0.0;
      bool shadowed = false;
      if (cfg.shadows && !cloud.empty() && !is_cloud) {
        const std::size_t y = p / w;
        const std::size_t x = p % w;
        shadowed = y >= shadow_offset && x >= shadow_offset &&
                   cloud[(y - shadow_offset) * w + (x - shadow_offset)];
      }
      for (std::size_t b = 0; b < bands; ++b) {
        double v = is_cloud ? cfg.cloud_opacity : profile.reflectance(b, stamps[t]);
        if (shadowed) v *= 0.5;
        px[b] = v;
      }
    }
  }

  // Pixel noise: each tile draws from its own sub-seeded stream.
  if (cfg.noise_std > 0.0) {
    const std::size_t ts = cfg.tile_size;
    const std::size_t tile_cols = w / ts;
    const std::size_t tile_count = (h / ts) * tile_cols;
    for (std::size_t tile = 0; tile < tile_count; ++tile) {
      Rng tile_rng(mix_seed(cfg.seed, tile));
      const std::size_t y0 = (tile / tile_cols) * ts;
      const std::size_t x0 = (tile % tile_cols) * ts;
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t y = y0; y < y0 + ts; ++y) {
          for (std::size_t x = x0; x < x0 + ts; ++x) {
            double* px = values.data().data() + (t * n + y * w + x) * bands;
            for (std::size_t b = 0; b < bands; ++b) px[b] += tile_rng.normal(0.0, cfg.noise_std);
          }
        }
      }
    }
  }
  for (double& v : values.data()) v = std::clamp(v, 0.0, 1.2);

  scene.sequence = {std::move(values), stamps};
  scene.clouds = CloudMask::from_mask(std::move(mask));
  return scene;
}

std::vector<std::size_t> kept_frames(std::span<const double> coverage, double threshold) {
  if (!(threshold >= 0.0)) throw ConfigError("coverage threshold must be >= 0");
  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < coverage.size(); ++t) {
    const bool keep = threshold == 0.0 ? coverage[t] == 0.0 : coverage[t] < threshold;
    if (keep) kept.push_back(t);
  }
  return kept;
}

FilteredSequence coverage_filter(const ImageSequence& seq, const CloudMask& mask, double threshold) {
  seq.validate();
  if (mask.length() != seq.length()) {
    throw ShapeError("coverage_filter: mask has " + std::to_string(mask.length()) +
                     " frames, sequence has " + std::to_string(seq.length()));
  }
  std::vector<std::size_t> kept = kept_frames(mask.coverage, threshold);
  if (kept.empty()) {
    throw EmptyAfterFilterError("coverage_filter: no frame has coverage below " +
                                std::to_string(threshold));
  }
  return {seq.select(kept), mask.select(kept), std::move(kept)};
}

std::string to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::valid: return "valid";
    case Partition::eval: return "eval";
    case Partition::margin: return "margin";
  }
  return "margin";
}

Partition parse_partition(const std::string& text) {
  if (text == "train") return Partition::train;
  if (text == "valid") return Partition::valid;
  if (text == "eval") return Partition::eval;
  if (text == "margin") return Partition::margin;
  throw ConfigError("unknown partition '" + text + "'");
}

std::size_t PartitionAssignment::count(Partition p) const {
  return static_cast<std::size_t>(
      std::count_if(tiles.begin(), tiles.end(), [p](const TileInfo& t) { return t.partition == p; }));
}

namespace {

/// Largest-remainder quotas; every partition with a positive ratio gets at
/// least one block when there are enough blocks to go around.
std::array<std::size_t, 3> block_quotas(std::size_t blocks, std::array<std::size_t, 3> ratios) {
  const std::size_t total = ratios[0] + ratios[1] + ratios[2];
  std::array<std::size_t, 3> quota{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(blocks * ratios[i]) / static_cast<double>(total);
    quota[i] = static_cast<std::size_t>(exact);
    remainder[i] = exact - static_cast<double>(quota[i]);
    assigned += quota[i];
  }
  while (assigned < blocks) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainder[i] > remainder[best]) best = i;
    }
    ++quota[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  const auto positive = static_cast<std::size_t>(std::count_if(
      ratios.begin(), ratios.end(), [](std::size_t r) { return r > 0; }));
  if (blocks >= positive) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (ratios[i] == 0 || quota[i] > 0) continue;
      const auto donor = static_cast<std::size_t>(
          std::max_element(quota.begin(), quota.end()) - quota.begin());
      --quota[donor];
      ++quota[i];
    }
  }
  return quota;
}

bool overlaps(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
  return a0 < b1 && b0 < a1;
}

}  // namespace

PartitionAssignment partition_blocks(std::size_t height, std::size_t width, std::size_t tile_size,
                                     std::size_t block_size, std::size_t margin,
                                     std::array<std::size_t, 3> ratios, std::uint64_t seed) {
  if (tile_size == 0 || height % tile_size != 0 || width % tile_size != 0) {
    throw ConfigError("scene extents must be whole multiples of the tile size");
  }
  if (block_size == 0 || block_size % tile_size != 0) {
    throw ConfigError("block size " + std::to_string(block_size) +
                      " is not a multiple of the tile size " + std::to_string(tile_size));
  }
  if (ratios[0] + ratios[1] + ratios[2] == 0) throw ConfigError("partition ratios sum to zero");

  PartitionAssignment a;
  a.tile_size = tile_size;
  a.block_size = block_size;
  a.margin = margin;
  a.block_rows = (height + block_size - 1) / block_size;
  a.block_cols = (width + block_size - 1) / block_size;
  const std::size_t blocks = a.block_rows * a.block_cols;

  const auto quota = block_quotas(blocks, ratios);
  for (std::size_t i = 0; i < 3; ++i) a.blocks.insert(a.blocks.end(), quota[i], static_cast<Partition>(i));
  Rng rng(seed);
  rng.shuffle(a.blocks.begin(), a.blocks.end());

  const std::size_t low = (margin + 1) / 2;  // strip on the upper/left side of a border
  const std::size_t high = margin / 2;       // strip on the lower/right side
  const auto strips = [&](std::size_t start, std::size_t extent, std::size_t t0, std::size_t t1) {
    const std::size_t end = std::min(start + block_size, extent);
    if (start > 0 && overlaps(t0, t1, start, start + high)) return true;
    if (end < extent && overlaps(t0, t1, end - std::min(low, end - start), end)) return true;
    return false;
  };

  const std::size_t tile_cols = width / tile_size;
  const std::size_t tile_count = (height / tile_size) * tile_cols;
  for (std::size_t idx = 0; idx < tile_count; ++idx) {
    TileInfo t;
    t.index = idx;
    t.y0 = (idx / tile_cols) * tile_size;
    t.x0 = (idx % tile_cols) * tile_size;
    const std::size_t br = t.y0 / block_size;
    const std::size_t bc = t.x0 / block_size;
    t.block = br * a.block_cols + bc;
    const bool in_margin = strips(br * block_size, height, t.y0, t.y0 + tile_size) ||
                           strips(bc * block_size, width, t.x0, t.x0 + tile_size);
    t.partition = in_margin ? Partition::margin : a.blocks[t.block];
    a.tiles.push_back(t);
  }
  return a;
}

std::vector<const DatasetTile*> Dataset::in_partition(Partition p) const {
  std::vector<const DatasetTile*> out;
  for (const auto& t : tiles) {
    if (t.info.partition == p) out.push_back(&t);
  }
  return out;
}

const DatasetTile& Dataset::tile(const std::string& id) const {
  for (const auto& t : tiles) {
    if (t.id == id) return t;
  }
  throw ConfigError("no tile with id '" + id + "'");
}

Dataset build_dataset(const SceneConfig& cfg) {
  const Scene scene = generate_scene(cfg);
  const PartitionAssignment assignment = partition_blocks(
      cfg.height, cfg.width, cfg.tile_size, cfg.block_size, cfg.margin, {4, 1, 1}, cfg.seed);

  Dataset ds;
  ds.config = cfg;
  ds.profiles = scene.profiles;
  ds.coverage = scene.clouds.coverage;

  const std::size_t ts = cfg.tile_size;
  const std::size_t bands = cfg.bands;
  const std::size_t frames = cfg.frames;
  for (const TileInfo& info : assignment.tiles) {
    DatasetTile tile;
    char id[16];
    std::snprintf(id, sizeof(id), "t%04zu", info.index);
    tile.id = id;
    tile.info = info;
    Tensor values({frames, ts, ts, bands});
    Tensor mask({frames, ts, ts});
    Tensor labels({ts, ts});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t y = 0; y < ts; ++y) {
        for (std::size_t x = 0; x < ts; ++x) {
          const std::size_t sy = info.y0 + y;
          const std::size_t sx = info.x0 + x;
          for (std::size_t b = 0; b < bands; ++b) {
            values[((t * ts + y) * ts + x) * bands + b] =
                scene.sequence.frames[((t * cfg.height + sy) * cfg.width + sx) * bands + b];
          }
          mask[(t * ts + y) * ts + x] = scene.clouds.mask[(t * cfg.height + sy) * cfg.width + sx];
          if (t == 0) labels[y * ts + x] = scene.labels.classes[sy * cfg.width + sx];
        }
      }
    }
    tile.sequence = {std::move(values), scene.sequence.timestamps};
    tile.labels = {std::move(labels)};
    tile.clouds = CloudMask::from_mask(std::move(mask));
    ds.tiles.push_back(std::move(tile));
  }
  return ds;
}

}  // namespace cloudlstm
