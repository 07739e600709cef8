#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cloudlstm/errors.hpp"
#include "cloudlstm/synthdata.hpp"
#include "cloudlstm/tensor_io.hpp"

namespace cloudlstm {
namespace {

constexpr const char* kFormat = "cloudlstm-dataset-1";

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

class Manifest {
 public:
  Manifest(std::map<std::string, std::string> entries, std::string source)
      : entries_(std::move(entries)), source_(std::move(source)) {}

  [[nodiscard]] const std::string& text(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw FormatError(source_ + ": missing key '" + key + "'");
    return it->second;
  }

  [[nodiscard]] std::size_t size(const std::string& key) const {
    const std::string& v = text(key);
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw FormatError(source_ + ": key '" + key + "' is not an unsigned integer: " + v);
    }
    return out;
  }

  [[nodiscard]] double number(const std::string& v, const std::string& key) const {
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw FormatError(source_ + ": key '" + key + "' holds a non-numeric value: " + v);
    }
  }

  [[nodiscard]] double number(const std::string& key) const { return number(text(key), key); }

  [[nodiscard]] std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split(text(key), ',')) out.push_back(number(item, key));
    return out;
  }

  [[nodiscard]] const std::string& source() const { return source_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string source_;
};

Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  Manifest m(std::move(entries), path.string());
  if (m.text("format") != kFormat) {
    throw FormatError(path.string() + ": unsupported format '" + m.text("format") + "'");
  }
  return m;
}

Tensor load_checked(const std::filesystem::path& path, const Shape& expected) {
  Tensor t = load_tensor(path);
  if (t.shape() != expected) {
    throw FormatError(path.string() + ": shape " + shape_string(t.shape()) + " does not match manifest " +
                      shape_string(expected));
  }
  return t;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  const SceneConfig& cfg = dataset.config;
  for (const char* sub : {"tiles", "labels", "masks"}) std::filesystem::create_directories(dir / sub);

  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "manifest.txt").string());
  out << "format=" << kFormat << '\n'
      << "height=" << cfg.height << '\n'
      << "width=" << cfg.width << '\n'
      << "tile_size=" << cfg.tile_size << '\n'
      << "frames=" << cfg.frames << '\n'
      << "bands=" << cfg.bands << '\n'
      << "classes=" << cfg.classes << '\n'
      << "seed=" << cfg.seed << '\n'
      << "parcel_size=" << format_double(cfg.parcel_size) << '\n'
      << "cloud_probability=" << format_double(cfg.cloud_probability) << '\n'
      << "cloud_opacity=" << format_double(cfg.cloud_opacity) << '\n'
      << "noise_std=" << format_double(cfg.noise_std) << '\n'
      << "shadows=" << (cfg.shadows ? 1 : 0) << '\n'
      << "block_size=" << cfg.block_size << '\n'
      << "margin=" << cfg.margin << '\n'
      << "coverage=" << join(dataset.coverage, format_double) << '\n';
  for (std::size_t c = 0; c < dataset.profiles.size(); ++c) {
    const ClassProfile& p = dataset.profiles[c];
    std::vector<double> values{p.center, p.width};
    values.insert(values.end(), p.baseline.begin(), p.baseline.end());
    values.insert(values.end(), p.amplitude.begin(), p.amplitude.end());
    out << "profile." << c << '=' << join(values, format_double) << '\n';
  }
  out << "tiles=" << dataset.tiles.size() << '\n'
      << "tile_ids=" << join(dataset.tiles, [](const DatasetTile& t) { return t.id; }) << '\n'
      << "tile_origins="
      << join(dataset.tiles,
              [](const DatasetTile& t) { return std::to_string(t.info.y0) + ":" + std::to_string(t.info.x0); })
      << '\n'
      << "tile_blocks="
      << join(dataset.tiles, [](const DatasetTile& t) { return std::to_string(t.info.block); }) << '\n'
      << "partition="
      << join(dataset.tiles, [](const DatasetTile& t) { return to_string(t.info.partition); }) << '\n';
  if (!out) throw Error("failed writing " + (dir / "manifest.txt").string());

  for (const DatasetTile& tile : dataset.tiles) {
    save_tensor(dir / "tiles" / (tile.id + ".clt"), tile.sequence.frames);
    save_tensor(dir / "labels" / (tile.id + ".clt"), tile.labels.classes);
    save_tensor(dir / "masks" / (tile.id + ".clt"), tile.clouds.mask);
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const Manifest m = parse_manifest(dir / "manifest.txt");
  Dataset ds;
  SceneConfig& cfg = ds.config;
  cfg.height = m.size("height");
  cfg.width = m.size("width");
  cfg.tile_size = m.size("tile_size");
  cfg.frames = m.size("frames");
  cfg.bands = m.size("bands");
  cfg.classes = m.size("classes");
  cfg.seed = m.size("seed");
  cfg.parcel_size = m.number("parcel_size");
  cfg.cloud_probability = m.number("cloud_probability");
  cfg.cloud_opacity = m.number("cloud_opacity");
  cfg.noise_std = m.number("noise_std");
  cfg.shadows = m.size("shadows") != 0;
  cfg.block_size = m.size("block_size");
  cfg.margin = m.size("margin");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(m.source() + ": " + e.what());
  }

  ds.coverage = m.numbers("coverage");
  if (ds.coverage.size() != cfg.frames) {
    throw FormatError(m.source() + ": coverage list has " + std::to_string(ds.coverage.size()) +
                      " entries for " + std::to_string(cfg.frames) + " frames");
  }
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const std::string key = "profile." + std::to_string(c);
    const std::vector<double> v = m.numbers(key);
    if (v.size() != 2 + 2 * cfg.bands) throw FormatError(m.source() + ": malformed " + key);
    ClassProfile p;
    p.center = v[0];
    p.width = v[1];
    p.baseline.assign(v.begin() + 2, v.begin() + 2 + static_cast<std::ptrdiff_t>(cfg.bands));
    p.amplitude.assign(v.begin() + 2 + static_cast<std::ptrdiff_t>(cfg.bands), v.end());
    ds.profiles.push_back(std::move(p));
  }

  const std::size_t count = m.size("tiles");
  const auto ids = split(m.text("tile_ids"), ',');
  const auto origins = split(m.text("tile_origins"), ',');
  const auto blocks = split(m.text("tile_blocks"), ',');
  const auto partitions = split(m.text("partition"), ',');
  if (ids.size() != count || origins.size() != count || blocks.size() != count ||
      partitions.size() != count) {
    throw FormatError(m.source() + ": per-tile lists disagree with tiles=" + std::to_string(count));
  }

  const std::size_t ts = cfg.tile_size;
  const std::size_t tile_cols = cfg.width / ts;
  const std::vector<double> stamps = ImageSequence::even_timestamps(cfg.frames);
  for (std::size_t i = 0; i < count; ++i) {
    DatasetTile tile;
    tile.id = ids[i];
    const auto colon = origins[i].find(':');
    if (colon == std::string::npos) throw FormatError(m.source() + ": malformed tile origin " + origins[i]);
    try {
      tile.info.y0 = std::stoul(origins[i].substr(0, colon));
      tile.info.x0 = std::stoul(origins[i].substr(colon + 1));
      tile.info.block = std::stoul(blocks[i]);
      tile.info.partition = parse_partition(partitions[i]);
    } catch (const std::exception& e) {
      throw FormatError(m.source() + ": bad entry for tile " + tile.id + ": " + e.what());
    }
    tile.info.index = (tile.info.y0 / ts) * tile_cols + tile.info.x0 / ts;

    const Tensor frames = load_checked(dir / "tiles" / (tile.id + ".clt"), {cfg.frames, ts, ts, cfg.bands});
    const auto labels_path = dir / "labels" / (tile.id + ".clt");
    tile.labels = {load_checked(labels_path, {ts, ts})};
    try {
      tile.labels.validate(cfg.classes);
    } catch (const ShapeError& e) {
      throw FormatError(labels_path.string() + ": " + e.what());
    }
    const auto mask_path = dir / "masks" / (tile.id + ".clt");
    try {
      tile.clouds = CloudMask::from_mask(load_checked(mask_path, {cfg.frames, ts, ts}));
    } catch (const ShapeError& e) {
      throw FormatError(mask_path.string() + ": " + e.what());
    }
    tile.sequence = {frames, stamps};
    ds.tiles.push_back(std::move(tile));
  }
  return ds;
}

}  // namespace cloudlstm
