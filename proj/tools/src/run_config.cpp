#include "cloudlstm_app/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cloudlstm/errors.hpp"

namespace cloudlstm::app {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("invalid value '" + text + "' for config key '" + key + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid value '" + text + "' for config key '" + key + "' (expected true or false)");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one value");
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Field number(T RunConfig::*member) {
  return {[member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          },
          [member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); }};
}

template <class S, class T>
Field nested(S RunConfig::*outer, T S::*member) {
  return {[outer, member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*outer).*member ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return format_double((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          },
          [outer, member](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(k, v);
            else (c.*outer).*member = parse_number<T>(k, v);
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", number(&RunConfig::seed)},
      {"scene.height", nested(&RunConfig::scene, &SceneConfig::height)},
      {"scene.width", nested(&RunConfig::scene, &SceneConfig::width)},
      {"scene.tile_size", nested(&RunConfig::scene, &SceneConfig::tile_size)},
      {"scene.frames", nested(&RunConfig::scene, &SceneConfig::frames)},
      {"scene.bands", nested(&RunConfig::scene, &SceneConfig::bands)},
      {"scene.classes", nested(&RunConfig::scene, &SceneConfig::classes)},
      {"scene.parcel_size", nested(&RunConfig::scene, &SceneConfig::parcel_size)},
      {"scene.cloud_probability", nested(&RunConfig::scene, &SceneConfig::cloud_probability)},
      {"scene.cloud_opacity", nested(&RunConfig::scene, &SceneConfig::cloud_opacity)},
      {"scene.noise_std", nested(&RunConfig::scene, &SceneConfig::noise_std)},
      {"scene.shadows", nested(&RunConfig::scene, &SceneConfig::shadows)},
      {"scene.block_size", nested(&RunConfig::scene, &SceneConfig::block_size)},
      {"scene.margin", nested(&RunConfig::scene, &SceneConfig::margin)},
      {"cell.kernel", number(&RunConfig::kernel)},
      {"cell.hidden_channels", number(&RunConfig::hidden_channels)},
      {"cell.variant",
       {[](const RunConfig& c) { return to_string(c.variant); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.variant = parse_variant(v);
          } catch (const Error&) {
            throw ConfigError("invalid value '" + v + "' for config key '" + k + "' (expected printed or standard)");
          }
        }}},
      {"train.learning_rate", nested(&RunConfig::train, &TrainConfig::learning_rate)},
      {"train.beta1", nested(&RunConfig::train, &TrainConfig::beta1)},
      {"train.beta2", nested(&RunConfig::train, &TrainConfig::beta2)},
      {"train.epsilon", nested(&RunConfig::train, &TrainConfig::epsilon)},
      {"train.epochs", nested(&RunConfig::train, &TrainConfig::epochs)},
      {"train.batch_size", nested(&RunConfig::train, &TrainConfig::batch_size)},
      {"train.checkpoint_every", number(&RunConfig::checkpoint_every)},
      {"train.wall_clock",
       {[](const RunConfig& c) { return std::string(c.wall_clock ? "true" : "false"); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.wall_clock = parse_bool(k, v); }}},
      {"ablate.thresholds",
       {[](const RunConfig& c) {
          std::string s;
          for (std::size_t n = 0; n < c.thresholds.size(); ++n) s += (n ? "," : "") + format_double(c.thresholds[n]);
          return s;
        },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.thresholds = parse_list(k, v); }}},
      {"visualize.panel_scale", number(&RunConfig::panel_scale)},
      {"out",
       {[](const RunConfig& c) { return c.out.string(); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v.empty()) throw ConfigError("config key '" + k + "' must not be empty");
          c.out = v;
        }}},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    try {
      apply_assignment(body);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::string RunConfig::to_text() const {
  std::string text;
  for (const auto& [name, field] : fields()) text += name + "=" + field.get(*this) + "\n";
  return text;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << to_text();
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [name, field] : fields()) out.push_back(name);
  return out;
}

SceneConfig RunConfig::scene_config() const {
  SceneConfig s = scene;
  s.seed = seed;
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

CellConfig RunConfig::cell_config(std::size_t input_channels, std::size_t tile) const {
  return {kernel, input_channels, hidden_channels, tile, tile, variant};
}

void RunConfig::validate() const {
  scene_config().validate();
  train_config().validate();
  cell_config(scene.bands, scene.tile_size).validate();
  for (double t : thresholds) {
    if (!(t >= 0.0)) throw ConfigError("ablate.thresholds entries must be >= 0");
  }
  if (panel_scale == 0) throw ConfigError("visualize.panel_scale must be >= 1");
}

}  // namespace cloudlstm::app
