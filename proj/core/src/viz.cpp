#include "cloudlstm/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cloudlstm/errors.hpp"

namespace cloudlstm {

std::string to_string(PanelSource s) {
  switch (s) {
    case PanelSource::input: return "input";
    case PanelSource::i: return "i";
    case PanelSource::j: return "j";
    case PanelSource::f: return "f";
    case PanelSource::o: return "o";
    case PanelSource::c: return "c";
    case PanelSource::h: return "h";
  }
  return "?";
}

PanelSpec PanelSpec::gate_panel(std::size_t channel, std::vector<std::size_t> timesteps) {
  PanelSpec spec;
  spec.rows = {{PanelSource::input, channel, std::nullopt},
               {PanelSource::i, channel, std::nullopt},
               {PanelSource::j, channel, std::nullopt},
               {PanelSource::c, channel, std::nullopt}};
  spec.timesteps = std::move(timesteps);
  return spec;
}

std::uint8_t to_gray(double value, double lo, double hi) {
  const double scaled = (value - lo) / (hi - lo) * 255.0;
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(scaled), 0, 255));
}

namespace {

const Tensor& gate_tensor(const GateRecord& g, PanelSource s) {
  switch (s) {
    case PanelSource::i: return g.i;
    case PanelSource::j: return g.j;
    case PanelSource::f: return g.f;
    case PanelSource::o: return g.o;
    case PanelSource::c: return g.c;
    case PanelSource::h: return g.h;
    case PanelSource::input: break;
  }
  throw ConfigError("input row has no gate tensor");
}

std::pair<double, double> row_range(const PanelRow& row, const GateTrace& trace,
                                    const std::vector<std::size_t>& steps) {
  if (row.range) return *row.range;
  switch (row.source) {
    case PanelSource::input: return {0.0, 1.2};
    case PanelSource::i:
    case PanelSource::f: return {0.0, 1.0};
    case PanelSource::j:
    case PanelSource::o: return {-1.0, 1.0};
    case PanelSource::c:
    case PanelSource::h: break;
  }
  double peak = 0.0;
  for (std::size_t t : steps) {
    const Tensor& g = gate_tensor(trace.steps[t - 1], row.source);
    const std::size_t r = g.extent(2);
    for (std::size_t p = 0; p < g.size() / r; ++p) peak = std::max(peak, std::abs(g[p * r + row.channel]));
  }
  if (peak == 0.0) peak = 1.0;
  return {-peak, peak};
}

}  // namespace

GrayImage render_panel(const GateTrace& trace, const ImageSequence& seq, const PanelSpec& spec) {
  if (trace.length() == 0) throw ShapeError("render_panel: empty trace");
  if (spec.rows.empty() || spec.timesteps.empty()) throw ConfigError("render_panel: empty panel spec");
  if (spec.cell_scale == 0) throw ConfigError("render_panel: cell_scale must be >= 1");
  const std::size_t r = trace.hidden_channels();
  const std::size_t h = trace.steps.front().i.extent(0);
  const std::size_t w = trace.steps.front().i.extent(1);
  for (std::size_t t : spec.timesteps) {
    if (t < 1 || t > trace.length()) {
      throw ConfigError("render_panel: timestep " + std::to_string(t) + " outside [1, " +
                        std::to_string(trace.length()) + "]");
    }
  }
  for (const PanelRow& row : spec.rows) {
    if (row.channel >= r) {
      throw ConfigError("render_panel: channel " + std::to_string(row.channel) +
                        " out of range for " + std::to_string(r) + " hidden channels");
    }
  }
  const bool needs_input = std::any_of(spec.rows.begin(), spec.rows.end(),
                                       [](const PanelRow& row) { return row.source == PanelSource::input; });
  if (needs_input && (seq.length() < trace.length() || seq.height() != h || seq.width() != w)) {
    throw ShapeError("render_panel: sequence does not match the trace");
  }

  const std::size_t cell_h = h * spec.cell_scale;
  const std::size_t cell_w = w * spec.cell_scale;
  const std::size_t cols = spec.timesteps.size();
  const std::size_t rows = spec.rows.size();
  GrayImage image;
  image.width = cols * cell_w + (cols - 1) * spec.gap;
  image.height = rows * cell_h + (rows - 1) * spec.gap;
  image.pixels.assign(image.width * image.height, kGapGray);

  for (std::size_t ri = 0; ri < rows; ++ri) {
    const PanelRow& row = spec.rows[ri];
    const auto [lo, hi] = row_range(row, trace, spec.timesteps);
    for (std::size_t ci = 0; ci < cols; ++ci) {
      const std::size_t t = spec.timesteps[ci] - 1;
      const std::size_t top = ri * (cell_h + spec.gap);
      const std::size_t left = ci * (cell_w + spec.gap);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double value = 0.0;
          if (row.source == PanelSource::input) {
            const std::size_t bands = seq.bands();
            const std::size_t used = std::min<std::size_t>(3, bands);
            const double* px = seq.frames.data().data() + ((t * h + y) * w + x) * bands;
            for (std::size_t b = 0; b < used; ++b) value += px[b];
            value /= static_cast<double>(used);
          } else {
            value = gate_tensor(trace.steps[t], row.source)[(y * w + x) * r + row.channel];
          }
          const std::uint8_t gray = to_gray(value, lo, hi);
          for (std::size_t sy = 0; sy < spec.cell_scale; ++sy) {
            std::uint8_t* dst = image.pixels.data() + (top + y * spec.cell_scale + sy) * image.width +
                                left + x * spec.cell_scale;
            std::fill_n(dst, spec.cell_scale, gray);
          }
        }
      }
    }
  }
  return image;
}

std::string encode_pgm(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) {
    throw ShapeError("encode_pgm: pixel buffer does not match " + std::to_string(image.width) + "x" +
                     std::to_string(image.height));
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

void write_image(const GrayImage& image, const std::filesystem::path& path) {
  const std::string bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::string panel_filename(const std::string& prefix, std::size_t channel, std::size_t first,
                           std::size_t last) {
  return prefix + "_cell" + std::to_string(channel) + "_t" + std::to_string(first) + "-" +
         std::to_string(last) + ".pgm";
}

}  // namespace cloudlstm
