#pragma once

// Run-directory layout:
//   config.json            echo of the configuration
//   metrics.csv            one row per generation (deterministic)
//   timing.csv             wall-clock seconds per generation
//   metrics.svg            one small line chart per metric
//   gen_<g>/samples.csv    evaluation samples of V_g
//   gen_<g>/grid.pgm       tiled evaluation images (image datasets only)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "degenloop/config.hpp"
#include "degenloop/harness.hpp"
#include "degenloop/io.hpp"

namespace degenloop {

inline constexpr const char* kMetricsHeader =
    "generation,pool_size,real_fraction,final_train_loss,mmd_rbf,sliced_wasserstein,mean_pairwise_distance,"
    "mode_coverage,nn_distance_to_real";

inline std::string metrics_csv_string(const EvolutionReport& report) {
  std::string out = kMetricsHeader;
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& g : report.generations) {
    out += std::to_string(g.generation) + ',' + std::to_string(g.pool_size) + ',' + format_double(g.real_fraction) + ',';
    if (g.diverged) {
      // Divergence marker; the metric cells stay empty.
      out += "diverged,,,,,\n";
      continue;
    }
    out += opt(g.final_train_loss) + ',' + format_double(g.metrics.mmd_rbf) + ',' +
           format_double(g.metrics.sliced_wasserstein) + ',' + format_double(g.metrics.mean_pairwise_distance) + ',' +
           opt(g.metrics.mode_coverage) + ',' + format_double(g.metrics.nn_distance_to_real) + '\n';
  }
  return out;
}

namespace detail {

inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

// Small-multiples line chart, one panel per metric against generation.
inline std::string metrics_svg_string(const EvolutionReport& report) {
  struct Series {
    const char* name;
    std::function<std::optional<double>(const GenerationReport&)> get;
  };
  const std::vector<Series> series{
      {"mmd_rbf", [](const GenerationReport& g) { return std::optional<double>(g.metrics.mmd_rbf); }},
      {"sliced_wasserstein", [](const GenerationReport& g) { return std::optional<double>(g.metrics.sliced_wasserstein); }},
      {"mean_pairwise_distance",
       [](const GenerationReport& g) { return std::optional<double>(g.metrics.mean_pairwise_distance); }},
      {"mode_coverage", [](const GenerationReport& g) { return g.metrics.mode_coverage; }},
      {"nn_distance_to_real", [](const GenerationReport& g) { return std::optional<double>(g.metrics.nn_distance_to_real); }},
      {"final_train_loss", [](const GenerationReport& g) { return g.final_train_loss; }},
  };
  constexpr double pw = 320, ph = 200, ml = 56, mr = 16, mt = 28, mb = 32;
  constexpr int cols = 3;
  const int rows = static_cast<int>((series.size() + cols - 1) / cols);
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt2(pw * cols) + "\" height=\"" +
                  detail::fmt2(ph * rows) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::size_t n = report.generations.size();
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ox = pw * static_cast<double>(k % cols), oy = ph * static_cast<double>(k / cols);
    const double x0 = ox + ml, x1 = ox + pw - mr, y0 = oy + ph - mb, y1 = oy + mt;
    std::vector<std::pair<double, double>> pts;
    for (const auto& g : report.generations) {
      if (g.diverged) continue;
      if (auto v = series[k].get(g); v && std::isfinite(*v)) pts.emplace_back(g.generation, *v);
    }
    s += "<text x=\"" + detail::fmt2(ox + pw / 2) + "\" y=\"" + detail::fmt2(oy + 16) + "\" text-anchor=\"middle\">" +
         series[k].name + "</text>\n";
    s += "<rect x=\"" + detail::fmt2(x0) + "\" y=\"" + detail::fmt2(y1) + "\" width=\"" + detail::fmt2(x1 - x0) +
         "\" height=\"" + detail::fmt2(y0 - y1) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    if (pts.empty()) continue;
    double lo = pts.front().second, hi = lo;
    for (const auto& p : pts) {
      lo = std::min(lo, p.second);
      hi = std::max(hi, p.second);
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double gmax = std::max<double>(2.0, static_cast<double>(n));
    auto px = [&](double g) { return x0 + (g - 1.0) / (gmax - 1.0) * (x1 - x0); };
    auto py = [&](double v) { return y0 - (v - lo) / (hi - lo) * (y0 - y1); };
    s += "<text x=\"" + detail::fmt2(x0 - 4) + "\" y=\"" + detail::fmt2(y0) + "\" text-anchor=\"end\">" +
         detail::fmt_tick(lo) + "</text>\n";
    s += "<text x=\"" + detail::fmt2(x0 - 4) + "\" y=\"" + detail::fmt2(y1 + 10) + "\" text-anchor=\"end\">" +
         detail::fmt_tick(hi) + "</text>\n";
    for (std::size_t g = 1; g <= n; ++g)
      s += "<text x=\"" + detail::fmt2(px(static_cast<double>(g))) + "\" y=\"" + detail::fmt2(y0 + 14) +
           "\" text-anchor=\"middle\">" + std::to_string(g) + "</text>\n";
    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) s += ' ';
      s += detail::fmt2(px(pts[i].first)) + "," + detail::fmt2(py(pts[i].second));
    }
    s += "\"/>\n";
    for (const auto& p : pts)
      s += "<circle cx=\"" + detail::fmt2(px(p.first)) + "\" cy=\"" + detail::fmt2(py(p.second)) +
           "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void emit_outputs(const EvolutionReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  write_text_file(dir / "config.json", config_to_json(report.config).dump(2) + "\n");
  write_text_file(dir / "metrics.csv", metrics_csv_string(report));
  std::string timing = "generation,wall_seconds\n";
  for (const auto& g : report.generations) timing += std::to_string(g.generation) + ',' + format_double(g.wall_seconds) + '\n';
  write_text_file(dir / "timing.csv", timing);
  write_text_file(dir / "metrics.svg", metrics_svg_string(report));
  const bool images = report.config.dataset.is_image();
  for (const auto& g : report.generations) {
    if (g.samples.rows == 0) continue;
    const fs::path gdir = dir / ("gen_" + std::to_string(g.generation));
    fs::create_directories(gdir, ec);
    if (ec) throw IoError("cannot create " + gdir.string() + ": " + ec.message());
    write_samples_csv(gdir / "samples.csv", g.samples);
    if (images) write_image_grid(gdir / "grid.pgm", g.samples, report.config.dataset.flowers.side);
  }
}

// Sweep layout: <dir>/alpha_<a>/ per run plus <dir>/sweep.csv with the
// final-generation row of every run.
inline void emit_sweep_outputs(const std::vector<EvolutionReport>& reports, const fs::path& dir) {
  std::string summary = std::string("alpha,") + kMetricsHeader + '\n';
  for (const auto& r : reports) {
    emit_outputs(r, dir / ("alpha_" + format_double(r.config.alpha)));
    const std::string rows = metrics_csv_string(r);
    const auto last_start = rows.rfind('\n', rows.size() - 2);
    summary += format_double(r.config.alpha) + ',' + rows.substr(last_start + 1);
  }
  write_text_file(dir / "sweep.csv", summary);
}

}  // namespace degenloop
