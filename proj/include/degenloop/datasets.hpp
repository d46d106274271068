#pragma once

// Original-data generators with known ground truth, plus ingestion of
// user-supplied CSV / PGM data.
//
//   gaussian_ring       k isotropic Gaussians evenly spaced on a circle
//   procedural_flowers  side x side grayscale radial petal patterns; the
//                       petal count is the class label
//   external            CSV rows or PGM files from a directory

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "degenloop/datapool.hpp"
#include "degenloop/errors.hpp"
#include "degenloop/io.hpp"
#include "degenloop/metrics.hpp"
#include "degenloop/numcore.hpp"
#include "degenloop/rng.hpp"

namespace degenloop {

enum class DatasetKind { gaussian_ring, procedural_flowers, external };
enum class ExternalFormat { pgm, csv };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::gaussian_ring: return "gaussian_ring";
    case DatasetKind::procedural_flowers: return "procedural_flowers";
    case DatasetKind::external: return "external";
  }
  return "?";
}

inline DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "gaussian_ring" || s == "ring") return DatasetKind::gaussian_ring;
  if (s == "procedural_flowers" || s == "flowers") return DatasetKind::procedural_flowers;
  if (s == "external") return DatasetKind::external;
  throw ConfigError("unknown dataset kind: " + s);
}

inline std::string to_string(ExternalFormat f) { return f == ExternalFormat::pgm ? "pgm" : "csv"; }

inline ExternalFormat parse_external_format(const std::string& s) {
  if (s == "pgm") return ExternalFormat::pgm;
  if (s == "csv") return ExternalFormat::csv;
  throw ConfigError("unsupported external format: " + s);
}

struct RingParams {
  std::size_t modes = 8;
  double radius = 5.0;
  double sigma = 0.3;
};

struct FlowerParams {
  std::size_t side = 8;
  std::vector<int> petal_counts{3, 4, 5, 6};
};

struct ExternalParams {
  std::string path;
  ExternalFormat format = ExternalFormat::csv;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::gaussian_ring;
  std::size_t size = 1024;
  std::uint64_t seed = 0;
  RingParams ring{};
  FlowerParams flowers{};
  ExternalParams external{};

  void validate() const {
    if (kind == DatasetKind::external) return;
    if (size < 2) throw ConfigError("DatasetSpec: size must be >= 2");
    if (kind == DatasetKind::gaussian_ring) {
      if (ring.modes < 1) throw ConfigError("DatasetSpec: ring needs at least one mode");
      if (!(ring.sigma > 0.0)) throw ConfigError("DatasetSpec: ring sigma must be > 0");
      if (!(ring.radius >= 0.0)) throw ConfigError("DatasetSpec: ring radius must be >= 0");
    } else {
      if (flowers.side != 8 && flowers.side != 16) throw ConfigError("DatasetSpec: image side must be 8 or 16");
      if (flowers.petal_counts.empty()) throw ConfigError("DatasetSpec: need at least one petal-count class");
      for (int p : flowers.petal_counts)
        if (p < 1) throw ConfigError("DatasetSpec: petal counts must be >= 1");
    }
  }

  bool is_image() const { return kind == DatasetKind::procedural_flowers; }
};

// ---------------------------------------------------------------------------
// Gaussian ring

inline Matrix ring_centers(const RingParams& p) {
  Matrix c(p.modes, 2);
  for (std::size_t m = 0; m < p.modes; ++m) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(p.modes);
    c(m, 0) = p.radius * std::cos(a);
    c(m, 1) = p.radius * std::sin(a);
  }
  return c;
}

// Index of the closest ring center to a 2-D point.
inline std::size_t nearest_ring_mode(const RingParams& p, std::span<const double> x) {
  const Matrix c = ring_centers(p);
  std::size_t best = 0;
  double best_d = detail::squared_distance(x, c.row(0));
  for (std::size_t m = 1; m < c.rows; ++m) {
    const double d = detail::squared_distance(x, c.row(m));
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

inline Matrix gaussian_ring_features(const DatasetSpec& spec) {
  spec.validate();
  const Matrix centers = ring_centers(spec.ring);
  Rng rng(spec.seed, "gaussian-ring");
  Matrix x(spec.size, 2);
  for (std::size_t i = 0; i < spec.size; ++i) {
    const std::size_t m = rng.below(spec.ring.modes);
    x(i, 0) = centers(m, 0) + spec.ring.sigma * rng.normal();
    x(i, 1) = centers(m, 1) + spec.ring.sigma * rng.normal();
  }
  return x;
}

inline DataPool generate_gaussian_ring(const DatasetSpec& spec) {
  return DataPool::from_real(gaussian_ring_features(spec));
}

// ---------------------------------------------------------------------------
// Procedural flowers

namespace detail {

inline double smoothstep_edge(double signed_dist, double softness) {
  return 1.0 / (1.0 + std::exp(-signed_dist / softness));
}

// One image with `petals` lobes; intensities in [0, 1].
inline std::vector<double> render_flower(std::size_t side, int petals, Rng& rng) {
  const double s = static_cast<double>(side);
  const double cx = (s - 1.0) / 2.0 + 0.04 * s * rng.normal();
  const double cy = (s - 1.0) / 2.0 + 0.04 * s * rng.normal();
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi / petals);
  const double radius = s * rng.uniform(0.36, 0.46);
  const double core = 0.13 * s;
  const double petal_level = rng.uniform(0.55, 0.85);
  const double softness = 0.06 * s;
  std::vector<double> img(side * side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double r = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      const double lobe = std::pow(std::abs(std::cos(0.5 * petals * (theta - phase))), 1.5);
      const double envelope = radius * (0.3 + 0.7 * lobe);
      double v = petal_level * smoothstep_edge(envelope - r, softness);
      v = std::max(v, smoothstep_edge(core - r, softness));
      v += 0.02 * rng.normal();
      img[y * side + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace detail

struct LabelledImages {
  Matrix features;  // in [-1, 1]
  std::vector<std::size_t> labels;  // index into petal_counts
};

inline LabelledImages render_flowers(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t side = spec.flowers.side;
  Rng rng(spec.seed, "procedural-flowers");
  LabelledImages out{Matrix(spec.size, side * side), std::vector<std::size_t>(spec.size)};
  for (std::size_t i = 0; i < spec.size; ++i) {
    const std::size_t c = rng.below(spec.flowers.petal_counts.size());
    out.labels[i] = c;
    const auto img = detail::render_flower(side, spec.flowers.petal_counts[c], rng);
    for (std::size_t k = 0; k < img.size(); ++k) out.features(i, k) = 2.0 * img[k] - 1.0;
  }
  return out;
}

inline DataPool generate_procedural_flowers(const DatasetSpec& spec) {
  return DataPool::from_real(render_flowers(spec).features);
}

// ---------------------------------------------------------------------------
// External data

namespace detail {

inline std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

}  // namespace detail

// `path` may be a single file or a directory; directory entries with the
// format's extension are read in lexicographic filename order.
inline Matrix load_external_features(const fs::path& path, ExternalFormat format) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    const std::string want = format == ExternalFormat::pgm ? ".pgm" : ".csv";
    for (const auto& e : fs::directory_iterator(path, ec))
      if (e.is_regular_file() && detail::lower_ext(e.path()) == want) files.push_back(e.path());
    if (ec) throw IoError("cannot list directory: " + path.string());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    throw IoError("no such file or directory: " + path.string());
  }
  if (files.empty()) throw ConfigError("load_external: empty pool, no " + to_string(format) + " files in " + path.string());

  std::vector<double> values;
  std::size_t rows = 0, dim = 0;
  bool have_dim = false;
  auto check_dim = [&](std::size_t d, const fs::path& f) {
    if (!have_dim) {
      dim = d;
      have_dim = true;
    } else if (d != dim) {
      throw DimensionError("load_external: " + f.string() + " has dimension " + std::to_string(d) + ", expected " +
                           std::to_string(dim));
    }
  };
  for (const auto& f : files) {
    if (format == ExternalFormat::csv) {
      const Matrix m = read_samples_csv(f);
      if (m.rows == 0) continue;
      check_dim(m.cols, f);
      values.insert(values.end(), m.data.begin(), m.data.end());
      rows += m.rows;
    } else {
      const auto feats = pgm_features(read_pgm(f));
      check_dim(feats.size(), f);
      values.insert(values.end(), feats.begin(), feats.end());
      ++rows;
    }
  }
  if (rows == 0) throw ConfigError("load_external: empty pool, no samples in " + path.string());
  return Matrix(rows, dim, std::move(values));
}

inline DataPool load_external(const fs::path& path, ExternalFormat format) {
  return DataPool::from_real(load_external_features(path, format));
}

// Writes each row as <dir>/<prefix><index>.pgm (zero-padded, so the
// directory order equals the row order).
inline void write_pgm_directory(const fs::path& dir, const Matrix& images, std::size_t side,
                                const std::string& prefix = "img_") {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.rows; ++i) {
    std::string idx = std::to_string(i);
    idx.insert(0, idx.size() < 6 ? 6 - idx.size() : 0, '0');
    write_pgm_features(dir / (prefix + idx + ".pgm"), images.row(i), side, side);
  }
}

// ---------------------------------------------------------------------------

inline Matrix generate_features(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::gaussian_ring: return gaussian_ring_features(spec);
    case DatasetKind::procedural_flowers: return render_flowers(spec).features;
    case DatasetKind::external: return load_external_features(spec.external.path, spec.external.format);
  }
  throw ConfigError("generate_features: unknown dataset kind");
}

inline DataPool generate_dataset(const DatasetSpec& spec) { return DataPool::from_real(generate_features(spec)); }

// Ground-truth modes for coverage scoring. Ring: the true means with the
// true sigma. Flowers: each class prototype is the mean of 256 rendered
// class members, and sigma is half the RMS distance of those members to
// their prototype (largest over classes). External data has no modes.
inline std::optional<ModeSet> dataset_modes(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::gaussian_ring) return ModeSet{ring_centers(spec.ring), spec.ring.sigma};
  if (spec.kind != DatasetKind::procedural_flowers) return std::nullopt;
  const std::size_t side = spec.flowers.side, d = side * side, per_class = 256;
  const auto& classes = spec.flowers.petal_counts;
  ModeSet ms{Matrix(classes.size(), d), 0.0};
  Rng rng(spec.seed, "flower-prototypes");
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::vector<double>> members;
    for (std::size_t i = 0; i < per_class; ++i) members.push_back(detail::render_flower(side, classes[c], rng));
    auto proto = ms.centers.row(c);
    for (const auto& m : members)
      for (std::size_t k = 0; k < d; ++k) proto[k] += (2.0 * m[k] - 1.0) / static_cast<double>(per_class);
    double ms2 = 0.0;
    for (const auto& m : members) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = 2.0 * m[k] - 1.0 - proto[k];
        s += diff * diff;
      }
      ms2 += s / static_cast<double>(per_class);
    }
    ms.sigma = std::max(ms.sigma, 0.5 * std::sqrt(ms2));
  }
  return ms;
}

}  // namespace degenloop
