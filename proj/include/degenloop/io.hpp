#pragma once

// Sample files: CSV (header f0,f1,..., one sample per row, shortest
// round-trip decimal doubles) and binary PGM (P5).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "degenloop/errors.hpp"
#include "degenloop/numcore.hpp"

namespace degenloop {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string samples_csv_string(const Matrix& m) {
  std::string out;
  for (std::size_t j = 0; j < m.cols; ++j) {
    if (j) out += ',';
    out += 'f';
    out += std::to_string(j);
  }
  out += '\n';
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_samples_csv(const fs::path& path, const Matrix& m) { write_text_file(path, samples_csv_string(m)); }

inline Matrix read_samples_csv(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t cols = line.empty() ? 0 : static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  {
    std::size_t j = 0;
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ','))
      if (cell != "f" + std::to_string(j++)) throw IoError("bad CSV header (expected f0,f1,...): " + path.string());
  }
  std::vector<double> values;
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t n = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number");
      values.push_back(v);
      ++n;
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected ','");
      ++p;
    }
    if (n != cols)
      throw DimensionError(path.string() + ":" + std::to_string(line_no) + ": " + std::to_string(n) +
                           " fields, header has " + std::to_string(cols));
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

// ---------------------------------------------------------------------------
// PGM

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 255;
  std::vector<unsigned> pixels;  // row-major
};

// Features in [-1, 1] map to [0, maxval]; values outside are clamped.
inline unsigned quantize_feature(double v, unsigned maxval = 255) {
  const double unit = std::clamp((v + 1.0) * 0.5, 0.0, 1.0);
  return static_cast<unsigned>(std::lround(unit * maxval));
}

inline double dequantize_pixel(unsigned p, unsigned maxval) {
  return 2.0 * static_cast<double>(p) / static_cast<double>(maxval) - 1.0;
}

inline void write_pgm(const fs::path& path, const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height) throw DimensionError("write_pgm: pixel count mismatch");
  if (img.maxval == 0 || img.maxval > 65535) throw DomainError("write_pgm: maxval must be in [1, 65535]");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                    std::to_string(img.maxval) + "\n";
  for (unsigned p : img.pixels) {
    if (img.maxval > 255) out += static_cast<char>((p >> 8) & 0xff);
    out += static_cast<char>(p & 0xff);
  }
  write_text_file(path, out);
}

inline void write_pgm_features(const fs::path& path, std::span<const double> features, std::size_t width,
                               std::size_t height) {
  if (features.size() != width * height) throw DimensionError("write_pgm_features: feature count != width*height");
  GrayImage img{width, height, 255, {}};
  img.pixels.reserve(features.size());
  for (double v : features) img.pixels.push_back(quantize_feature(v));
  write_pgm(path, img);
}

inline GrayImage read_pgm(const fs::path& path) {
  const std::string data = read_text_file(path);
  std::size_t pos = 0;
  auto skip_ws_comments = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> unsigned long {
    skip_ws_comments();
    unsigned long v = 0;
    const auto res = std::from_chars(data.data() + pos, data.data() + data.size(), v);
    if (res.ec != std::errc()) throw IoError("malformed PGM header: " + path.string());
    pos = static_cast<std::size_t>(res.ptr - data.data());
    return v;
  };
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') throw IoError("not a binary PGM (P5): " + path.string());
  pos = 2;
  GrayImage img;
  img.width = read_uint();
  img.height = read_uint();
  const unsigned long maxval = read_uint();
  if (maxval == 0 || maxval > 65535) throw IoError("PGM maxval out of range: " + path.string());
  img.maxval = static_cast<unsigned>(maxval);
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw IoError("malformed PGM header: " + path.string());
  ++pos;
  const std::size_t bpp = img.maxval > 255 ? 2 : 1;
  const std::size_t n = img.width * img.height;
  if (data.size() - pos < n * bpp) throw IoError("truncated PGM raster: " + path.string());
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(data.data() + pos + i * bpp);
    img.pixels[i] = bpp == 2 ? (static_cast<unsigned>(b[0]) << 8 | b[1]) : b[0];
  }
  return img;
}

inline std::vector<double> pgm_features(const GrayImage& img) {
  std::vector<double> f;
  f.reserve(img.pixels.size());
  for (unsigned p : img.pixels) f.push_back(dequantize_pixel(p, img.maxval));
  return f;
}

// Tiles up to `max_tiles` square images (rows of `samples`) into one PGM with
// a one-pixel mid-gray gutter.
inline void write_image_grid(const fs::path& path, const Matrix& samples, std::size_t side, std::size_t max_tiles = 64) {
  if (samples.cols != side * side) throw DimensionError("write_image_grid: rows are not side*side images");
  const std::size_t tiles = std::min(max_tiles, samples.rows);
  if (tiles == 0) throw DomainError("write_image_grid: no samples");
  std::size_t per_row = 1;
  while (per_row * per_row < tiles) ++per_row;
  const std::size_t grid_rows = (tiles + per_row - 1) / per_row;
  const std::size_t w = per_row * (side + 1) + 1, h = grid_rows * (side + 1) + 1;
  GrayImage img{w, h, 255, std::vector<unsigned>(w * h, 128)};
  for (std::size_t t = 0; t < tiles; ++t) {
    const std::size_t ox = 1 + (t % per_row) * (side + 1), oy = 1 + (t / per_row) * (side + 1);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) img.pixels[(oy + y) * w + ox + x] = quantize_feature(samples(t, y * side + x));
  }
  write_pgm(path, img);
}

}  // namespace degenloop
