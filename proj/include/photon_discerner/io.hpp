#pragma once

// Plain file formats: RFC-4180 CSV, binary PGM (8 or 16 bit), and the text
// normal-map format read by the scene renderer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "errors.hpp"

namespace pdisc::io {

/// Shortest round-trippable decimal form ("%.17g" trimmed), '.' decimal point.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  for (int prec = 12; prec <= 17; ++prec) {
    std::snprintf(buf.data(), buf.size(), "%.*g", prec, v);
    if (std::strtod(buf.data(), nullptr) == v) break;
  }
  return buf.data();
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Accumulates CSV text; every row must have as many cells as the header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { append(header); }

  template <class... Cells>
  void add(const Cells&... cells) {
    append({cell(cells)...});
  }
  void add_row(const std::vector<std::string>& cells) { append(cells); }

  [[nodiscard]] const std::string& str() const { return text_; }
  [[nodiscard]] std::size_t rows() const { return rows_; }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  template <class T>
  static std::string cell(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      static_assert(std::is_integral_v<T>, "CSV cells are strings or numbers");
      return std::to_string(v);
    }
  }

  void append(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw ConfigError("CSV row has the wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_escape(cells[i]);
    }
    text_ += "\r\n";
    ++rows_;
  }
  std::size_t columns_;
  std::string text_;
  std::size_t rows_ = 0;
};

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("failed writing '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

/// Binary PGM (P5) bytes for values in [0, 1] (clamped), row-major, 8 or 16 bits.
inline std::string pgm_bytes(int width, int height, const std::vector<double>& values, int bits = 8) {
  if (bits != 8 && bits != 16) throw ConfigError("PGM depth must be 8 or 16 bits");
  if (width < 1 || height < 1 || values.size() != static_cast<std::size_t>(width) * height)
    throw ConfigError("PGM dimensions do not match the data");
  const int maxval = bits == 8 ? 255 : 65535;
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" + std::to_string(maxval) + "\n";
  for (double v : values) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    const auto q = static_cast<std::uint32_t>(std::lround(c * maxval));
    if (bits == 16) out += static_cast<char>((q >> 8) & 0xff);
    out += static_cast<char>(q & 0xff);
  }
  return out;
}

struct PgmImage {
  int width = 0, height = 0, maxval = 0;
  std::vector<double> values;  // scaled back to [0, 1]
};

inline PgmImage parse_pgm(std::string_view bytes) {
  std::istringstream is{std::string(bytes)};
  std::string magic;
  PgmImage img;
  is >> magic >> img.width >> img.height >> img.maxval;
  if (magic != "P5" || img.width < 1 || img.height < 1 || (img.maxval != 255 && img.maxval != 65535))
    throw ConfigError("not a binary PGM with maxval 255 or 65535");
  is.get();
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t v = static_cast<unsigned char>(is.get());
    if (img.maxval == 65535) v = (v << 8) | static_cast<unsigned char>(is.get());
    if (!is) throw ConfigError("truncated PGM data");
    img.values[i] = static_cast<double>(v) / img.maxval;
  }
  return img;
}

/// Normal map: a header line "width height" then width*height lines "nx ny nz",
/// row-major from the top-left pixel. Lines starting with '#' are comments.
struct NormalMap {
  int width = 0, height = 0;
  std::vector<std::array<double, 3>> normals;
};

inline NormalMap parse_normal_map(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  auto next_line = [&](std::string& out) {
    while (std::getline(is, out)) {
      const auto p = out.find_first_not_of(" \t\r");
      if (p == std::string::npos || out[p] == '#') continue;
      return true;
    }
    return false;
  };
  NormalMap m;
  if (!next_line(line)) throw ConfigError("normal map is empty");
  {
    std::istringstream h(line);
    if (!(h >> m.width >> m.height) || m.width < 1 || m.height < 1)
      throw ConfigError("normal map header must be 'width height'");
  }
  const std::size_t n = static_cast<std::size_t>(m.width) * m.height;
  m.normals.reserve(n);
  while (m.normals.size() < n && next_line(line)) {
    std::istringstream r(line);
    std::array<double, 3> v{};
    if (!(r >> v[0] >> v[1] >> v[2])) throw ConfigError("normal map row must hold three numbers: '" + line + "'");
    m.normals.push_back(v);
  }
  if (m.normals.size() != n)
    throw ConfigError("normal map has " + std::to_string(m.normals.size()) + " rows, expected " + std::to_string(n));
  return m;
}

}  // namespace pdisc::io
