#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "l1reg/errors.hpp"

namespace l1reg {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest round-trip representation of a double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  std::string t = s;
  t.erase(0, t.find_first_not_of(" \t\r\n"));
  t.erase(t.find_last_not_of(" \t\r\n") + 1);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw IoError("not a number: '" + s + "'");
  }
  return v;
}

/// Grayscale image in [0, 1], column-major with x(i + rows*j) = pixel(row i, col j).
struct GrayImage {
  int rows = 0;
  int cols = 0;
  Eigen::VectorXd pixels;
};

namespace detail {
inline std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}
}  // namespace detail

/// Reads a P2 or P5 graymap, scaling samples by 1/maxval.
inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = detail::next_token(in);
  if (magic != "P5" && magic != "P2") throw IoError(path.string() + ": not a P2/P5 graymap");
  GrayImage img;
  int maxval = 0;
  try {
    img.cols = std::stoi(detail::next_token(in));
    img.rows = std::stoi(detail::next_token(in));
    maxval = std::stoi(detail::next_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed header");
  }
  if (img.rows <= 0 || img.cols <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError(path.string() + ": bad header values");
  }
  const std::size_t count = static_cast<std::size_t>(img.rows) * img.cols;
  std::vector<int> raw(count);
  if (magic == "P5") {
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> buf(count * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw IoError(path.string() + ": truncated data");
    for (std::size_t i = 0; i < count; ++i) {
      raw[i] = bytes == 1 ? buf[i] : (buf[2 * i] << 8) | buf[2 * i + 1];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = detail::next_token(in);
      if (tok.empty()) throw IoError(path.string() + ": truncated data");
      raw[i] = std::stoi(tok);
    }
  }
  // File order is row-major.
  img.pixels.resize(static_cast<Eigen::Index>(count));
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c)
      img.pixels(r + static_cast<Eigen::Index>(img.rows) * c) =
          static_cast<double>(raw[static_cast<std::size_t>(r) * img.cols + c]) / maxval;
  return img;
}

/// Writes an 8-bit P5 graymap; values are clamped to [0, 1].
inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  require_same_size(img.pixels.size(), static_cast<long>(img.rows) * img.cols, "write_pgm");
  std::vector<unsigned char> buf(img.pixels.size());
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) {
      const double v = std::clamp(img.pixels(r + static_cast<Eigen::Index>(img.rows) * c), 0.0, 1.0);
      buf[static_cast<std::size_t>(r) * img.cols + c] = static_cast<unsigned char>(std::lround(255.0 * v));
    }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Sub-window of a column-major image.
inline GrayImage crop(const GrayImage& img, int row0, int col0, int rows, int cols) {
  if (row0 < 0 || col0 < 0 || rows <= 0 || cols <= 0 || row0 + rows > img.rows || col0 + cols > img.cols) {
    throw DomainError("crop: window outside the image");
  }
  GrayImage out{rows, cols, Eigen::VectorXd(static_cast<Eigen::Index>(rows) * cols)};
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r)
      out.pixels(r + static_cast<Eigen::Index>(rows) * c) =
          img.pixels(row0 + r + static_cast<Eigen::Index>(img.rows) * (col0 + c));
  return out;
}

/// Single-column numeric CSV; blank lines and lines starting with '#' are skipped,
/// as is a non-numeric first line.
inline Eigen::VectorXd read_vector_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> vals;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    const std::string cell = line.substr(0, line.find(','));
    try {
      vals.push_back(parse_double(cell));
    } catch (const IoError&) {
      if (!first) throw IoError(path.string() + ": bad value '" + cell + "'");
    }
    first = false;
  }
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

/// Writes `text` to `path` through a temporary file and a rename.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v,
                             const std::string& header = "value") {
  std::ostringstream os;
  os << header << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << format_double(v(i)) << '\n';
  write_text_atomic(path, os.str());
}

}  // namespace l1reg
