#pragma once

#include "core.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gwb {

/// Writes `data` to `path` via a sibling temp file and rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& data) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::io, "cannot open " + tmp.string());
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    f.flush();
    if (!f) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, "rename to " + path.string() + " failed: " + ec.message());
}

/// Twelve significant digits; negative zero prints as 0.
inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string& v) { return v; }
inline std::string fmt(const char* v) { return v; }

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Comma-separated table with a leading `# key=value ...` metadata line and a header row.
class CsvTable {
 public:
  CsvTable(Metadata meta, std::vector<std::string> header) : meta_(std::move(meta)), header_(std::move(header)) {}

  template <class... Ts>
  void row(const Ts&... cells) {
    std::vector<std::string> r{fmt(cells)...};
    if (r.size() != header_.size()) throw Error(ErrorKind::shape_mismatch, "CSV row width differs from header");
    rows_.push_back(std::move(r));
  }
  void row_strings(std::vector<std::string> r) {
    if (r.size() != header_.size()) throw Error(ErrorKind::shape_mismatch, "CSV row width differs from header");
    rows_.push_back(std::move(r));
  }

  std::string str() const {
    std::ostringstream os;
    os << "#";
    for (const auto& [k, v] : meta_) os << ' ' << k << '=' << v;
    os << '\n';
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  void save(const std::filesystem::path& path) const { write_atomic(path, str()); }
  size_t size() const { return rows_.size(); }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }

  Metadata meta_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

namespace detail {

inline void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& s, double d) {
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof d);
  std::memcpy(&bits, &d, sizeof d);
  put_u64(s, bits);
}

inline std::uint64_t get_u64(const std::string& s, size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}

}  // namespace detail

/// "WDMX", u64 rows, u64 cols, then row-major (re, im) float64 pairs, all little-endian.
inline std::string encode_wdmx(const Mat& A) {
  std::string s = "WDMX";
  s.reserve(20 + 16 * static_cast<size_t>(A.size()));
  detail::put_u64(s, static_cast<std::uint64_t>(A.rows()));
  detail::put_u64(s, static_cast<std::uint64_t>(A.cols()));
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      detail::put_f64(s, A(i, j).real());
      detail::put_f64(s, A(i, j).imag());
    }
  return s;
}

inline Mat decode_wdmx(const std::string& s) {
  if (s.size() < 20 || s.compare(0, 4, "WDMX") != 0) throw Error(ErrorKind::io, "not a WDMX stream");
  std::uint64_t rows = detail::get_u64(s, 4), cols = detail::get_u64(s, 12);
  if (s.size() != 20 + 16 * rows * cols) throw Error(ErrorKind::io, "WDMX payload size mismatch");
  Mat A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  size_t at = 20;
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j) {
      std::uint64_t re = detail::get_u64(s, at), im = detail::get_u64(s, at + 8);
      double r, m;
      std::memcpy(&r, &re, 8);
      std::memcpy(&m, &im, 8);
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cplx(r, m);
      at += 16;
    }
  return A;
}

inline void save_wdmx(const std::filesystem::path& path, const Mat& A) { write_atomic(path, encode_wdmx(A)); }

inline Mat load_wdmx(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_wdmx(ss.str());
}

}  // namespace gwb
