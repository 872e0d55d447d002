#pragma once

// Small file helpers shared by every module: atomic writes, a minimal
// header-checked CSV reader and fixed-precision number formatting.

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "share/error.hpp"

namespace share::io {

/// Shortest text that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf, end);
}

/// %.{digits}g formatting.
inline std::string format_sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename to " + path.string() + " failed: " + ec.message());
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view field, const std::string& source, std::size_t line) {
  // from_chars rejects a leading '+', strtod does not; keep the stricter form.
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
    throw ParseError(source, line, "not a number: '" + std::string(field) + "'");
  return v;
}

/// Rows of a numeric CSV whose first line must equal `header` exactly.
/// Blank lines are skipped. Each row carries its 1-based source line.
struct CsvRow {
  std::size_t line;
  std::vector<double> values;
};

inline std::vector<CsvRow> parse_numeric_csv(std::string_view text, std::string_view header,
                                             const std::string& source) {
  std::vector<CsvRow> rows;
  const std::size_t width = split(header).size();
  std::size_t line_no = 0;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = trim(text.substr(pos, eol - pos));
    ++line_no;
    pos = eol + 1;
    if (line.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    if (!seen_header) {
      if (line != header)
        throw ParseError(source, line_no, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != width)
      throw ParseError(source, line_no,
                       "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    CsvRow row{line_no, {}};
    row.values.reserve(width);
    for (auto f : fields) row.values.push_back(parse_double(f, source, line_no));
    rows.push_back(std::move(row));
    if (eol == text.size()) break;
  }
  if (!seen_header) throw ParseError(source, 0, "missing header '" + std::string(header) + "'");
  return rows;
}

}  // namespace share::io
