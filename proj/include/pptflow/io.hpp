#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pptflow/error.hpp"

namespace pptflow {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file and renames it over the target, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kArtifact, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::kArtifact, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::kArtifact, "cannot move output into place at " + path.string());
  }
}

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

/// Minimal comma-separated table: one header row, no quoting.
class CsvTable {
 public:
  static CsvTable parse(std::string_view text, const std::string& source) {
    CsvTable t;
    t.source_ = source;
    std::size_t line_no = 0;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      auto cells = split(line);
      if (t.header_.empty()) {
        for (std::size_t i = 0; i < cells.size(); ++i) t.index_[cells[i]] = i;
        t.header_ = std::move(cells);
        continue;
      }
      if (cells.size() != t.header_.size()) {
        fail(ErrorKind::kSchema, source + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header_.size()) +
                                     " fields, found " + std::to_string(cells.size()));
      }
      t.lines_.push_back(line_no);
      t.rows_.push_back(std::move(cells));
    }
    if (t.header_.empty()) fail(ErrorKind::kSchema, source + ": missing header row");
    return t;
  }

  static CsvTable load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  bool has(const std::string& column) const { return index_.contains(column); }

  std::size_t column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::kSchema, source_ + ": missing required column '" + name + "'");
    return it->second;
  }

  const std::string& text(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }

  double number(std::size_t row, std::size_t col) const {
    const std::string& s = text(row, col);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(ErrorKind::kSchema, source_ + ":" + std::to_string(lines_[row]) + ": column '" + header_[col] +
                                   "' is not a number: '" + s + "'");
    }
    return v;
  }

  long integer(std::size_t row, std::size_t col) const {
    const double v = number(row, col);
    if (v != static_cast<double>(static_cast<long>(v))) {
      fail(ErrorKind::kSchema, source_ + ":" + std::to_string(lines_[row]) + ": column '" + header_[col] +
                                   "' must be an integer");
    }
    return static_cast<long>(v);
  }

 private:
  static std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      out.emplace_back(b == std::string_view::npos ? std::string_view{} : cell.substr(b, e - b + 1));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  }

  std::string source_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

}  // namespace pptflow
