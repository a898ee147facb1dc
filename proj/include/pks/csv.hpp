/// \file csv.hpp
/// Deterministic CSV assembly: comma separator, '.' decimal point, one header
/// row, '#'-prefixed metadata lines, '\n' line endings, doubles printed with
/// %.17g so identical runs produce byte-identical files.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pks {

inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvFile {
 public:
  void meta(const std::string& line) { text_ += "# " + line + "\n"; }

  void header(std::initializer_list<const char*> names) {
    append_cells_(std::vector<std::string>(names.begin(), names.end()));
  }

  void row(const std::vector<std::string>& cells) { append_cells_(cells); }

  const std::string& str() const { return text_; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("csv: cannot write '" + path.string() + "'");
    }
    out << text_;
  }

 private:
  void append_cells_(const std::vector<std::string>& cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) text_ += ',';
      text_ += c;
      first = false;
    }
    text_ += '\n';
  }

  std::string text_;
};

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << content;
}

}  // namespace pks
