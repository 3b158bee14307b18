// Minimal deterministic CSV: comma separated, header row, LF line endings,
// C-locale decimal points, values printed round-trip exact.
#pragma once

#include <fstream>
#include <sstream>

#include "micromix/core.hpp"

namespace micromix {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const {
    std::ostringstream os;
    for (size_t i = 0; i < header.size(); ++i)
      os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
      for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
      os << '\n';
    }
    return os.str();
  }
};

inline void write_csv(const CsvTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << t.to_string();
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.empty()) continue;
    if (line.back() == ',') fields.push_back("");
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_csv(os.str());
}

}  // namespace micromix
