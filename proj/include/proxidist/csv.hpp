#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "proxidist/common.hpp"

namespace proxidist {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    return -1;
  }
};

// RFC-4180 reader: quoted fields, escaped quotes, CRLF tolerant. Empty cell
// means missing.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_input("ingestion", "cannot open file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool record_started = false;
  auto push_field = [&]() {
    record.push_back(field);
    field.clear();
  };
  auto push_record = [&]() {
    push_field();
    if (table.header.empty()) {
      table.header = record;
    } else {
      table.rows.push_back(record);
    }
    record.clear();
    record_started = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        record_started = true;
        break;
      case ',':
        push_field();
        record_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (record_started || !field.empty() || !record.empty()) push_record();
        break;
      default:
        field.push_back(c);
        record_started = true;
        break;
    }
  }
  if (record_started || !field.empty() || !record.empty()) push_record();
  if (table.header.empty()) fail_input("ingestion", "empty file: " + path);
  for (auto& row : table.rows) row.resize(table.header.size());
  return table;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  for (int precision : {15, 16, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) fail_input("report", "cannot open output file: " + path);
  }

  void comment(const std::string& line) { out_ << "# " << line << "\n"; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_quote(cells[i]);
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace proxidist
