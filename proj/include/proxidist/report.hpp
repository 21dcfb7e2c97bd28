#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "proxidist/common.hpp"
#include "proxidist/csv.hpp"

namespace proxidist {

using Json = nlohmann::json;

// Hash-relevant view of a config: the output location does not change what is
// computed, so byte-identical tables can land in different directories.
inline Json canonical_config(Json config) {
  config.erase("out");
  return config;
}

// FNV-1a over the canonical (key-sorted) JSON dump.
inline std::string config_hash(const Json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_json(const std::string& path, const Json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_input("report", "cannot open output file: " + path);
  out << value.dump(2) << "\n";
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_input("config", "cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail_config("config", std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return j;
}

// CSV table with a leading comment carrying units and the config hash.
inline void write_table(const std::string& path, const std::string& units,
                        const std::string& hash, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  CsvWriter out(path);
  out.comment("proxidist units=" + units + " config=" + hash);
  out.row(header);
  for (const auto& row : rows) out.row(row);
}

}  // namespace proxidist
