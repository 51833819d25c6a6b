#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fosr/errors.hpp"

namespace fosr {

// Minimal CSV layer for the numeric files this project reads and writes.
// Fields never contain commas or quotes, so a plain split suffices.

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF && !rows.empty()) break;
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.empty()) fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw ValidationError("empty file: " + path);
  return rows;
}

inline std::string trim(const std::string& s) {
  const char* ws = " \t";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Empty cells and the NA token mark missing curve values.
inline bool is_missing_token(const std::string& raw) {
  std::string s = trim(raw);
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

inline double parse_double(const std::string& raw, const std::string& context) {
  std::string s = trim(raw);
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("non-numeric value '" + raw + "' in " + context);
  }
}

// Full round-trip precision for doubles.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace fosr
