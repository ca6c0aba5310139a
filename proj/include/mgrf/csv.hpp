#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mgrf/error.hpp"

namespace mgrf {

// Shortest decimal form of x that parses back to exactly x.
inline std::string format_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline double parse_double(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  if (t.empty()) fail(errc::parse, where + ": empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    fail(errc::parse, where + ": not a number: '" + t + "'");
  return v;
}

inline long long parse_int(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  if (t.empty()) fail(errc::parse, where + ": empty integer field");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    fail(errc::parse, where + ": not an integer: '" + t + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Comma-separated table: one header row of column names, then numeric rows.
struct CsvTable {
  std::vector<std::string> header;  // lower-cased, trimmed
  std::vector<std::vector<double>> rows;

  std::size_t cols() const { return header.size(); }

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == lower(trim(name))) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      for (auto& f : fields) {
        const std::string name = lower(trim(f));
        if (name.empty()) fail(errc::parse, where + ": empty column name");
        table.header.push_back(name);
      }
      continue;
    }
    if (fields.size() != table.header.size())
      fail(errc::parse, where + ": expected " + std::to_string(table.header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = parse_double(fields[i], where);
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) fail(errc::parse, path + ": empty file");
  return table;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open '" + path + "' for writing");
  out << content;
  if (!out) fail(errc::io, "write failed on '" + path + "'");
}

}  // namespace mgrf
