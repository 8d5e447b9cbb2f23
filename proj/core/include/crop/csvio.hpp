#pragma once

#include <string>
#include <vector>

namespace crop {

// Shortest decimal form that parses back to the exact same double
// (std::to_chars); keeps CSV round-trips lossless and byte-stable.
std::string format_double(double v);
std::string format_float(float v);
double parse_double(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace crop
