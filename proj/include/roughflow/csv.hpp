#pragma once

#include <string>
#include <vector>

namespace roughflow::csv {

/// 17 significant digits, enough for a bit-exact decimal round trip.
std::string format(double value);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read(const std::string& file);
void write(const std::string& file, const Table& table);
std::string to_string(const Table& table);

}  // namespace roughflow::csv
