#include "roughflow/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "roughflow/types.hpp"

namespace roughflow::csv {

std::string format(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

}  // namespace

Table read(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open " + file);
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw InputError(file + ": empty file");
  table.header = split(line);
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size())
      throw InputError(file + ": row " + std::to_string(row_no) + " has the wrong column count");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0' || errno == ERANGE)
        throw InputError(file + ": bad number '" + c + "' on row " + std::to_string(row_no));
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string to_string(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += table.header[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format(row[i]);
    }
    out += '\n';
  }
  return out;
}

void write(const std::string& file, const Table& table) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file);
  out << to_string(table);
}

}  // namespace roughflow::csv
