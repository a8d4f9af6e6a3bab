#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "spatrpm/block_grid.hpp"

namespace spatrpm {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE) {
    throw InputError("row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + text + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw InputError("row " + std::to_string(row) + ", column '" + column +
                     "': non-finite value '" + text + "'");
  }
  return value;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Row numbers in messages count the header as row 1.
Table read_table(std::istream& in, const std::vector<std::string>& leading, bool want_y) {
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV input is empty");
  table.header = split_row(line);
  for (std::size_t i = 0; i < leading.size(); ++i) {
    if (table.header.size() <= i || table.header[i] != leading[i]) {
      throw InputError("missing column '" + leading[i] + "' (expected as column " +
                       std::to_string(i + 1) + ")");
    }
  }
  const std::size_t min_cols = leading.size() + 1 + (want_y ? 1 : 0);
  if (want_y && (table.header.size() < min_cols || table.header.back() != "y")) {
    throw InputError("missing column 'y' (expected as the last column)");
  }
  if (table.header.size() < min_cols) {
    throw InputError("missing covariate column: need at least one covariate after s_h,s_v");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_row(line);
    if (fields.size() != table.header.size()) {
      throw InputError("row " + std::to_string(row) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      values[c] = parse_number(fields[c], row, table.header[c]);
    }
    const Location s{values[0], values[1]};
    if (!in_unit_square(s)) {
      throw InputError("row " + std::to_string(row) + ": location outside [0,1]^2");
    }
    table.rows.push_back(std::move(values));
  }
  if (table.rows.empty()) throw InputError("CSV input has no data rows");
  return table;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  const Table table = read_table(in, {"s_h", "s_v"}, true);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(table.header.size() - 3);
  Dataset data;
  data.covariate_names.assign(table.header.begin() + 2, table.header.end() - 1);
  data.locations.reserve(table.rows.size());
  data.covariates.resize(n, d);
  data.responses.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[i];
    data.locations.push_back({r[0], r[1]});
    for (Eigen::Index j = 0; j < d; ++j) data.covariates(i, j) = r[2 + j];
    data.responses[i] = r.back();
  }
  validate(data);
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  auto in = open_input(path);
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "s_h,s_v";
  for (int j = 0; j < data.dim(); ++j) {
    if (static_cast<std::size_t>(j) < data.covariate_names.size()) {
      out << ',' << data.covariate_names[j];
    } else {
      out << ",x" << (j + 1);
    }
  }
  out << ",y\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << data.locations[i].h << ',' << data.locations[i].v;
    for (int j = 0; j < data.dim(); ++j) out << ',' << data.covariates(row, j);
    out << ',' << data.responses[row] << '\n';
  }
}

PointSet read_points_csv(std::istream& in) {
  const Table table = read_table(in, {"s_h", "s_v"}, false);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(table.header.size() - 2);
  PointSet points;
  points.covariates.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[i];
    points.locations.push_back({r[0], r[1]});
    for (Eigen::Index j = 0; j < d; ++j) points.covariates(i, j) = r[2 + j];
  }
  return points;
}

PointSet read_points_csv(const std::string& path) {
  auto in = open_input(path);
  return read_points_csv(in);
}

}  // namespace spatrpm
