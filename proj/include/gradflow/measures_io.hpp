#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradflow/format.hpp"
#include "gradflow/measures.hpp"

// CSV layouts:
//   DiscreteMeasure: header `x,weight`, `x,y,weight` or `x,y,z,weight`
//   GridDensity1D:   header `cell_center,value`

namespace gradflow {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  return fields;
}

inline double parse_csv_double(const std::string& s, std::size_t row) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), "CSV row " + std::to_string(row) + ": not a number: '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const DiscreteMeasure& mu) {
  static const char* names[] = {"x", "y", "z"};
  detail::require(mu.dim() >= 1 && mu.dim() <= 3, "write_csv: measure dimension must be 1, 2 or 3");
  for (std::size_t d = 0; d < mu.dim(); ++d) os << names[d] << ',';
  os << "weight\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (double c : mu.atoms()[i]) os << format_double(c) << ',';
    os << format_double(mu.weights()[i]) << '\n';
  }
}

inline DiscreteMeasure read_discrete_measure_csv(std::istream& is) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(is, line)), "read_discrete_measure_csv: missing header");
  const auto header = detail::split_csv_line(line);
  const std::vector<std::vector<std::string>> accepted = {
      {"x", "weight"}, {"x", "y", "weight"}, {"x", "y", "z", "weight"}};
  bool ok = false;
  for (const auto& h : accepted) ok = ok || header == h;
  detail::require(ok, "read_discrete_measure_csv: header must be x[,y,z],weight");
  const std::size_t dim = header.size() - 1;

  std::vector<Point> atoms;
  std::vector<double> weights;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    detail::require(fields.size() == dim + 1, "CSV row " + std::to_string(row) + ": wrong field count");
    Point x(dim);
    for (std::size_t d = 0; d < dim; ++d) x[d] = detail::parse_csv_double(fields[d], row);
    atoms.push_back(std::move(x));
    weights.push_back(detail::parse_csv_double(fields[dim], row));
  }
  return DiscreteMeasure(std::move(atoms), std::move(weights));
}

inline void write_csv(std::ostream& os, const GridDensity1D& rho) {
  os << "cell_center,value\n";
  for (std::size_t i = 0; i < rho.cells(); ++i)
    os << format_double(rho.grid().center(i)) << ',' << format_double(rho[i]) << '\n';
}

/// Reads a density; the grid is reconstructed from the (uniform) cell centres.
inline GridDensity1D read_grid_density_csv(std::istream& is) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(is, line)), "read_grid_density_csv: missing header");
  detail::require(detail::split_csv_line(line) == std::vector<std::string>{"cell_center", "value"},
                  "read_grid_density_csv: header must be cell_center,value");
  std::vector<double> centers, values;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    detail::require(fields.size() == 2, "CSV row " + std::to_string(row) + ": wrong field count");
    centers.push_back(detail::parse_csv_double(fields[0], row));
    values.push_back(detail::parse_csv_double(fields[1], row));
  }
  detail::require(centers.size() >= 2, "read_grid_density_csv: need at least 2 cells");
  const std::size_t n = centers.size();
  const double h = (centers.back() - centers.front()) / static_cast<double>(n - 1);
  detail::require(h > 0.0, "read_grid_density_csv: cell centres must increase");
  for (std::size_t i = 0; i < n; ++i)
    detail::require(std::abs(centers[i] - (centers.front() + static_cast<double>(i) * h)) <= 1e-9 * (1.0 + std::abs(h)),
                    "read_grid_density_csv: cell centres are not uniformly spaced");
  const UniformGrid grid(centers.front() - 0.5 * h, centers.back() + 0.5 * h, n);
  return GridDensity1D(grid, std::move(values));
}

inline GridDensity1D read_grid_density_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), "cannot open '" + path + "'");
  return read_grid_density_csv(in);
}

}  // namespace gradflow
