#include "emsm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emsm {

std::size_t Dataset::n_treated() const {
  return static_cast<std::size_t>(std::count(t.begin(), t.end(), 1));
}

std::size_t Dataset::n_control() const {
  return static_cast<std::size_t>(std::count(t.begin(), t.end(), 0));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column,
                  const std::string& origin) {
  if (cell.empty())
    throw std::runtime_error(origin + ": missing value at row " + std::to_string(row) +
                             ", column '" + column + "'");
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw std::runtime_error(origin + ": non-numeric cell '" + cell + "' at row " +
                             std::to_string(row) + ", column '" + column + "'");
  return value;
}

}  // namespace

Dataset ingest_csv_text(const std::string& text, const ColumnRoles& roles,
                        const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw std::runtime_error(origin + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);

  auto col_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error(origin + ": column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t yi = col_index(roles.outcome);
  const std::size_t ti = col_index(roles.treatment);
  std::vector<std::string> cov_names = roles.covariates;
  if (cov_names.empty()) {
    for (const auto& h : header)
      if (h != roles.outcome && h != roles.treatment) cov_names.push_back(h);
  }
  std::vector<std::size_t> ci;
  ci.reserve(cov_names.size());
  for (const auto& name : cov_names) ci.push_back(col_index(name));

  std::vector<double> ys;
  std::vector<int> ts;
  std::vector<std::vector<double>> xs;
  std::size_t row = 1;
  while (std::getline(ss, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error(origin + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    ys.push_back(parse_cell(cells[yi], row, roles.outcome, origin));
    const double tv = parse_cell(cells[ti], row, roles.treatment, origin);
    if (tv != 0.0 && tv != 1.0)
      throw std::runtime_error(origin + ": treatment value " + cells[ti] + " at row " +
                               std::to_string(row) + " is not 0/1");
    ts.push_back(static_cast<int>(tv));
    std::vector<double> xrow(ci.size());
    for (std::size_t j = 0; j < ci.size(); ++j)
      xrow[j] = parse_cell(cells[ci[j]], row, cov_names[j], origin);
    xs.push_back(std::move(xrow));
  }
  if (ys.empty()) throw std::runtime_error(origin + ": no data rows");

  Dataset d;
  d.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.t = std::move(ts);
  d.x.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ci.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ci.size(); ++j)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
  d.covariate_names = std::move(cov_names);
  return d;
}

Dataset ingest_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_csv: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ingest_csv_text(buf.str(), roles, path);
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
  out << "y,t";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << data.y(static_cast<Eigen::Index>(i)) << ',' << data.t[i];
    for (Eigen::Index j = 0; j < data.x.cols(); ++j)
      out << ',' << data.x(static_cast<Eigen::Index>(i), j);
    out << '\n';
  }
}

}  // namespace emsm
