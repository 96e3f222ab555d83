#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedclaims/data.hpp"
#include "fedclaims/error.hpp"

namespace fedclaims {

namespace {

constexpr const char* kLabelColumn = "loss";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, std::size_t row,
                    const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorKind::Ingest, "csv: unparsable value '" + cell + "' at row " +
                                std::to_string(row) + ", column '" + column + "'");
  }
  return value;
}

}  // namespace

TabularDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Ingest, "csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Ingest, "csv: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_line(line);
  if (header.empty() || header[0] != "entity_id") {
    fail(ErrorKind::Ingest, "csv: first column must be 'entity_id' in '" + path + "'");
  }
  const bool has_labels = header.size() > 1 && header.back() == kLabelColumn;
  const std::size_t p = header.size() - 1 - (has_labels ? 1 : 0);

  TabularDataset ds;
  ds.feature_names.assign(header.begin() + 1, header.end() - (has_labels ? 1 : 0));
  if (has_labels) ds.labels.emplace();

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::Ingest, "csv: row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    }
    std::uint64_t id = 0;
    {
      const char* begin = cells[0].data();
      const char* end = begin + cells[0].size();
      auto [ptr, ec] = std::from_chars(begin, end, id);
      if (ec != std::errc{} || ptr != end) {
        fail(ErrorKind::Ingest, "csv: unparsable entity_id '" + cells[0] +
                                    "' at row " + std::to_string(row));
      }
    }
    ds.entity_ids.push_back(id);
    for (std::size_t j = 0; j < p; ++j) {
      values.push_back(parse_double(cells[1 + j], row, header[1 + j]));
    }
    if (has_labels) {
      ds.labels->push_back(parse_double(cells.back(), row, kLabelColumn));
    }
  }

  ds.features.rows = ds.entity_ids.size();
  ds.features.cols = p;
  ds.features.data = std::move(values);
  ds.validate();  // surfaces duplicate entity ids and label problems
  return ds;
}

void save_csv(const TabularDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Ingest, "csv: cannot write '" + path + "'");

  out << "entity_id";
  for (const auto& name : ds.feature_names) out << ',' << name;
  if (ds.has_labels()) out << ',' << kLabelColumn;
  out << '\n';

  char buf[64];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << ds.entity_ids[i];
    for (std::size_t j = 0; j < ds.p(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
      out << ',' << buf;
    }
    if (ds.has_labels()) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*ds.labels)[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::Ingest, "csv: write failed for '" + path + "'");
}

}  // namespace fedclaims
