#include "fedclaims/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "fedclaims/error.hpp"

namespace fedclaims {

std::string to_string(Split split) {
  return split == Split::Train ? "train" : "test";
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Local: return "local";
    case Mode::Hfl: return "hfl";
    case Mode::Vfl: return "vfl";
  }
  return "local";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  fail(ErrorKind::Config, "unknown split '" + s + "'");
}

Mode mode_from_string(const std::string& s) {
  if (s == "local") return Mode::Local;
  if (s == "hfl") return Mode::Hfl;
  if (s == "vfl") return Mode::Vfl;
  fail(ErrorKind::Config, "unknown mode '" + s + "'");
}

double percentage_error(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) fail(ErrorKind::Input, "percentage_error: empty input");
  if (y.size() != yhat.size()) {
    fail(ErrorKind::Shape, "percentage_error: length mismatch");
  }
  double numer = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    numer += y[i] - yhat[i];
    denom += y[i];
  }
  if (denom == 0.0) {
    fail(ErrorKind::Input, "percentage_error: sum of actuals is zero");
  }
  return numer / denom;
}

double mean_squared_error(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) fail(ErrorKind::Input, "mean_squared_error: empty input");
  if (y.size() != yhat.size()) {
    fail(ErrorKind::Shape, "mean_squared_error: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

EvalRow evaluate(const NetworkParams& params, const TabularDataset& ds,
                 Split split, Mode mode, std::uint16_t collaborator,
                 std::size_t batch_size) {
  if (!ds.has_labels()) fail(ErrorKind::Input, "evaluate: dataset has no labels");
  const auto predictions = predict(params, ds.features, batch_size);
  EvalRow row;
  row.collaborator = collaborator;
  row.split = split;
  row.mode = mode;
  row.pe = percentage_error(*ds.labels, predictions);
  row.mse = mean_squared_error(*ds.labels, predictions);
  row.n = ds.n();
  return row;
}

namespace {

std::string format_pe(double pe) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", pe);
  return buf;
}

using ReportKey = std::pair<std::uint16_t, Split>;

std::map<ReportKey, EvalRow> index_rows(const std::vector<EvalRow>& rows,
                                        const char* which) {
  std::map<ReportKey, EvalRow> index;
  for (const auto& row : rows) {
    const ReportKey key{row.collaborator, row.split};
    if (!index.emplace(key, row).second) {
      fail(ErrorKind::Report, std::string("report: duplicate ") + which +
                                  " row for collaborator " +
                                  std::to_string(row.collaborator) + " " +
                                  to_string(row.split));
    }
  }
  return index;
}

}  // namespace

std::string comparison_report(const std::vector<EvalRow>& local_rows,
                              const std::vector<EvalRow>& federated_rows) {
  const auto local = index_rows(local_rows, "local");
  const auto fed = index_rows(federated_rows, "federated");

  std::vector<std::string> missing;
  for (const auto& [key, row] : fed) {
    if (!local.count(key)) {
      missing.push_back("local " + std::to_string(key.first) + "/" +
                        to_string(key.second));
    }
  }
  for (const auto& [key, row] : local) {
    if (!fed.count(key)) {
      missing.push_back("federated " + std::to_string(key.first) + "/" +
                        to_string(key.second));
    }
  }
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) {
      if (!joined.empty()) joined += ", ";
      joined += m;
    }
    fail(ErrorKind::Report, "report: missing rows: " + joined);
  }
  if (local.empty()) fail(ErrorKind::Report, "report: no rows");

  std::ostringstream out;
  out << "Collaborator     Split  Mode   PE\n";
  out << "---------------------------------------\n";
  std::uint16_t last_collab = 0;
  bool first = true;
  for (const auto& [key, local_row] : local) {
    const auto& fed_row = fed.at(key);
    const std::string fed_mode = to_string(fed_row.mode) == "hfl" ? "HFL" : "VFL";
    const bool fed_better = std::abs(fed_row.pe) < std::abs(local_row.pe);
    const bool local_better = std::abs(local_row.pe) < std::abs(fed_row.pe);

    std::string collab_cell;
    if (first || key.first != last_collab) {
      collab_cell = "Collaborator " + std::to_string(key.first);
    }
    first = false;
    last_collab = key.first;

    char line[128];
    std::snprintf(line, sizeof(line), "%-16s %-6s %-6s %6s%s\n",
                  collab_cell.c_str(),
                  key.second == Split::Train ? "Train" : "Test", "Local",
                  format_pe(local_row.pe).c_str(), local_better ? " *" : "");
    out << line;
    std::snprintf(line, sizeof(line), "%-16s %-6s %-6s %6s%s\n", "", "",
                  fed_mode.c_str(), format_pe(fed_row.pe).c_str(),
                  fed_better ? " *" : "");
    out << line;
  }
  return out.str();
}

}  // namespace fedclaims
