#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedclaims/data.hpp"
#include "fedclaims/nn.hpp"

namespace fedclaims {

enum class Split : std::uint8_t { Train = 0, Test = 1 };
enum class Mode : std::uint8_t { Local = 0, Hfl = 1, Vfl = 2 };

std::string to_string(Split split);
std::string to_string(Mode mode);
Split split_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);

/// One evaluation result; (collaborator, split, mode) is unique per report.
struct EvalRow {
  std::uint16_t collaborator = 0;
  Split split = Split::Train;
  Mode mode = Mode::Local;
  double pe = 0.0;
  double mse = 0.0;
  std::size_t n = 0;

  bool operator==(const EvalRow& other) const = default;
};

/// Portfolio-level Percentage Error: sum(y - yhat) / sum(y).
/// Signed; under-prediction of the portfolio total comes out positive.
/// Errors when sum(y) == 0 rather than fabricating a value.
double percentage_error(std::span<const double> y, std::span<const double> yhat);

double mean_squared_error(std::span<const double> y, std::span<const double> yhat);

/// Full-dataset batched forward pass; PE and MSE on the labels.
EvalRow evaluate(const NetworkParams& params, const TabularDataset& ds,
                 Split split, Mode mode, std::uint16_t collaborator,
                 std::size_t batch_size = 256);

/// Local-vs-federated table in the shape used by the experiment reports:
/// one block per (collaborator, split), PE at two decimals, and the entry
/// with the smaller |PE| flagged with '*' (ties flag neither).
std::string comparison_report(const std::vector<EvalRow>& local_rows,
                              const std::vector<EvalRow>& federated_rows);

}  // namespace fedclaims
