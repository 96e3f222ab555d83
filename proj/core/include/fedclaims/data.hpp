#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedclaims/matrix.hpp"

namespace fedclaims {

/// Entity-keyed feature matrix with optional aggregate-loss labels.
struct TabularDataset {
  std::vector<std::uint64_t> entity_ids;       // unique, length n
  Matrix features;                             // n x p
  std::vector<std::string> feature_names;      // length p
  std::optional<std::vector<double>> labels;   // length n when present, >= 0

  std::size_t n() const { return entity_ids.size(); }
  std::size_t p() const { return feature_names.size(); }
  bool has_labels() const { return labels.has_value(); }

  void validate() const;
  bool operator==(const TabularDataset& other) const = default;
};

/// Compound Poisson-Gamma generator parameters. Per row: features are iid
/// standard normal, claim count ~ Poisson(lambda0 * exp(beta . x)), each
/// claim severity ~ Gamma(shape, scale), label = summed severities.
struct TweedieParams {
  double base_frequency = 0.1;               // lambda0
  std::vector<double> frequency_coefficients;  // log-link loadings, length p
  double severity_shape = 2.0;               // k
  double severity_scale = 100.0;             // theta, currency units
  std::uint64_t seed = 0;

  void validate(std::size_t p) const;
};

enum class PartitionKind { Horizontal, Vertical };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::Horizontal;
  // Horizontal: row fractions per collaborator, in (0,1], summing to 1.
  std::vector<double> fractions;
  // Vertical: disjoint feature-name subsets covering all features, plus the
  // index of the single label-holding collaborator.
  std::vector<std::vector<std::string>> feature_subsets;
  std::size_t label_holder = 0;

  void validate(const std::vector<std::string>& feature_names) const;
};

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population sigma; 0 marks a constant column
};

// lambda is clamped here before the Poisson draw; extreme beta.x would
// otherwise produce pathological claim counts.
inline constexpr double kLambdaClamp = 1e3;

TabularDataset generate_tweedie(std::size_t n, std::size_t p,
                                const TweedieParams& params);

/// Shuffles rows by seed, then assigns contiguous runs by fraction. Outputs
/// are disjoint and cover the input; every output keeps all features+labels.
std::vector<TabularDataset> horizontal_split(const TabularDataset& ds,
                                             const PartitionSpec& spec,
                                             std::uint64_t seed);

/// Column partition: every output keeps all n rows in identical entity order;
/// labels go only to the designated holder. Shared entity order is what keeps
/// split-training batches synchronized across workers.
std::vector<TabularDataset> vertical_split(const TabularDataset& ds,
                                           const PartitionSpec& spec);

/// Per-column mean and population sigma of the training set.
StandardizationStats standardization_stats(const TabularDataset& train);

/// (x - mu) / sigma per column; constant columns are centered only.
TabularDataset apply_standardization(const TabularDataset& ds,
                                     const StandardizationStats& stats);

/// Standardizes train and every other dataset using train-set stats only.
/// All datasets must share train's feature names.
StandardizationStats standardize(TabularDataset& train,
                                 std::vector<TabularDataset*> others);

/// CSV: header `entity_id,<f1>,...,<fp>[,loss]`, UTF-8, '.' decimal,
/// doubles at 17 significant digits.
TabularDataset load_csv(const std::string& path);
void save_csv(const TabularDataset& ds, const std::string& path);

}  // namespace fedclaims
