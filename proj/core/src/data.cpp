#include "fedclaims/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <unordered_set>

#include "fedclaims/error.hpp"
#include "fedclaims/rng.hpp"

namespace fedclaims {

void TabularDataset::validate() const {
  if (features.rows != n() || features.cols != p()) {
    fail(ErrorKind::Shape, "dataset: feature matrix is " +
                               std::to_string(features.rows) + "x" +
                               std::to_string(features.cols) + ", expected " +
                               std::to_string(n()) + "x" + std::to_string(p()));
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entity_ids.size());
  for (std::uint64_t id : entity_ids) {
    if (!seen.insert(id).second) {
      fail(ErrorKind::Config, "dataset: duplicate entity_id " + std::to_string(id));
    }
  }
  if (labels) {
    if (labels->size() != n()) {
      fail(ErrorKind::Shape, "dataset: label count != row count");
    }
    for (double s : *labels) {
      if (!(s >= 0.0)) fail(ErrorKind::Input, "dataset: negative or NaN label");
    }
  }
}

void TweedieParams::validate(std::size_t p) const {
  if (!(base_frequency > 0.0)) {
    fail(ErrorKind::Config, "tweedie: base_frequency must be > 0");
  }
  if (!(severity_shape > 0.0)) {
    fail(ErrorKind::Config, "tweedie: severity_shape must be > 0");
  }
  if (!(severity_scale > 0.0)) {
    fail(ErrorKind::Config, "tweedie: severity_scale must be > 0");
  }
  if (frequency_coefficients.size() != p) {
    fail(ErrorKind::Config,
         "tweedie: need " + std::to_string(p) + " frequency coefficients, got " +
             std::to_string(frequency_coefficients.size()));
  }
}

void PartitionSpec::validate(const std::vector<std::string>& feature_names) const {
  if (kind == PartitionKind::Horizontal) {
    if (fractions.empty()) {
      fail(ErrorKind::Config, "partition: no horizontal fractions");
    }
    double sum = 0.0;
    for (double f : fractions) {
      if (!(f > 0.0) || f > 1.0) {
        fail(ErrorKind::Config, "partition: fractions must lie in (0,1]");
      }
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      fail(ErrorKind::Config, "partition: fractions sum to " + std::to_string(sum) +
                                  ", expected 1");
    }
    return;
  }
  if (feature_subsets.empty()) {
    fail(ErrorKind::Config, "partition: no vertical feature subsets");
  }
  if (label_holder >= feature_subsets.size()) {
    fail(ErrorKind::Config, "partition: label_holder index out of range");
  }
  std::set<std::string> all(feature_names.begin(), feature_names.end());
  std::set<std::string> seen;
  for (const auto& subset : feature_subsets) {
    for (const auto& name : subset) {
      if (!all.count(name)) {
        fail(ErrorKind::Config, "partition: unknown feature '" + name + "'");
      }
      if (!seen.insert(name).second) {
        fail(ErrorKind::Config, "partition: feature '" + name +
                                    "' appears in more than one subset");
      }
    }
  }
  if (seen.size() != all.size()) {
    for (const auto& name : feature_names) {
      if (!seen.count(name)) {
        fail(ErrorKind::Config, "partition: feature '" + name + "' not covered");
      }
    }
  }
}

TabularDataset generate_tweedie(std::size_t n, std::size_t p,
                                const TweedieParams& params) {
  if (p < 1) fail(ErrorKind::Config, "generate: p must be >= 1");
  params.validate(p);

  TabularDataset ds;
  ds.feature_names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    ds.feature_names.push_back("f" + std::to_string(j + 1));
  }
  ds.features = Matrix(n, p);
  ds.entity_ids.resize(n);
  if (n == 0) return ds;  // empty dataset: no labels drawn

  ds.labels.emplace(n, 0.0);
  Xoshiro256 rng(params.seed);
  for (std::size_t i = 0; i < n; ++i) {
    ds.entity_ids[i] = static_cast<std::uint64_t>(i);
    double link = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double x = rng.normal();
      ds.features(i, j) = x;
      link += params.frequency_coefficients[j] * x;
    }
    double lambda = params.base_frequency * std::exp(link);
    if (lambda > kLambdaClamp) lambda = kLambdaClamp;
    const std::uint32_t claims = rng.poisson(lambda);
    double total = 0.0;
    for (std::uint32_t c = 0; c < claims; ++c) {
      total += rng.gamma(params.severity_shape, params.severity_scale);
    }
    (*ds.labels)[i] = total;
  }
  return ds;
}

namespace {

TabularDataset take_rows(const TabularDataset& ds,
                         const std::vector<std::size_t>& rows) {
  TabularDataset out;
  out.feature_names = ds.feature_names;
  out.entity_ids.reserve(rows.size());
  out.features = Matrix(rows.size(), ds.p());
  if (ds.labels) out.labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    out.entity_ids.push_back(ds.entity_ids[r]);
    for (std::size_t j = 0; j < ds.p(); ++j) {
      out.features(i, j) = ds.features(r, j);
    }
    if (ds.labels) out.labels->push_back((*ds.labels)[r]);
  }
  return out;
}

}  // namespace

std::vector<TabularDataset> horizontal_split(const TabularDataset& ds,
                                             const PartitionSpec& spec,
                                             std::uint64_t seed) {
  if (spec.kind != PartitionKind::Horizontal) {
    fail(ErrorKind::Config, "horizontal_split: spec kind is not horizontal");
  }
  spec.validate(ds.feature_names);

  const auto order = shuffled_indices(ds.n(), seed);

  // Cumulative rounding keeps the piece sizes exact and covering.
  std::vector<std::size_t> boundaries;
  boundaries.reserve(spec.fractions.size());
  double cumulative = 0.0;
  for (double f : spec.fractions) {
    cumulative += f;
    auto edge = static_cast<std::size_t>(
        std::llround(cumulative * static_cast<double>(ds.n())));
    boundaries.push_back(std::min(edge, ds.n()));
  }
  boundaries.back() = ds.n();

  std::vector<TabularDataset> parts;
  parts.reserve(spec.fractions.size());
  std::size_t start = 0;
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    std::vector<std::size_t> rows(order.begin() + start,
                                  order.begin() + boundaries[k]);
    parts.push_back(take_rows(ds, rows));
    start = boundaries[k];
  }
  return parts;
}

std::vector<TabularDataset> vertical_split(const TabularDataset& ds,
                                           const PartitionSpec& spec) {
  if (spec.kind != PartitionKind::Vertical) {
    fail(ErrorKind::Config, "vertical_split: spec kind is not vertical");
  }
  spec.validate(ds.feature_names);

  std::vector<TabularDataset> parts;
  parts.reserve(spec.feature_subsets.size());
  for (std::size_t k = 0; k < spec.feature_subsets.size(); ++k) {
    const auto& subset = spec.feature_subsets[k];
    std::vector<std::size_t> cols;
    cols.reserve(subset.size());
    for (const auto& name : subset) {
      const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
      cols.push_back(static_cast<std::size_t>(it - ds.feature_names.begin()));
    }
    TabularDataset part;
    part.entity_ids = ds.entity_ids;
    part.feature_names = subset;
    part.features = Matrix(ds.n(), cols.size());
    for (std::size_t i = 0; i < ds.n(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        part.features(i, j) = ds.features(i, cols[j]);
      }
    }
    if (k == spec.label_holder && ds.labels) part.labels = ds.labels;
    parts.push_back(std::move(part));
  }
  return parts;
}

StandardizationStats standardization_stats(const TabularDataset& train) {
  StandardizationStats stats;
  const std::size_t n = train.n();
  const std::size_t p = train.p();
  stats.mean.assign(p, 0.0);
  stats.stddev.assign(p, 0.0);
  if (n == 0) return stats;
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += train.features(i, j);
    const double mean = acc / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = train.features(i, j) - mean;
      var += d * d;
    }
    stats.mean[j] = mean;
    stats.stddev[j] = std::sqrt(var / static_cast<double>(n));
  }
  return stats;
}

TabularDataset apply_standardization(const TabularDataset& ds,
                                     const StandardizationStats& stats) {
  if (stats.mean.size() != ds.p() || stats.stddev.size() != ds.p()) {
    fail(ErrorKind::Config, "standardize: stats width != dataset width");
  }
  TabularDataset out = ds;
  for (std::size_t j = 0; j < ds.p(); ++j) {
    const double mu = stats.mean[j];
    const double sigma = stats.stddev[j];
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double centered = out.features(i, j) - mu;
      out.features(i, j) = sigma == 0.0 ? centered : centered / sigma;
    }
  }
  return out;
}

StandardizationStats standardize(TabularDataset& train,
                                 std::vector<TabularDataset*> others) {
  for (const TabularDataset* other : others) {
    if (other->feature_names != train.feature_names) {
      fail(ErrorKind::Config, "standardize: feature-name mismatch with train set");
    }
  }
  const StandardizationStats stats = standardization_stats(train);
  train = apply_standardization(train, stats);
  for (TabularDataset* other : others) {
    *other = apply_standardization(*other, stats);
  }
  return stats;
}

}  // namespace fedclaims
