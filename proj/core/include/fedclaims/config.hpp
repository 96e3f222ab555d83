#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedclaims/data.hpp"
#include "fedclaims/hfl.hpp"
#include "fedclaims/nn.hpp"

namespace fedclaims {

// Experiment configuration, parsed from a JSON file. Schema and a complete
// annotated example per mode live in docs/config.md.

struct DataSection {
  std::string source = "generate";  // "generate" | "dir"
  std::string dir;                  // CSV directory when source == "dir"
  std::size_t n = 10000;
  std::size_t p = 10;
  double base_frequency = 0.5;
  std::vector<double> frequency_coefficients;  // empty -> all zeros
  double severity_shape = 2.0;
  double severity_scale = 100.0;
  double train_fraction = 0.8;
  bool standardize = true;
};

struct VflModelSection {
  std::vector<std::size_t> head_hidden = {16};
  std::size_t embedding_width = 8;
  std::vector<std::size_t> tail_hidden = {8};
};

struct ModelSection {
  std::vector<std::size_t> hidden = {16, 8};
  std::vector<Activation> activations;  // per hidden layer; empty -> all relu
  VflModelSection vfl;
};

struct TrainingSection {
  std::uint32_t rounds = 30;  // hfl rounds / vfl epochs / local epochs
  std::uint32_t local_epochs = 1;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  AggregationWeights aggregation = AggregationWeights::Equal;
};

struct TransportSection {
  TransportKind kind = TransportKind::Inproc;
  std::string address = "127.0.0.1:0";  // socket transport only
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataSection data;
  PartitionSpec partition;
  ModelSection model;
  TrainingSection training;
  TransportSection transport;
  std::string output_dir = "out";

  std::size_t party_count() const;
  /// Full consistency check; every subcommand runs this before side effects.
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);

/// Feature names the generator will produce for width p ("f1".."fp").
std::vector<std::string> generated_feature_names(std::size_t p);

}  // namespace fedclaims
