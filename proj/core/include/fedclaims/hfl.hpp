#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedclaims/channel.hpp"
#include "fedclaims/data.hpp"
#include "fedclaims/metrics.hpp"
#include "fedclaims/nn.hpp"

namespace fedclaims {

enum class AggregationWeights : std::uint8_t { Equal = 0, SampleSize = 1 };
enum class TransportKind : std::uint8_t { Inproc = 0, Socket = 1 };

struct HflCollaboratorSpec {
  std::uint16_t id = 0;
  TabularDataset train;
  TabularDataset test;
  /// Base seed for minibatch shuffling; defaults to mix(plan seed, id).
  std::optional<std::uint64_t> shuffle_seed;
};

struct HflPlan {
  std::vector<HflCollaboratorSpec> collaborators;
  NetworkConfig network;
  std::uint32_t rounds = 1;
  std::uint32_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  AggregationWeights weights = AggregationWeights::Equal;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t collaborator_seed(std::size_t index) const;
};

struct CollabRoundMetrics {
  std::uint16_t id = 0;
  double global_train_mse = 0.0;  // aggregated model, before local training
  double global_train_pe = 0.0;
  double local_train_mse = 0.0;   // locally updated model, pre-aggregation
  double local_train_pe = 0.0;
};

struct RoundRecord {
  std::uint32_t round = 0;
  std::vector<CollabRoundMetrics> collaborators;
  std::uint64_t global_checksum = 0;  // hash of the aggregated flatten vector
};

struct HflResult {
  NetworkParams global;
  std::vector<RoundRecord> history;
};

/// One shuffled pass over the training set: seeded minibatch order,
/// MSE + SGD per batch. Deterministic in (params, data, shuffle_seed).
NetworkParams local_epoch(const NetworkParams& params, const TabularDataset& train,
                          std::size_t batch_size, double learning_rate,
                          std::uint64_t shuffle_seed);

/// Elementwise convex combination over the flatten representation,
/// accumulated in input order. Weights must sum to 1 within 1e-12.
NetworkParams aggregate(const std::vector<NetworkParams>& updates,
                        const std::vector<double>& weights);

/// R rounds of local training with the schedule the federated collaborator
/// uses (shuffle seed mix(base, round, epoch)); the "Local" baseline.
NetworkParams train_local(const NetworkParams& initial, const TabularDataset& train,
                          std::uint32_t rounds, std::uint32_t epochs_per_round,
                          std::size_t batch_size, double learning_rate,
                          std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// Federation roles. The aggregator sees channels and model architecture only;
// there is deliberately no dataset-typed parameter anywhere in its inputs.

struct AggregatorSettings {
  NetworkConfig network;
  std::uint32_t rounds = 1;
  AggregationWeights weights = AggregationWeights::Equal;
  std::uint16_t expected_collaborators = 1;
};

HflResult run_hfl_aggregator(const AggregatorSettings& settings,
                             const std::vector<ChannelEndpoint*>& channels);

struct HflCollaboratorConfig {
  std::uint16_t id = 0;
  TabularDataset train;
  TabularDataset test;
  NetworkConfig network;
  std::uint32_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t shuffle_seed = 0;
};

void run_hfl_collaborator(const HflCollaboratorConfig& config,
                          ChannelEndpoint& channel);

/// Runs the full federation in one process: one thread per collaborator plus
/// the aggregator, wired over in-process queues or loopback TCP sockets.
HflResult run_hfl(const HflPlan& plan,
                  TransportKind transport = TransportKind::Inproc);

}  // namespace fedclaims
