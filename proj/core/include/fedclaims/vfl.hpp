#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedclaims/channel.hpp"
#include "fedclaims/data.hpp"
#include "fedclaims/hfl.hpp"
#include "fedclaims/metrics.hpp"
#include "fedclaims/nn.hpp"

namespace fedclaims {

/// Head segments per worker plus the tail at the label holder. A worker with
/// no features (pure label holder) has no head; tail input width must equal
/// the sum of head embedding widths, concatenated in ascending worker id.
struct SplitArchitecture {
  std::vector<std::optional<NetworkConfig>> head_configs;  // parallel to workers
  NetworkConfig tail_config;

  std::size_t embedding_total() const;
  void validate() const;
};

struct VflWorkerSpec {
  std::uint16_t id = 0;
  TabularDataset train;
  TabularDataset test;
  bool is_label_holder = false;
};

struct VflPlan {
  std::vector<VflWorkerSpec> workers;  // ascending id; exactly one label holder
  SplitArchitecture architecture;
  std::uint32_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  /// When set, every role records its segment's flatten vector after each
  /// training step; run_vfl zips them into VflResult::param_trail.
  bool record_param_trail = false;

  void validate() const;
  std::size_t label_holder_index() const;
};

/// Feature-worker view of a dataset: entities and features, structurally no
/// label member. The feature-worker role accepts only this type.
struct FeatureView {
  std::vector<std::uint64_t> entity_ids;
  Matrix features;

  std::size_t n() const { return entity_ids.size(); }
  std::size_t p() const { return features.cols; }
};

FeatureView feature_view(const TabularDataset& ds);

struct HeadForwardResult {
  Matrix activations;  // b x e
  ForwardTrace trace;
};

/// Forward through a head segment only.
HeadForwardResult head_forward(const NetworkParams& head, const Matrix& batch);

struct TailStepResult {
  NetworkParams tail;                  // updated
  std::vector<Matrix> gradient_blocks; // dLoss/dBlock, per input block
  double loss = 0.0;
};

/// Concatenates activation blocks (caller supplies them in ascending worker
/// id order), forwards through the tail, computes MSE, updates the tail by
/// one SGD step, and splits dLoss/dConcat back into per-block gradients.
TailStepResult tail_step(const NetworkParams& tail,
                         const std::vector<Matrix>& activation_blocks,
                         std::span<const double> labels, double learning_rate);

/// Completes the chain rule through a head segment and applies its SGD step.
NetworkParams head_backward(const NetworkParams& head, const ForwardTrace& trace,
                            const Matrix& gradient_block, double learning_rate);

struct VflEpochRecord {
  std::uint32_t epoch = 0;
  double mean_batch_loss = 0.0;
};

/// Per-step snapshot of every model segment (flatten order), heads in
/// ascending worker id then tail.
struct VflStepSnapshot {
  std::vector<std::vector<double>> heads;
  std::vector<double> tail;
};

struct VflResult {
  std::vector<std::optional<NetworkParams>> heads;  // parallel to plan workers
  NetworkParams tail;
  std::vector<VflEpochRecord> history;
  std::vector<EvalRow> eval;  // label holder's train/test rows, mode vfl
  std::vector<VflStepSnapshot> param_trail;
};

// ---------------------------------------------------------------------------
// Roles.

struct FeatureWorkerConfig {
  std::uint16_t id = 0;
  FeatureView train;
  FeatureView test;
  NetworkConfig head;
  std::uint32_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t plan_seed = 0;
  bool record_param_trail = false;
};

struct FeatureWorkerResult {
  NetworkParams head;
  std::vector<std::vector<double>> param_trail;
};

FeatureWorkerResult run_vfl_feature_worker(const FeatureWorkerConfig& config,
                                           ChannelEndpoint& channel);

struct LabelWorkerConfig {
  std::uint16_t id = 0;
  TabularDataset train;  // labeled
  TabularDataset test;   // labeled
  std::optional<NetworkConfig> head;  // absent for a pure label holder
  NetworkConfig tail;
  /// Feature workers the label holder serves, ascending id with their
  /// embedding widths; must match the channel order.
  std::vector<std::pair<std::uint16_t, std::size_t>> feature_workers;
  std::uint32_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t plan_seed = 0;
  bool record_param_trail = false;
};

struct LabelWorkerResult {
  std::optional<NetworkParams> head;
  NetworkParams tail;
  std::vector<VflEpochRecord> history;
  std::vector<EvalRow> eval;
  std::vector<std::vector<double>> head_trail;
  std::vector<std::vector<double>> tail_trail;
};

LabelWorkerResult run_vfl_label_worker(const LabelWorkerConfig& config,
                                       const std::vector<ChannelEndpoint*>& channels);

/// Full split training in one process (threads + chosen transport).
VflResult run_vfl(const VflPlan& plan,
                  TransportKind transport = TransportKind::Inproc);

}  // namespace fedclaims
