#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedclaims/config.hpp"
#include "fedclaims/metrics.hpp"
#include "fedclaims/vfl.hpp"

namespace fedclaims {

/// One party's prepared datasets. Horizontal partitions label every party;
/// vertical partitions label only the holder.
struct PartyData {
  std::uint16_t id = 0;
  TabularDataset train;
  TabularDataset test;
  bool is_label_holder = false;
};

/// Deterministic generate/load + train-test split + per-party
/// standardization. Every process that runs prepare_data on the same config
/// sees byte-identical datasets.
std::vector<PartyData> prepare_data(const ExperimentConfig& config);

/// Full network used by local and HFL modes.
NetworkConfig full_network_config(const ExperimentConfig& config, std::size_t p);

/// Split architecture for VFL mode, heads in worker order.
SplitArchitecture vfl_architecture(const ExperimentConfig& config,
                                   const std::vector<PartyData>& parties);

/// The label holder's standalone baseline: its slice of the split network
/// (head + tail) trained as one monolithic net on its own features.
NetworkConfig holder_local_network_config(const ExperimentConfig& config,
                                          std::size_t holder_p);

/// generate: writes per-party train/test CSVs plus manifest.json.
void cmd_generate(const ExperimentConfig& config);

/// run: trains in the given mode, writes history/eval logs and model files.
void cmd_run(const ExperimentConfig& config, Mode mode);

/// report: renders local-vs-federated comparison tables from eval logs.
std::string cmd_report(const std::vector<std::string>& eval_log_paths);

struct ServeOptions {
  std::string role;  // aggregator | collaborator | label-worker | feature-worker
  std::uint16_t id = 0;
  std::string port_file;  // listener writes host:port here; dialers poll it
};

/// serve: runs one protocol role as a standalone process over sockets.
void cmd_serve(const ExperimentConfig& config, const ServeOptions& options);

/// Reads "eval" rows back from a history/eval JSONL file.
std::vector<EvalRow> read_eval_rows(const std::string& path);

}  // namespace fedclaims
