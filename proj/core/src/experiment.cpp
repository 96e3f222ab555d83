#include "fedclaims/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fedclaims/error.hpp"
#include "fedclaims/model_io.hpp"
#include "fedclaims/rng.hpp"
#include "fedclaims/seeds.hpp"

namespace fedclaims {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TweedieParams tweedie_from(const ExperimentConfig& config) {
  TweedieParams params;
  params.base_frequency = config.data.base_frequency;
  params.frequency_coefficients = config.data.frequency_coefficients;
  if (params.frequency_coefficients.empty()) {
    params.frequency_coefficients.assign(config.data.p, 0.0);
  }
  params.severity_shape = config.data.severity_shape;
  params.severity_scale = config.data.severity_scale;
  params.seed = seed_mix(config.seed, kSeedData);
  return params;
}

std::string party_prefix(const ExperimentConfig& config, std::uint16_t id) {
  return (config.partition.kind == PartitionKind::Horizontal ? "collab" : "worker") +
         std::to_string(id) + "_";
}

PartitionSpec train_test_spec(double train_fraction) {
  PartitionSpec spec;
  spec.kind = PartitionKind::Horizontal;
  spec.fractions = {train_fraction, 1.0 - train_fraction};
  return spec;
}

/// Parties before standardization; shared by generate (writes these raw)
/// and run/serve (standardizes them first).
std::vector<PartyData> raw_parties(const ExperimentConfig& config) {
  std::vector<PartyData> parties;
  if (config.data.source == "generate") {
    const TabularDataset full =
        generate_tweedie(config.data.n, config.data.p, tweedie_from(config));
    if (config.partition.kind == PartitionKind::Horizontal) {
      const auto parts = horizontal_split(full, config.partition,
                                          seed_mix(config.seed, kSeedPartition));
      for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto tt =
            horizontal_split(parts[k], train_test_spec(config.data.train_fraction),
                             seed_mix(config.seed, kSeedTrainTest, k));
        parties.push_back({static_cast<std::uint16_t>(k), tt[0], tt[1], true});
      }
    } else {
      const auto tt =
          horizontal_split(full, train_test_spec(config.data.train_fraction),
                           seed_mix(config.seed, kSeedTrainTest, 0));
      const auto train_parts = vertical_split(tt[0], config.partition);
      const auto test_parts = vertical_split(tt[1], config.partition);
      for (std::size_t k = 0; k < train_parts.size(); ++k) {
        parties.push_back({static_cast<std::uint16_t>(k), train_parts[k],
                           test_parts[k], k == config.partition.label_holder});
      }
    }
    return parties;
  }

  // CSV ingestion by the naming convention cmd_generate writes.
  for (std::size_t k = 0; k < config.party_count(); ++k) {
    const std::string prefix =
        (fs::path(config.data.dir) /
         party_prefix(config, static_cast<std::uint16_t>(k)))
            .string();
    PartyData party;
    party.id = static_cast<std::uint16_t>(k);
    party.train = load_csv(prefix + "train.csv");
    party.test = load_csv(prefix + "test.csv");
    party.is_label_holder = config.partition.kind == PartitionKind::Horizontal
                                ? true
                                : k == config.partition.label_holder;
    if (party.is_label_holder &&
        (!party.train.has_labels() || !party.test.has_labels())) {
      fail(ErrorKind::Ingest, "data: files for party " + std::to_string(k) +
                                  " are missing the loss column");
    }
    parties.push_back(std::move(party));
  }
  return parties;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Ingest, "cannot write '" + path + "'");
  for (const auto& line : lines) out << line << '\n';
  if (!out) fail(ErrorKind::Ingest, "write failed for '" + path + "'");
}

json eval_row_json(const EvalRow& row) {
  return json{{"kind", "eval"},
              {"collaborator", row.collaborator},
              {"split", to_string(row.split)},
              {"mode", to_string(row.mode)},
              {"pe", row.pe},
              {"mse", row.mse},
              {"n", row.n}};
}

std::vector<std::string> hfl_history_lines(const std::vector<RoundRecord>& history) {
  std::vector<std::string> lines;
  lines.reserve(history.size());
  for (const auto& record : history) {
    json collaborators = json::array();
    for (const auto& m : record.collaborators) {
      collaborators.push_back(json{{"id", m.id},
                                   {"global_train_mse", m.global_train_mse},
                                   {"global_train_pe", m.global_train_pe},
                                   {"local_train_mse", m.local_train_mse},
                                   {"local_train_pe", m.local_train_pe}});
    }
    lines.push_back(json{{"kind", "hfl_round"},
                         {"round", record.round},
                         {"collaborators", collaborators},
                         {"global_checksum", hex64(record.global_checksum)}}
                        .dump());
  }
  return lines;
}

std::vector<std::string> vfl_history_lines(const std::vector<VflEpochRecord>& history) {
  std::vector<std::string> lines;
  lines.reserve(history.size());
  for (const auto& record : history) {
    lines.push_back(json{{"kind", "vfl_epoch"},
                         {"epoch", record.epoch},
                         {"mean_batch_loss", record.mean_batch_loss}}
                        .dump());
  }
  return lines;
}

/// Wall-clock side channel; never part of determinism-checked artifacts.
void write_run_info(const std::string& dir, const std::string& what,
                    std::chrono::steady_clock::time_point started) {
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  const auto wall = std::chrono::system_clock::now();
  std::ofstream out(fs::path(dir) / "run_info.log", std::ios::app);
  out << what << " finished_unix_ms="
      << std::chrono::duration_cast<std::chrono::milliseconds>(
             wall.time_since_epoch())
             .count()
      << " elapsed_ms=" << elapsed.count() << '\n';
}

std::vector<Activation> hidden_acts(const ModelSection& model) {
  if (!model.activations.empty()) return model.activations;
  return std::vector<Activation>(model.hidden.size(), Activation::Relu);
}

struct LocalTrainOutput {
  NetworkParams params;
  std::vector<std::string> history_lines;
};

/// Local baseline with the federated collaborator's exact schedule:
/// shuffle seed mix(base, round, epoch) per pass.
LocalTrainOutput run_local_training(const ExperimentConfig& config,
                                    const NetworkConfig& net,
                                    const PartyData& party) {
  LocalTrainOutput out;
  out.params = init_network(net);
  const std::uint64_t base = seed_mix(config.seed, kSeedCollab, party.id);
  for (std::uint32_t t = 1; t <= config.training.rounds; ++t) {
    for (std::uint32_t e = 1; e <= config.training.local_epochs; ++e) {
      out.params = local_epoch(out.params, party.train, config.training.batch_size,
                               config.training.learning_rate, seed_mix(base, t, e));
    }
    const EvalRow row =
        evaluate(out.params, party.train, Split::Train, Mode::Local, party.id);
    out.history_lines.push_back(json{{"kind", "local_round"},
                                     {"collaborator", party.id},
                                     {"round", t},
                                     {"train_mse", row.mse},
                                     {"train_pe", row.pe}}
                                    .dump());
  }
  return out;
}

std::string resolve_address(const ExperimentConfig& config,
                            const ServeOptions& options) {
  if (options.port_file.empty()) return config.transport.address;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(15);
  for (;;) {
    {
      std::ifstream in(options.port_file);
      std::string address;
      if (in && std::getline(in, address) && !address.empty()) return address;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(ErrorKind::Channel,
           "serve: port file '" + options.port_file + "' never appeared");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace

std::vector<PartyData> prepare_data(const ExperimentConfig& config) {
  auto parties = raw_parties(config);
  if (config.data.standardize) {
    for (auto& party : parties) {
      std::vector<TabularDataset*> others{&party.test};
      standardize(party.train, others);
    }
  }
  return parties;
}

NetworkConfig full_network_config(const ExperimentConfig& config, std::size_t p) {
  NetworkConfig net;
  net.layer_sizes.push_back(p);
  for (std::size_t w : config.model.hidden) net.layer_sizes.push_back(w);
  net.layer_sizes.push_back(1);
  net.hidden_activations = hidden_acts(config.model);
  net.seed = seed_mix(config.seed, kSeedNetwork);
  return net;
}

SplitArchitecture vfl_architecture(const ExperimentConfig& config,
                                   const std::vector<PartyData>& parties) {
  SplitArchitecture arch;
  arch.head_configs.resize(parties.size());
  for (std::size_t k = 0; k < parties.size(); ++k) {
    const std::size_t p = parties[k].train.p();
    if (p == 0) continue;
    NetworkConfig head;
    head.layer_sizes.push_back(p);
    for (std::size_t w : config.model.vfl.head_hidden) head.layer_sizes.push_back(w);
    head.layer_sizes.push_back(config.model.vfl.embedding_width);
    head.hidden_activations.assign(config.model.vfl.head_hidden.size(),
                                   Activation::Relu);
    head.seed = seed_mix(config.seed, kSeedHead, parties[k].id);
    arch.head_configs[k] = std::move(head);
  }
  std::size_t total = 0;
  for (const auto& head : arch.head_configs) {
    if (head) total += head->output_width();
  }
  arch.tail_config.layer_sizes.push_back(total);
  for (std::size_t w : config.model.vfl.tail_hidden) {
    arch.tail_config.layer_sizes.push_back(w);
  }
  arch.tail_config.layer_sizes.push_back(1);
  arch.tail_config.hidden_activations.assign(config.model.vfl.tail_hidden.size(),
                                             Activation::Relu);
  arch.tail_config.seed = seed_mix(config.seed, kSeedTail);
  return arch;
}

NetworkConfig holder_local_network_config(const ExperimentConfig& config,
                                          std::size_t holder_p) {
  // The holder's slice of the split network as one monolithic net: head
  // layers, identity activation at the embedding boundary, tail layers.
  NetworkConfig net;
  net.layer_sizes.push_back(holder_p);
  for (std::size_t w : config.model.vfl.head_hidden) net.layer_sizes.push_back(w);
  net.layer_sizes.push_back(config.model.vfl.embedding_width);
  for (std::size_t w : config.model.vfl.tail_hidden) net.layer_sizes.push_back(w);
  net.layer_sizes.push_back(1);
  net.hidden_activations.assign(config.model.vfl.head_hidden.size(), Activation::Relu);
  net.hidden_activations.push_back(Activation::Identity);
  net.hidden_activations.insert(net.hidden_activations.end(),
                                config.model.vfl.tail_hidden.size(), Activation::Relu);
  net.seed = seed_mix(config.seed, kSeedNetwork);
  return net;
}

void cmd_generate(const ExperimentConfig& config) {
  config.validate();
  if (config.data.source != "generate") {
    fail(ErrorKind::Config, "generate: config data.source must be 'generate'");
  }
  fs::create_directories(config.output_dir);

  const auto parties = raw_parties(config);
  json manifest;
  manifest["seed"] = config.seed;
  manifest["n"] = config.data.n;
  manifest["p"] = config.data.p;
  manifest["partition"] =
      config.partition.kind == PartitionKind::Horizontal ? "horizontal" : "vertical";
  json files = json::array();
  for (const auto& party : parties) {
    for (const auto& [ds, suffix] :
         {std::pair{&party.train, "train"}, std::pair{&party.test, "test"}}) {
      const std::string name = party_prefix(config, party.id) + suffix + ".csv";
      const std::string path = (fs::path(config.output_dir) / name).string();
      save_csv(*ds, path);
      std::ifstream in(path, std::ios::binary);
      const std::string bytes((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
      files.push_back(json{{"path", name},
                           {"rows", ds->n()},
                           {"checksum", hex64(fnv1a64(bytes.data(), bytes.size()))}});
    }
  }
  manifest["files"] = files;
  std::ofstream out(fs::path(config.output_dir) / "manifest.json");
  if (!out) fail(ErrorKind::Ingest, "generate: cannot write manifest");
  out << manifest.dump(2) << '\n';
}

void cmd_run(const ExperimentConfig& config, Mode mode) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  const auto parties = prepare_data(config);
  const fs::path out_dir(config.output_dir);

  if (mode == Mode::Local) {
    std::vector<std::string> history;
    std::vector<std::string> eval_lines;
    if (config.partition.kind == PartitionKind::Horizontal) {
      const NetworkConfig net = full_network_config(config, parties.front().train.p());
      for (const auto& party : parties) {
        LocalTrainOutput trained = run_local_training(config, net, party);
        history.insert(history.end(), trained.history_lines.begin(),
                       trained.history_lines.end());
        save_model(trained.params, net,
                   (out_dir / ("local_collab" + std::to_string(party.id) + ".model"))
                       .string());
        for (const Split split : {Split::Train, Split::Test}) {
          const auto& ds = split == Split::Train ? party.train : party.test;
          eval_lines.push_back(
              eval_row_json(evaluate(trained.params, ds, split, Mode::Local, party.id))
                  .dump());
        }
      }
    } else {
      // Vertical data: only the label holder can train a standalone model.
      const auto holder = std::find_if(parties.begin(), parties.end(),
                                       [](const PartyData& p) { return p.is_label_holder; });
      const NetworkConfig net =
          holder_local_network_config(config, holder->train.p());
      LocalTrainOutput trained = run_local_training(config, net, *holder);
      history = std::move(trained.history_lines);
      save_model(trained.params, net,
                 (out_dir / ("local_worker" + std::to_string(holder->id) + ".model"))
                     .string());
      for (const Split split : {Split::Train, Split::Test}) {
        const auto& ds = split == Split::Train ? holder->train : holder->test;
        eval_lines.push_back(
            eval_row_json(evaluate(trained.params, ds, split, Mode::Local, holder->id))
                .dump());
      }
    }
    write_lines((out_dir / "local_history.jsonl").string(), history);
    write_lines((out_dir / "local_eval.jsonl").string(), eval_lines);
    write_run_info(config.output_dir, "local", started);
    return;
  }

  if (mode == Mode::Hfl) {
    if (config.partition.kind != PartitionKind::Horizontal) {
      fail(ErrorKind::Config, "run: hfl mode needs a horizontal partition");
    }
    HflPlan plan;
    for (const auto& party : parties) {
      plan.collaborators.push_back({party.id, party.train, party.test, std::nullopt});
    }
    plan.network = full_network_config(config, parties.front().train.p());
    plan.rounds = config.training.rounds;
    plan.local_epochs = config.training.local_epochs;
    plan.batch_size = config.training.batch_size;
    plan.learning_rate = config.training.learning_rate;
    plan.weights = config.training.aggregation;
    plan.seed = config.seed;

    const HflResult result = run_hfl(plan, config.transport.kind);
    write_lines((out_dir / "hfl_history.jsonl").string(),
                hfl_history_lines(result.history));
    save_model(result.global, plan.network, (out_dir / "hfl_global.model").string());
    std::vector<std::string> eval_lines;
    for (const auto& party : parties) {
      for (const Split split : {Split::Train, Split::Test}) {
        const auto& ds = split == Split::Train ? party.train : party.test;
        eval_lines.push_back(
            eval_row_json(evaluate(result.global, ds, split, Mode::Hfl, party.id))
                .dump());
      }
    }
    write_lines((out_dir / "hfl_eval.jsonl").string(), eval_lines);
    write_run_info(config.output_dir, "hfl", started);
    return;
  }

  if (config.partition.kind != PartitionKind::Vertical) {
    fail(ErrorKind::Config, "run: vfl mode needs a vertical partition");
  }
  VflPlan plan;
  for (const auto& party : parties) {
    plan.workers.push_back({party.id, party.train, party.test, party.is_label_holder});
  }
  plan.architecture = vfl_architecture(config, parties);
  plan.epochs = config.training.rounds;
  plan.batch_size = config.training.batch_size;
  plan.learning_rate = config.training.learning_rate;
  plan.seed = config.seed;

  const VflResult result = run_vfl(plan, config.transport.kind);
  write_lines((out_dir / "vfl_history.jsonl").string(),
              vfl_history_lines(result.history));
  for (std::size_t k = 0; k < plan.workers.size(); ++k) {
    if (!result.heads[k]) continue;
    save_model(*result.heads[k], *plan.architecture.head_configs[k],
               (out_dir / ("vfl_worker" + std::to_string(plan.workers[k].id) +
                           "_head.model"))
                   .string());
  }
  save_model(result.tail, plan.architecture.tail_config,
             (out_dir / "vfl_tail.model").string());
  std::vector<std::string> eval_lines;
  for (const auto& row : result.eval) eval_lines.push_back(eval_row_json(row).dump());
  write_lines((out_dir / "vfl_eval.jsonl").string(), eval_lines);
  write_run_info(config.output_dir, "vfl", started);
}

std::vector<EvalRow> read_eval_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Report, "report: cannot open '" + path + "'");
  std::vector<EvalRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json node;
    try {
      node = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Report, "report: bad JSONL in '" + path + "': " + e.what());
    }
    if (node.value("kind", "") != "eval") continue;
    EvalRow row;
    row.collaborator = node.at("collaborator").get<std::uint16_t>();
    row.split = split_from_string(node.at("split").get<std::string>());
    row.mode = mode_from_string(node.at("mode").get<std::string>());
    row.pe = node.at("pe").get<double>();
    row.mse = node.at("mse").get<double>();
    row.n = node.at("n").get<std::size_t>();
    rows.push_back(row);
  }
  return rows;
}

std::string cmd_report(const std::vector<std::string>& eval_log_paths) {
  std::vector<EvalRow> local_rows;
  std::vector<EvalRow> hfl_rows;
  std::vector<EvalRow> vfl_rows;
  for (const auto& path : eval_log_paths) {
    for (const auto& row : read_eval_rows(path)) {
      switch (row.mode) {
        case Mode::Local: local_rows.push_back(row); break;
        case Mode::Hfl: hfl_rows.push_back(row); break;
        case Mode::Vfl: vfl_rows.push_back(row); break;
      }
    }
  }
  if (hfl_rows.empty() && vfl_rows.empty()) {
    fail(ErrorKind::Report, "report: no federated evaluation rows in inputs");
  }
  if (local_rows.empty()) {
    fail(ErrorKind::Report, "report: no local baseline rows in inputs");
  }
  std::string out;
  if (!hfl_rows.empty()) {
    out += "HFL comparison\n";
    out += comparison_report(local_rows, hfl_rows);
  }
  if (!vfl_rows.empty()) {
    if (!out.empty()) out += "\n";
    out += "VFL comparison\n";
    out += comparison_report(local_rows, vfl_rows);
  }
  return out;
}

void cmd_serve(const ExperimentConfig& config, const ServeOptions& options) {
  config.validate();
  if (config.transport.kind != TransportKind::Socket) {
    fail(ErrorKind::Config, "serve: transport.kind must be 'socket'");
  }
  const auto started = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  const fs::path out_dir(config.output_dir);

  const auto write_port_file = [&](const Listener& listener) {
    if (options.port_file.empty()) return;
    std::ofstream out(options.port_file + ".tmp");
    out << "127.0.0.1:" << listener.port() << '\n';
    out.close();
    fs::rename(options.port_file + ".tmp", options.port_file);
  };

  if (options.role == "aggregator") {
    if (config.partition.kind != PartitionKind::Horizontal) {
      fail(ErrorKind::Config, "serve: aggregator role needs a horizontal partition");
    }
    // The aggregator never touches datasets: architecture and round count
    // come from the config alone, model state from the collaborators.
    AggregatorSettings settings;
    settings.network = full_network_config(config, config.data.p);
    settings.rounds = config.training.rounds;
    settings.weights = config.training.aggregation;
    settings.expected_collaborators =
        static_cast<std::uint16_t>(config.party_count());

    const auto listener = listen(config.transport.address);
    write_port_file(*listener);
    std::vector<std::unique_ptr<ChannelEndpoint>> accepted;
    std::vector<ChannelEndpoint*> channels;
    for (std::size_t i = 0; i < config.party_count(); ++i) {
      accepted.push_back(listener->accept(std::chrono::milliseconds(60000)));
      channels.push_back(accepted.back().get());
    }
    const HflResult result = run_hfl_aggregator(settings, channels);
    write_lines((out_dir / "hfl_history.jsonl").string(),
                hfl_history_lines(result.history));
    save_model(result.global, settings.network,
               (out_dir / "hfl_global.model").string());
    write_run_info(config.output_dir, "serve-aggregator", started);
    return;
  }

  if (options.role == "collaborator") {
    const auto parties = prepare_data(config);
    if (options.id >= parties.size()) {
      fail(ErrorKind::Config, "serve: collaborator id out of range");
    }
    const auto& party = parties[options.id];
    HflCollaboratorConfig collab;
    collab.id = party.id;
    collab.train = party.train;
    collab.test = party.test;
    collab.network = full_network_config(config, party.train.p());
    collab.local_epochs = config.training.local_epochs;
    collab.batch_size = config.training.batch_size;
    collab.learning_rate = config.training.learning_rate;
    collab.shuffle_seed = seed_mix(config.seed, kSeedCollab, party.id);
    const auto channel = dial(resolve_address(config, options));
    run_hfl_collaborator(collab, *channel);
    write_run_info(config.output_dir, "serve-collaborator", started);
    return;
  }

  if (options.role == "label-worker") {
    if (config.partition.kind != PartitionKind::Vertical) {
      fail(ErrorKind::Config, "serve: label-worker role needs a vertical partition");
    }
    const auto parties = prepare_data(config);
    const auto arch = vfl_architecture(config, parties);
    const std::size_t holder = config.partition.label_holder;

    LabelWorkerConfig worker;
    worker.id = parties[holder].id;
    worker.train = parties[holder].train;
    worker.test = parties[holder].test;
    worker.head = arch.head_configs[holder];
    worker.tail = arch.tail_config;
    for (std::size_t k = 0; k < parties.size(); ++k) {
      if (k == holder) continue;
      worker.feature_workers.emplace_back(parties[k].id,
                                          arch.head_configs[k]->output_width());
    }
    worker.epochs = config.training.rounds;
    worker.batch_size = config.training.batch_size;
    worker.learning_rate = config.training.learning_rate;
    worker.plan_seed = config.seed;

    const auto listener = listen(config.transport.address);
    write_port_file(*listener);
    std::vector<std::unique_ptr<ChannelEndpoint>> accepted;
    std::vector<ChannelEndpoint*> channels;
    for (std::size_t i = 0; i < worker.feature_workers.size(); ++i) {
      accepted.push_back(listener->accept(std::chrono::milliseconds(60000)));
      channels.push_back(accepted.back().get());
    }
    const LabelWorkerResult result = run_vfl_label_worker(worker, channels);
    write_lines((out_dir / "vfl_history.jsonl").string(),
                vfl_history_lines(result.history));
    if (result.head) {
      save_model(*result.head, *arch.head_configs[holder],
                 (out_dir / ("vfl_worker" + std::to_string(worker.id) + "_head.model"))
                     .string());
    }
    save_model(result.tail, arch.tail_config, (out_dir / "vfl_tail.model").string());
    std::vector<std::string> eval_lines;
    for (const auto& row : result.eval) eval_lines.push_back(eval_row_json(row).dump());
    write_lines((out_dir / "vfl_eval.jsonl").string(), eval_lines);
    write_run_info(config.output_dir, "serve-label-worker", started);
    return;
  }

  if (options.role == "feature-worker") {
    if (config.partition.kind != PartitionKind::Vertical) {
      fail(ErrorKind::Config, "serve: feature-worker role needs a vertical partition");
    }
    const auto parties = prepare_data(config);
    if (options.id >= parties.size() || parties[options.id].is_label_holder) {
      fail(ErrorKind::Config, "serve: feature-worker id out of range or label holder");
    }
    const auto arch = vfl_architecture(config, parties);
    FeatureWorkerConfig worker;
    worker.id = parties[options.id].id;
    worker.train = feature_view(parties[options.id].train);
    worker.test = feature_view(parties[options.id].test);
    worker.head = *arch.head_configs[options.id];
    worker.epochs = config.training.rounds;
    worker.batch_size = config.training.batch_size;
    worker.learning_rate = config.training.learning_rate;
    worker.plan_seed = config.seed;
    const auto channel = dial(resolve_address(config, options));
    const FeatureWorkerResult result = run_vfl_feature_worker(worker, *channel);
    save_model(result.head, worker.head,
               (out_dir / ("vfl_worker" + std::to_string(worker.id) + "_head.model"))
                   .string());
    write_run_info(config.output_dir, "serve-feature-worker", started);
    return;
  }

  fail(ErrorKind::Config, "serve: unknown role '" + options.role + "'");
}

}  // namespace fedclaims
