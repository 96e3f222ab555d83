#include "fedclaims/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "fedclaims/error.hpp"

namespace fedclaims {

using nlohmann::json;

namespace {

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  fail(ErrorKind::Config, "config: unknown activation '" + s + "'");
}

// Typed field access with json-pointer style diagnostics.
template <typename T>
T get_or(const json& node, const std::string& key, const T& fallback,
         const std::string& where) {
  if (!node.contains(key)) return fallback;
  try {
    return node.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "config: bad value for " + where + "." + key + ": " +
                                e.what());
  }
}

void parse_data(const json& node, DataSection& data) {
  data.source = get_or<std::string>(node, "source", data.source, "data");
  data.dir = get_or<std::string>(node, "dir", data.dir, "data");
  data.n = get_or<std::size_t>(node, "n", data.n, "data");
  data.p = get_or<std::size_t>(node, "p", data.p, "data");
  data.base_frequency = get_or<double>(node, "base_frequency", data.base_frequency, "data");
  data.frequency_coefficients = get_or<std::vector<double>>(
      node, "frequency_coefficients", data.frequency_coefficients, "data");
  data.severity_shape = get_or<double>(node, "severity_shape", data.severity_shape, "data");
  data.severity_scale = get_or<double>(node, "severity_scale", data.severity_scale, "data");
  data.train_fraction = get_or<double>(node, "train_fraction", data.train_fraction, "data");
  data.standardize = get_or<bool>(node, "standardize", data.standardize, "data");
}

void parse_partition(const json& node, PartitionSpec& partition) {
  const auto kind = get_or<std::string>(node, "kind", "horizontal", "partition");
  if (kind == "horizontal") {
    partition.kind = PartitionKind::Horizontal;
    partition.fractions = get_or<std::vector<double>>(node, "fractions",
                                                      {0.5, 0.5}, "partition");
  } else if (kind == "vertical") {
    partition.kind = PartitionKind::Vertical;
    partition.feature_subsets = get_or<std::vector<std::vector<std::string>>>(
        node, "subsets", {}, "partition");
    partition.label_holder =
        get_or<std::size_t>(node, "label_holder", 0, "partition");
  } else {
    fail(ErrorKind::Config, "config: partition.kind must be horizontal or vertical");
  }
}

void parse_model(const json& node, ModelSection& model) {
  model.hidden = get_or<std::vector<std::size_t>>(node, "hidden", model.hidden, "model");
  if (node.contains("activations")) {
    model.activations.clear();
    for (const auto& item : node.at("activations")) {
      model.activations.push_back(activation_from_string(item.get<std::string>()));
    }
  }
  if (node.contains("vfl")) {
    const auto& vfl = node.at("vfl");
    model.vfl.head_hidden = get_or<std::vector<std::size_t>>(
        vfl, "head_hidden", model.vfl.head_hidden, "model.vfl");
    model.vfl.embedding_width = get_or<std::size_t>(
        vfl, "embedding_width", model.vfl.embedding_width, "model.vfl");
    model.vfl.tail_hidden = get_or<std::vector<std::size_t>>(
        vfl, "tail_hidden", model.vfl.tail_hidden, "model.vfl");
  }
}

void parse_training(const json& node, TrainingSection& training) {
  training.rounds = get_or<std::uint32_t>(node, "rounds", training.rounds, "training");
  training.local_epochs =
      get_or<std::uint32_t>(node, "local_epochs", training.local_epochs, "training");
  training.batch_size =
      get_or<std::size_t>(node, "batch_size", training.batch_size, "training");
  training.learning_rate =
      get_or<double>(node, "learning_rate", training.learning_rate, "training");
  const auto aggregation =
      get_or<std::string>(node, "aggregation", "equal", "training");
  if (aggregation == "equal") {
    training.aggregation = AggregationWeights::Equal;
  } else if (aggregation == "sample_size") {
    training.aggregation = AggregationWeights::SampleSize;
  } else {
    fail(ErrorKind::Config, "config: training.aggregation must be equal or sample_size");
  }
}

void parse_transport(const json& node, TransportSection& transport) {
  const auto kind = get_or<std::string>(node, "kind", "inproc", "transport");
  if (kind == "inproc") {
    transport.kind = TransportKind::Inproc;
  } else if (kind == "socket") {
    transport.kind = TransportKind::Socket;
  } else {
    fail(ErrorKind::Config, "config: transport.kind must be inproc or socket");
  }
  transport.address = get_or<std::string>(node, "address", transport.address, "transport");
}

}  // namespace

std::vector<std::string> generated_feature_names(std::size_t p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) names.push_back("f" + std::to_string(j + 1));
  return names;
}

std::size_t ExperimentConfig::party_count() const {
  return partition.kind == PartitionKind::Horizontal ? partition.fractions.size()
                                                     : partition.feature_subsets.size();
}

void ExperimentConfig::validate() const {
  if (data.source != "generate" && data.source != "dir") {
    fail(ErrorKind::Config, "config: data.source must be generate or dir");
  }
  if (data.source == "dir" && data.dir.empty()) {
    fail(ErrorKind::Config, "config: data.source=dir requires data.dir");
  }
  if (data.p < 1) fail(ErrorKind::Config, "config: data.p must be >= 1");
  if (data.n < 1) fail(ErrorKind::Config, "config: data.n must be >= 1");
  if (!(data.train_fraction > 0.0) || !(data.train_fraction < 1.0)) {
    fail(ErrorKind::Config, "config: data.train_fraction must lie in (0,1)");
  }
  if (!data.frequency_coefficients.empty() &&
      data.frequency_coefficients.size() != data.p) {
    fail(ErrorKind::Config,
         "config: data.frequency_coefficients must have length data.p");
  }
  TweedieParams tweedie;
  tweedie.base_frequency = data.base_frequency;
  tweedie.severity_shape = data.severity_shape;
  tweedie.severity_scale = data.severity_scale;
  tweedie.frequency_coefficients.assign(data.p, 0.0);
  tweedie.validate(data.p);

  // Partition consistency against the names the generator will produce;
  // for CSV ingestion the check reruns at load time against the real header.
  if (data.source == "generate") {
    partition.validate(generated_feature_names(data.p));
  }

  if (model.hidden.empty()) fail(ErrorKind::Config, "config: model.hidden is empty");
  if (!model.activations.empty() && model.activations.size() != model.hidden.size()) {
    fail(ErrorKind::Config,
         "config: model.activations must match model.hidden length");
  }
  if (model.vfl.embedding_width < 1) {
    fail(ErrorKind::Config, "config: model.vfl.embedding_width must be >= 1");
  }
  if (training.rounds < 1) fail(ErrorKind::Config, "config: training.rounds must be >= 1");
  if (training.local_epochs < 1) {
    fail(ErrorKind::Config, "config: training.local_epochs must be >= 1");
  }
  if (training.batch_size < 1) {
    fail(ErrorKind::Config, "config: training.batch_size must be >= 1");
  }
  if (!(training.learning_rate > 0.0)) {
    fail(ErrorKind::Config, "config: training.learning_rate must be > 0");
  }
  if (output_dir.empty()) fail(ErrorKind::Config, "config: output_dir is empty");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) fail(ErrorKind::Config, "config: cannot open '" + path + "'");

  json root;
  try {
    root = json::parse(file);
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte offset; surface it verbatim.
    fail(ErrorKind::Config, "config: parse error in '" + path + "': " + e.what());
  }

  ExperimentConfig config;
  config.seed = get_or<std::uint64_t>(root, "seed", config.seed, "");
  if (root.contains("data")) parse_data(root.at("data"), config.data);
  if (root.contains("partition")) parse_partition(root.at("partition"), config.partition);
  if (root.contains("model")) parse_model(root.at("model"), config.model);
  if (root.contains("training")) parse_training(root.at("training"), config.training);
  if (root.contains("transport")) parse_transport(root.at("transport"), config.transport);
  config.output_dir = get_or<std::string>(root, "output_dir", config.output_dir, "");

  config.validate();
  return config;
}

}  // namespace fedclaims
