#include "fedclaims/hfl.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "fedclaims/error.hpp"
#include "fedclaims/rng.hpp"
#include "fedclaims/seeds.hpp"

namespace fedclaims {

namespace {

Matrix slice_rows(const Matrix& m, const std::vector<std::size_t>& rows,
                  std::size_t start, std::size_t count) {
  Matrix out(count, m.cols);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = rows[start + i];
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(r, j);
  }
  return out;
}

MetricsPayload round_metrics_payload(const CollabRoundMetrics& m) {
  MetricsPayload payload;
  payload.entries = {{"global_train_mse", m.global_train_mse},
                     {"global_train_pe", m.global_train_pe},
                     {"local_train_mse", m.local_train_mse},
                     {"local_train_pe", m.local_train_pe}};
  return payload;
}

double metric_entry(const MetricsPayload& payload, const std::string& key) {
  for (const auto& [k, v] : payload.entries) {
    if (k == key) return v;
  }
  fail(ErrorKind::Protocol, "metrics report missing entry '" + key + "'");
}

// Round barrier waits cover a full local-training pass on the slowest peer.
constexpr std::chrono::milliseconds kRoundTimeout{120000};

MessageEnvelope expect(ChannelEndpoint& channel, MsgType type,
                       std::uint32_t round) {
  const MessageEnvelope msg = channel.receive(kRoundTimeout);
  if (msg.type != type) {
    fail(ErrorKind::Protocol,
         "expected message type " + std::to_string(static_cast<int>(type)) +
             ", got " + std::to_string(static_cast<int>(msg.type)));
  }
  if (msg.round != round) {
    fail(ErrorKind::Protocol,
         "expected round " + std::to_string(round) + ", got " +
             std::to_string(msg.round));
  }
  return msg;
}

}  // namespace

void HflPlan::validate() const {
  if (collaborators.empty()) {
    fail(ErrorKind::Config, "hfl plan: need at least one collaborator");
  }
  network.validate_regression();
  if (rounds < 1) fail(ErrorKind::Config, "hfl plan: rounds must be >= 1");
  if (local_epochs < 1) fail(ErrorKind::Config, "hfl plan: local_epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "hfl plan: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    fail(ErrorKind::Config, "hfl plan: learning_rate must be > 0");
  }
  for (const auto& collab : collaborators) {
    if (!collab.train.has_labels()) {
      fail(ErrorKind::Config, "hfl plan: collaborator " + std::to_string(collab.id) +
                                  " train set has no labels");
    }
    if (collab.train.feature_names != collaborators.front().train.feature_names) {
      fail(ErrorKind::Config, "hfl plan: collaborators disagree on feature names");
    }
    if (collab.train.p() != network.input_width()) {
      fail(ErrorKind::Config, "hfl plan: feature width != network input width");
    }
    if (collab.train.n() == 0) {
      fail(ErrorKind::Config, "hfl plan: collaborator " + std::to_string(collab.id) +
                                  " train set is empty");
    }
  }
  for (std::size_t i = 0; i + 1 < collaborators.size(); ++i) {
    if (collaborators[i].id >= collaborators[i + 1].id) {
      fail(ErrorKind::Config, "hfl plan: collaborator ids must be ascending and unique");
    }
  }
}

std::uint64_t HflPlan::collaborator_seed(std::size_t index) const {
  const auto& collab = collaborators[index];
  if (collab.shuffle_seed) return *collab.shuffle_seed;
  return seed_mix(seed, kSeedCollab, collab.id);
}

NetworkParams local_epoch(const NetworkParams& params, const TabularDataset& train,
                          std::size_t batch_size, double learning_rate,
                          std::uint64_t shuffle_seed) {
  if (!train.has_labels()) fail(ErrorKind::Input, "local_epoch: train set has no labels");
  if (train.p() != params.input_width()) {
    fail(ErrorKind::Shape, "local_epoch: feature width " + std::to_string(train.p()) +
                               " != network input width " +
                               std::to_string(params.input_width()));
  }
  if (batch_size < 1) fail(ErrorKind::Config, "local_epoch: batch_size must be >= 1");

  const auto order = shuffled_indices(train.n(), shuffle_seed);
  NetworkParams current = params;
  for (std::size_t start = 0; start < train.n(); start += batch_size) {
    const std::size_t count = std::min(batch_size, train.n() - start);
    const Matrix batch = slice_rows(train.features, order, start, count);
    std::vector<double> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = (*train.labels)[order[start + i]];

    const ForwardResult fwd = forward(current, batch);
    const LossResult loss = mse_loss(fwd.output.data, labels);
    Matrix output_grad(count, 1);
    output_grad.data = loss.grad;
    const Gradients grads = backward(current, fwd.trace, output_grad);
    current = sgd_step(current, grads, learning_rate);
  }
  return current;
}

NetworkParams aggregate(const std::vector<NetworkParams>& updates,
                        const std::vector<double>& weights) {
  if (updates.empty()) fail(ErrorKind::Config, "aggregate: no updates");
  if (updates.size() != weights.size()) {
    fail(ErrorKind::Shape, "aggregate: got " + std::to_string(updates.size()) +
                               " updates but " + std::to_string(weights.size()) +
                               " weights");
  }
  double weight_sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) fail(ErrorKind::Config, "aggregate: negative weight");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-12) {
    fail(ErrorKind::Config, "aggregate: weights sum to " + std::to_string(weight_sum));
  }

  const auto reference = flatten(updates.front());
  std::vector<double> combined(reference.size(), 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const auto flat = flatten(updates[k]);
    if (flat.size() != combined.size()) {
      fail(ErrorKind::Shape, "aggregate: update " + std::to_string(k) +
                                 " has mismatched parameter count");
    }
    for (std::size_t i = 0; i < flat.size(); ++i) combined[i] += weights[k] * flat[i];
  }

  // Rebuild on the structure of the first update, in flatten order.
  NetworkParams result = updates.front();
  std::size_t pos = 0;
  for (auto& layer : result.layers) {
    for (double& w : layer.weights.data) w = combined[pos++];
    for (double& b : layer.bias) b = combined[pos++];
  }
  return result;
}

NetworkParams train_local(const NetworkParams& initial, const TabularDataset& train,
                          std::uint32_t rounds, std::uint32_t epochs_per_round,
                          std::size_t batch_size, double learning_rate,
                          std::uint64_t base_seed) {
  NetworkParams params = initial;
  for (std::uint32_t t = 1; t <= rounds; ++t) {
    for (std::uint32_t e = 1; e <= epochs_per_round; ++e) {
      params = local_epoch(params, train, batch_size, learning_rate,
                           seed_mix(base_seed, t, e));
    }
  }
  return params;
}

HflResult run_hfl_aggregator(const AggregatorSettings& settings,
                             const std::vector<ChannelEndpoint*>& channels) {
  settings.network.validate_regression();
  if (channels.size() != settings.expected_collaborators || channels.empty()) {
    fail(ErrorKind::Config, "aggregator: channel count != expected collaborators");
  }

  // Join phase; channels may arrive in any order, aggregation runs in
  // ascending collaborator-id order.
  struct Member {
    std::uint16_t id;
    ChannelEndpoint* channel;
    double train_rows;
  };
  std::vector<Member> members;
  members.reserve(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    MessageEnvelope join;
    try {
      join = channels[i]->receive();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Decode) {
        channels[i]->send(MessageEnvelope{kProtocolVersion, MsgType::Shutdown, 0, 0,
                                          EmptyPayload{}});
        fail(ErrorKind::Protocol,
             std::string("aggregator: join rejected (") + e.what() + ")");
      }
      throw;
    }
    if (join.type != MsgType::JoinRequest) {
      fail(ErrorKind::Protocol, "aggregator: expected JoinRequest");
    }
    const auto& payload = std::get<MetricsPayload>(join.payload);
    members.push_back({join.sender_id, channels[i],
                       metric_entry(payload, "train_rows")});
  }
  std::sort(members.begin(), members.end(),
            [](const Member& a, const Member& b) { return a.id < b.id; });
  for (std::size_t i = 0; i + 1 < members.size(); ++i) {
    if (members[i].id == members[i + 1].id) {
      fail(ErrorKind::Protocol, "aggregator: duplicate collaborator id " +
                                    std::to_string(members[i].id));
    }
  }
  for (const auto& member : members) {
    member.channel->send(
        MessageEnvelope{kProtocolVersion, MsgType::JoinAck, 0, 0, EmptyPayload{}});
  }

  std::vector<double> weights(members.size());
  if (settings.weights == AggregationWeights::Equal) {
    std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(members.size()));
  } else {
    double total = 0.0;
    for (const auto& member : members) total += member.train_rows;
    if (!(total > 0.0)) fail(ErrorKind::Protocol, "aggregator: zero total sample size");
    for (std::size_t k = 0; k < members.size(); ++k) {
      weights[k] = members[k].train_rows / total;
    }
  }

  HflResult result;
  result.global = init_network(settings.network);
  result.history.reserve(settings.rounds);

  for (std::uint32_t t = 1; t <= settings.rounds; ++t) {
    const ParamsPayload global{flatten(result.global)};
    for (const auto& member : members) {
      member.channel->send(
          MessageEnvelope{kProtocolVersion, MsgType::GlobalModel, 0, t, global});
    }

    RoundRecord record;
    record.round = t;
    std::vector<NetworkParams> updates;
    updates.reserve(members.size());
    for (const auto& member : members) {
      try {
        const MessageEnvelope update = expect(*member.channel, MsgType::LocalUpdate, t);
        if (update.sender_id != member.id) {
          fail(ErrorKind::Protocol, "aggregator: update sender mismatch");
        }
        updates.push_back(unflatten(std::get<ParamsPayload>(update.payload).values,
                                    settings.network));
        const MessageEnvelope report = expect(*member.channel, MsgType::MetricsReport, t);
        const auto& metrics = std::get<MetricsPayload>(report.payload);
        CollabRoundMetrics m;
        m.id = member.id;
        m.global_train_mse = metric_entry(metrics, "global_train_mse");
        m.global_train_pe = metric_entry(metrics, "global_train_pe");
        m.local_train_mse = metric_entry(metrics, "local_train_mse");
        m.local_train_pe = metric_entry(metrics, "local_train_pe");
        record.collaborators.push_back(m);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Channel) {
          fail(ErrorKind::Training,
               "hfl round " + std::to_string(t) + ": collaborator " +
                   std::to_string(member.id) + " channel failure (" + e.what() + ")");
        }
        throw;
      }
    }

    result.global = aggregate(updates, weights);
    if (!result.global.all_finite()) {
      fail(ErrorKind::Training,
           "hfl round " + std::to_string(t) + ": aggregated model is non-finite");
    }
    const auto flat = flatten(result.global);
    record.global_checksum = hash_doubles(flat);
    result.history.push_back(std::move(record));

    for (const auto& member : members) {
      member.channel->send(MessageEnvelope{kProtocolVersion, MsgType::RoundComplete,
                                           0, t, EmptyPayload{}});
    }
  }

  for (const auto& member : members) {
    member.channel->send(
        MessageEnvelope{kProtocolVersion, MsgType::Shutdown, 0,
                        settings.rounds, EmptyPayload{}});
  }
  return result;
}

void run_hfl_collaborator(const HflCollaboratorConfig& config,
                          ChannelEndpoint& channel) {
  if (!config.train.has_labels()) {
    fail(ErrorKind::Config, "collaborator: train set has no labels");
  }
  MetricsPayload join;
  join.entries = {{"train_rows", static_cast<double>(config.train.n())}};
  channel.send(MessageEnvelope{kProtocolVersion, MsgType::JoinRequest, config.id, 0,
                               join});
  const MessageEnvelope ack = channel.receive();
  if (ack.type == MsgType::Shutdown) {
    fail(ErrorKind::Protocol, "collaborator " + std::to_string(config.id) +
                                  ": join rejected by aggregator");
  }
  if (ack.type != MsgType::JoinAck) {
    fail(ErrorKind::Protocol, "collaborator: expected JoinAck");
  }

  for (;;) {
    const MessageEnvelope msg = channel.receive(kRoundTimeout);
    if (msg.type == MsgType::Shutdown) return;
    if (msg.type == MsgType::RoundComplete) continue;
    if (msg.type != MsgType::GlobalModel) {
      fail(ErrorKind::Protocol, "collaborator: unexpected message type " +
                                    std::to_string(static_cast<int>(msg.type)));
    }
    const std::uint32_t t = msg.round;
    NetworkParams params =
        unflatten(std::get<ParamsPayload>(msg.payload).values, config.network);

    CollabRoundMetrics metrics;
    metrics.id = config.id;
    {
      const EvalRow row = evaluate(params, config.train, Split::Train, Mode::Hfl,
                                   config.id, config.batch_size);
      metrics.global_train_mse = row.mse;
      metrics.global_train_pe = row.pe;
    }
    for (std::uint32_t e = 1; e <= config.local_epochs; ++e) {
      params = local_epoch(params, config.train, config.batch_size,
                           config.learning_rate, seed_mix(config.shuffle_seed, t, e));
    }
    if (!params.all_finite()) {
      fail(ErrorKind::Training, "collaborator " + std::to_string(config.id) +
                                    ": training diverged at round " + std::to_string(t));
    }
    {
      const EvalRow row = evaluate(params, config.train, Split::Train, Mode::Local,
                                   config.id, config.batch_size);
      metrics.local_train_mse = row.mse;
      metrics.local_train_pe = row.pe;
    }

    channel.send(MessageEnvelope{kProtocolVersion, MsgType::LocalUpdate, config.id, t,
                                 ParamsPayload{flatten(params)}});
    channel.send(MessageEnvelope{kProtocolVersion, MsgType::MetricsReport, config.id,
                                 t, round_metrics_payload(metrics)});
  }
}

HflResult run_hfl(const HflPlan& plan, TransportKind transport) {
  plan.validate();
  const std::size_t k = plan.collaborators.size();

  std::vector<std::unique_ptr<ChannelEndpoint>> aggregator_side;
  std::vector<std::unique_ptr<ChannelEndpoint>> collaborator_side;
  std::unique_ptr<Listener> listener;
  if (transport == TransportKind::Inproc) {
    for (std::size_t i = 0; i < k; ++i) {
      auto [a, b] = open_inproc_pair();
      aggregator_side.push_back(std::move(a));
      collaborator_side.push_back(std::move(b));
    }
  } else {
    listener = listen("127.0.0.1:0");
  }

  std::vector<std::exception_ptr> failures(k);
  std::vector<std::thread> threads;
  threads.reserve(k);
  const std::string address =
      listener ? "127.0.0.1:" + std::to_string(listener->port()) : "";
  for (std::size_t i = 0; i < k; ++i) {
    HflCollaboratorConfig config;
    config.id = plan.collaborators[i].id;
    config.train = plan.collaborators[i].train;
    config.test = plan.collaborators[i].test;
    config.network = plan.network;
    config.local_epochs = plan.local_epochs;
    config.batch_size = plan.batch_size;
    config.learning_rate = plan.learning_rate;
    config.shuffle_seed = plan.collaborator_seed(i);
    ChannelEndpoint* endpoint =
        transport == TransportKind::Inproc ? collaborator_side[i].get() : nullptr;
    threads.emplace_back([config = std::move(config), endpoint, address, i,
                          &failures]() mutable {
      try {
        if (endpoint != nullptr) {
          run_hfl_collaborator(config, *endpoint);
        } else {
          const auto channel = dial(address);
          run_hfl_collaborator(config, *channel);
        }
      } catch (...) {
        failures[i] = std::current_exception();
        // Unblock the aggregator's barrier instead of letting it time out.
        if (endpoint != nullptr) endpoint->close();
      }
    });
  }

  AggregatorSettings settings;
  settings.network = plan.network;
  settings.rounds = plan.rounds;
  settings.weights = plan.weights;
  settings.expected_collaborators = static_cast<std::uint16_t>(k);

  HflResult result;
  std::exception_ptr aggregator_failure;
  try {
    std::vector<ChannelEndpoint*> channels;
    if (transport == TransportKind::Inproc) {
      for (const auto& endpoint : aggregator_side) channels.push_back(endpoint.get());
      result = run_hfl_aggregator(settings, channels);
    } else {
      std::vector<std::unique_ptr<ChannelEndpoint>> accepted;
      for (std::size_t i = 0; i < k; ++i) accepted.push_back(listener->accept());
      for (const auto& endpoint : accepted) channels.push_back(endpoint.get());
      result = run_hfl_aggregator(settings, channels);
      for (auto& endpoint : accepted) endpoint->close();
    }
  } catch (...) {
    aggregator_failure = std::current_exception();
    for (auto& endpoint : aggregator_side) endpoint->close();
  }

  for (auto& thread : threads) thread.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  if (aggregator_failure) std::rethrow_exception(aggregator_failure);
  return result;
}

}  // namespace fedclaims
