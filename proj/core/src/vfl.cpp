#include "fedclaims/vfl.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <string>
#include <thread>

#include "fedclaims/error.hpp"
#include "fedclaims/rng.hpp"
#include "fedclaims/seeds.hpp"

namespace fedclaims {

namespace {

constexpr std::chrono::milliseconds kBatchTimeout{120000};

struct BatchRange {
  std::size_t start = 0;
  std::size_t count = 0;
};

std::vector<BatchRange> chunk(std::size_t n, std::size_t batch_size) {
  std::vector<BatchRange> ranges;
  for (std::size_t start = 0; start < n; start += batch_size) {
    ranges.push_back({start, std::min(batch_size, n - start)});
  }
  return ranges;
}

Matrix slice_rows(const Matrix& m, const std::vector<std::size_t>& order,
                  const BatchRange& range) {
  Matrix out(range.count, m.cols);
  for (std::size_t i = 0; i < range.count; ++i) {
    const std::size_t r = order[range.start + i];
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(r, j);
  }
  return out;
}

std::uint64_t batch_checksum(const std::vector<std::uint64_t>& entity_ids,
                             const std::vector<std::size_t>& order,
                             const BatchRange& range) {
  std::vector<std::uint64_t> ids(range.count);
  for (std::size_t i = 0; i < range.count; ++i) ids[i] = entity_ids[order[range.start + i]];
  return hash_u64s(ids);
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

// Training epochs use rounds 1..E; the two forward-only evaluation passes
// that follow are tagged E+1 (train split) and E+2 (test split).
std::uint32_t eval_round(std::uint32_t epochs, Split split) {
  return epochs + (split == Split::Train ? 1 : 2);
}

}  // namespace

std::size_t SplitArchitecture::embedding_total() const {
  std::size_t total = 0;
  for (const auto& head : head_configs) {
    if (head) total += head->output_width();
  }
  return total;
}

void SplitArchitecture::validate() const {
  bool any_head = false;
  for (const auto& head : head_configs) {
    if (head) {
      head->validate();
      any_head = true;
    }
  }
  if (!any_head) fail(ErrorKind::Config, "split architecture: no head segments");
  tail_config.validate_regression();
  if (tail_config.input_width() != embedding_total()) {
    fail(ErrorKind::Config,
         "split architecture: tail input width " +
             std::to_string(tail_config.input_width()) +
             " != sum of head embedding widths " + std::to_string(embedding_total()));
  }
}

void VflPlan::validate() const {
  if (workers.empty()) fail(ErrorKind::Config, "vfl plan: no workers");
  if (architecture.head_configs.size() != workers.size()) {
    fail(ErrorKind::Config, "vfl plan: head config count != worker count");
  }
  architecture.validate();
  if (epochs < 1) fail(ErrorKind::Config, "vfl plan: epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "vfl plan: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorKind::Config, "vfl plan: learning_rate must be > 0");

  std::size_t holders = 0;
  for (std::size_t k = 0; k < workers.size(); ++k) {
    const auto& worker = workers[k];
    if (k > 0 && workers[k - 1].id >= worker.id) {
      fail(ErrorKind::Config, "vfl plan: worker ids must be ascending and unique");
    }
    if (worker.is_label_holder) {
      ++holders;
      if (!worker.train.has_labels() || !worker.test.has_labels()) {
        fail(ErrorKind::Config, "vfl plan: label holder is missing labels");
      }
    } else if (worker.train.has_labels() || worker.test.has_labels()) {
      fail(ErrorKind::Config, "vfl plan: feature worker " + std::to_string(worker.id) +
                                  " must not hold labels");
    }
    const auto& head = architecture.head_configs[k];
    if (worker.train.p() == 0) {
      if (head) fail(ErrorKind::Config, "vfl plan: featureless worker cannot have a head");
      if (!worker.is_label_holder) {
        fail(ErrorKind::Config, "vfl plan: feature worker with no features");
      }
    } else {
      if (!head) fail(ErrorKind::Config, "vfl plan: worker " + std::to_string(worker.id) +
                                             " has features but no head config");
      if (head->input_width() != worker.train.p()) {
        fail(ErrorKind::Config, "vfl plan: head input width != worker feature width");
      }
    }
    if (worker.test.p() != worker.train.p()) {
      fail(ErrorKind::Config, "vfl plan: train/test feature width mismatch");
    }
    if (worker.train.entity_ids != workers.front().train.entity_ids ||
        worker.test.entity_ids != workers.front().test.entity_ids) {
      fail(ErrorKind::Config, "vfl plan: worker datasets are not entity-aligned");
    }
  }
  if (holders != 1) fail(ErrorKind::Config, "vfl plan: need exactly one label holder");
  if (workers.front().train.n() == 0) fail(ErrorKind::Config, "vfl plan: empty train set");
}

std::size_t VflPlan::label_holder_index() const {
  for (std::size_t k = 0; k < workers.size(); ++k) {
    if (workers[k].is_label_holder) return k;
  }
  fail(ErrorKind::Config, "vfl plan: no label holder");
}

FeatureView feature_view(const TabularDataset& ds) {
  return FeatureView{ds.entity_ids, ds.features};
}

HeadForwardResult head_forward(const NetworkParams& head, const Matrix& batch) {
  ForwardResult result = forward(head, batch);
  return HeadForwardResult{std::move(result.output), std::move(result.trace)};
}

TailStepResult tail_step(const NetworkParams& tail,
                         const std::vector<Matrix>& activation_blocks,
                         std::span<const double> labels, double learning_rate) {
  if (activation_blocks.empty()) fail(ErrorKind::Shape, "tail_step: no activation blocks");
  const std::size_t rows = activation_blocks.front().rows;
  std::size_t total = 0;
  for (const auto& block : activation_blocks) {
    if (block.rows != rows) fail(ErrorKind::Shape, "tail_step: block row mismatch");
    total += block.cols;
  }
  if (total != tail.input_width()) {
    fail(ErrorKind::Shape, "tail_step: concatenated width " + std::to_string(total) +
                               " != tail input width " +
                               std::to_string(tail.input_width()));
  }
  if (labels.size() != rows) fail(ErrorKind::Shape, "tail_step: label count mismatch");

  Matrix concat(rows, total);
  std::size_t offset = 0;
  for (const auto& block : activation_blocks) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < block.cols; ++j) {
        concat(i, offset + j) = block(i, j);
      }
    }
    offset += block.cols;
  }

  const ForwardResult fwd = forward(tail, concat);
  const LossResult loss = mse_loss(fwd.output.data, labels);
  Matrix output_grad(rows, 1);
  output_grad.data = loss.grad;
  const Gradients grads = backward(tail, fwd.trace, output_grad);

  TailStepResult result;
  result.tail = sgd_step(tail, grads, learning_rate);
  result.loss = loss.loss;
  result.gradient_blocks.reserve(activation_blocks.size());
  offset = 0;
  for (const auto& block : activation_blocks) {
    Matrix g(rows, block.cols);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < block.cols; ++j) {
        g(i, j) = grads.input(i, offset + j);
      }
    }
    result.gradient_blocks.push_back(std::move(g));
    offset += block.cols;
  }
  return result;
}

NetworkParams head_backward(const NetworkParams& head, const ForwardTrace& trace,
                            const Matrix& gradient_block, double learning_rate) {
  if (trace.post.empty() || !trace.post.back().same_shape(gradient_block)) {
    fail(ErrorKind::Protocol, "head_backward: gradient block does not match trace");
  }
  const Gradients grads = backward(head, trace, gradient_block);
  return sgd_step(head, grads, learning_rate);
}

FeatureWorkerResult run_vfl_feature_worker(const FeatureWorkerConfig& config,
                                           ChannelEndpoint& channel) {
  config.head.validate();
  if (config.train.p() != config.head.input_width() ||
      config.test.p() != config.head.input_width()) {
    fail(ErrorKind::Config, "feature worker: head input width != feature width");
  }

  FeatureWorkerResult result;
  result.head = init_network(config.head);
  const std::uint16_t embedding =
      static_cast<std::uint16_t>(result.head.output_width());

  MetricsPayload join;
  join.entries = {{"train_rows", static_cast<double>(config.train.n())}};
  channel.send(MessageEnvelope{kProtocolVersion, MsgType::JoinRequest, config.id, 0,
                               join});
  const MessageEnvelope ack = channel.receive();
  if (ack.type == MsgType::Shutdown) {
    fail(ErrorKind::Protocol, "feature worker " + std::to_string(config.id) +
                                  ": join rejected by label worker");
  }
  if (ack.type != MsgType::JoinAck) {
    fail(ErrorKind::Protocol, "feature worker: expected JoinAck");
  }

  std::uint32_t batch_id = 0;
  for (std::uint32_t e = 1; e <= config.epochs; ++e) {
    const auto order =
        shuffled_indices(config.train.n(), seed_mix(config.plan_seed, kSeedVflBatch, e));
    for (const auto& range : chunk(config.train.n(), config.batch_size)) {
      ++batch_id;
      const Matrix batch = slice_rows(config.train.features, order, range);
      const HeadForwardResult fwd = head_forward(result.head, batch);

      ActivationPayload activation;
      activation.batch_id = batch_id;
      activation.rows = static_cast<std::uint32_t>(range.count);
      activation.cols = embedding;
      activation.entity_checksum = batch_checksum(config.train.entity_ids, order, range);
      activation.values = fwd.activations.data;
      channel.send(MessageEnvelope{kProtocolVersion, MsgType::ActivationBatch,
                                   config.id, e, std::move(activation)});

      const MessageEnvelope msg = channel.receive(kBatchTimeout);
      if (msg.type != MsgType::GradientBatch) {
        fail(ErrorKind::Protocol, "feature worker: expected GradientBatch");
      }
      const auto& grad = std::get<GradientPayload>(msg.payload);
      if (grad.batch_id != batch_id || grad.rows != range.count ||
          grad.cols != embedding) {
        fail(ErrorKind::Protocol, "feature worker: stale or mismatched gradient batch " +
                                      std::to_string(grad.batch_id));
      }
      Matrix block(range.count, embedding);
      block.data = grad.values;
      result.head = head_backward(result.head, fwd.trace, block, config.learning_rate);
      if (config.record_param_trail) result.param_trail.push_back(flatten(result.head));
    }
    const MessageEnvelope done = channel.receive(kBatchTimeout);
    if (done.type != MsgType::RoundComplete || done.round != e) {
      fail(ErrorKind::Protocol, "feature worker: expected RoundComplete for epoch " +
                                    std::to_string(e));
    }
  }

  // Forward-only evaluation passes, natural row order.
  for (const Split split : {Split::Train, Split::Test}) {
    const FeatureView& view = split == Split::Train ? config.train : config.test;
    const auto order = identity_order(view.n());
    const std::uint32_t round = eval_round(config.epochs, split);
    for (const auto& range : chunk(view.n(), config.batch_size)) {
      ++batch_id;
      const Matrix batch = slice_rows(view.features, order, range);
      const HeadForwardResult fwd = head_forward(result.head, batch);
      ActivationPayload activation;
      activation.batch_id = batch_id;
      activation.rows = static_cast<std::uint32_t>(range.count);
      activation.cols = embedding;
      activation.entity_checksum = batch_checksum(view.entity_ids, order, range);
      activation.values = fwd.activations.data;
      channel.send(MessageEnvelope{kProtocolVersion, MsgType::ActivationBatch,
                                   config.id, round, std::move(activation)});
    }
  }

  const MessageEnvelope shutdown = channel.receive(kBatchTimeout);
  if (shutdown.type != MsgType::Shutdown) {
    fail(ErrorKind::Protocol, "feature worker: expected Shutdown");
  }
  return result;
}

namespace {

/// Channel bookkeeping for the label worker: joined feature workers in
/// ascending id order.
struct PeerSet {
  std::vector<std::uint16_t> ids;
  std::vector<ChannelEndpoint*> channels;  // aligned with ids
};

PeerSet join_feature_workers(
    const LabelWorkerConfig& config,
    const std::vector<ChannelEndpoint*>& channels) {
  if (channels.size() != config.feature_workers.size()) {
    fail(ErrorKind::Config, "label worker: channel count != feature worker count");
  }
  std::map<std::uint16_t, ChannelEndpoint*> joined;
  for (ChannelEndpoint* channel : channels) {
    MessageEnvelope join;
    try {
      join = channel->receive();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Decode) {
        channel->send(MessageEnvelope{kProtocolVersion, MsgType::Shutdown, 0, 0,
                                      EmptyPayload{}});
        fail(ErrorKind::Protocol,
             std::string("label worker: join rejected (") + e.what() + ")");
      }
      throw;
    }
    if (join.type != MsgType::JoinRequest) {
      fail(ErrorKind::Protocol, "label worker: expected JoinRequest");
    }
    double reported_rows = -1.0;
    for (const auto& [key, value] : std::get<MetricsPayload>(join.payload).entries) {
      if (key == "train_rows") reported_rows = value;
    }
    const auto rows = static_cast<std::size_t>(reported_rows);
    if (rows != config.train.n()) {
      fail(ErrorKind::Protocol, "label worker: feature worker " +
                                    std::to_string(join.sender_id) + " reports " +
                                    std::to_string(rows) + " rows, expected " +
                                    std::to_string(config.train.n()));
    }
    if (!joined.emplace(join.sender_id, channel).second) {
      fail(ErrorKind::Protocol, "label worker: duplicate worker id " +
                                    std::to_string(join.sender_id));
    }
  }
  PeerSet peers;
  for (const auto& [id, width] : config.feature_workers) {
    const auto it = joined.find(id);
    if (it == joined.end()) {
      fail(ErrorKind::Protocol, "label worker: worker " + std::to_string(id) +
                                    " did not join");
    }
    peers.ids.push_back(id);
    peers.channels.push_back(it->second);
  }
  for (ChannelEndpoint* channel : peers.channels) {
    channel->send(
        MessageEnvelope{kProtocolVersion, MsgType::JoinAck, config.id, 0, EmptyPayload{}});
  }
  return peers;
}

Matrix receive_activation_block(ChannelEndpoint& channel, std::uint16_t worker_id,
                                std::uint32_t round, std::uint32_t batch_id,
                                std::size_t rows, std::size_t cols,
                                std::uint64_t expected_checksum) {
  MessageEnvelope msg;
  try {
    msg = channel.receive(kBatchTimeout);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Channel) {
      fail(ErrorKind::Training, "vfl batch " + std::to_string(batch_id) +
                                    ": worker " + std::to_string(worker_id) +
                                    " channel failure (" + e.what() + ")");
    }
    throw;
  }
  if (msg.type != MsgType::ActivationBatch || msg.round != round) {
    fail(ErrorKind::Protocol, "label worker: expected ActivationBatch for round " +
                                  std::to_string(round));
  }
  const auto& activation = std::get<ActivationPayload>(msg.payload);
  if (activation.batch_id != batch_id || activation.rows != rows ||
      activation.cols != cols) {
    fail(ErrorKind::Protocol, "label worker: activation shape/id mismatch from worker " +
                                  std::to_string(worker_id));
  }
  if (activation.entity_checksum != expected_checksum) {
    fail(ErrorKind::Protocol, "label worker: batch " + std::to_string(batch_id) +
                                  " entity checksum mismatch from worker " +
                                  std::to_string(worker_id) +
                                  " (alignment violation)");
  }
  Matrix block(rows, cols);
  block.data = activation.values;
  return block;
}

}  // namespace

LabelWorkerResult run_vfl_label_worker(const LabelWorkerConfig& config,
                                       const std::vector<ChannelEndpoint*>& channels) {
  if (!config.train.has_labels() || !config.test.has_labels()) {
    fail(ErrorKind::Config, "label worker: datasets must carry labels");
  }
  config.tail.validate_regression();

  LabelWorkerResult result;
  if (config.head) {
    config.head->validate();
    if (config.head->input_width() != config.train.p()) {
      fail(ErrorKind::Config, "label worker: head input width != feature width");
    }
    result.head = init_network(*config.head);
  } else if (config.train.p() != 0) {
    fail(ErrorKind::Config, "label worker: features present but no head config");
  }
  result.tail = init_network(config.tail);

  const PeerSet peers = join_feature_workers(config, channels);

  // Concatenation slots in ascending worker id, own head in its place.
  struct Slot {
    bool own = false;
    std::size_t peer_index = 0;  // into peers when !own
    std::size_t width = 0;
  };
  std::vector<Slot> slots;
  {
    std::size_t peer_index = 0;
    bool own_placed = false;
    auto place_own = [&](std::uint16_t next_peer_id) {
      if (own_placed || !result.head) return;
      if (config.id < next_peer_id) {
        slots.push_back({true, 0, result.head->output_width()});
        own_placed = true;
      }
    };
    for (; peer_index < peers.ids.size(); ++peer_index) {
      place_own(peers.ids[peer_index]);
      slots.push_back({false, peer_index, config.feature_workers[peer_index].second});
    }
    if (result.head && !own_placed) {
      slots.push_back({true, 0, result.head->output_width()});
    }
  }

  std::uint32_t batch_id = 0;
  const std::size_t n_train = config.train.n();

  for (std::uint32_t e = 1; e <= config.epochs; ++e) {
    const auto order =
        shuffled_indices(n_train, seed_mix(config.plan_seed, kSeedVflBatch, e));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& range : chunk(n_train, config.batch_size)) {
      ++batch_id;
      const std::uint64_t checksum =
          batch_checksum(config.train.entity_ids, order, range);

      std::optional<HeadForwardResult> own_fwd;
      if (result.head) {
        own_fwd = head_forward(*result.head,
                               slice_rows(config.train.features, order, range));
      }

      std::vector<Matrix> blocks;
      blocks.reserve(slots.size());
      for (const auto& slot : slots) {
        if (slot.own) {
          blocks.push_back(own_fwd->activations);
        } else {
          blocks.push_back(receive_activation_block(
              *peers.channels[slot.peer_index], peers.ids[slot.peer_index], e,
              batch_id, range.count, slot.width, checksum));
        }
      }

      std::vector<double> labels(range.count);
      for (std::size_t i = 0; i < range.count; ++i) {
        labels[i] = (*config.train.labels)[order[range.start + i]];
      }

      TailStepResult step =
          tail_step(result.tail, blocks, labels, config.learning_rate);
      result.tail = std::move(step.tail);
      loss_sum += step.loss;
      ++batches;
      if (!std::isfinite(step.loss)) {
        fail(ErrorKind::Training, "vfl epoch " + std::to_string(e) +
                                      ": batch loss diverged");
      }

      for (std::size_t s = 0; s < slots.size(); ++s) {
        const auto& slot = slots[s];
        if (slot.own) {
          *result.head = head_backward(*result.head, own_fwd->trace,
                                       step.gradient_blocks[s], config.learning_rate);
        } else {
          GradientPayload grad;
          grad.batch_id = batch_id;
          grad.rows = static_cast<std::uint32_t>(range.count);
          grad.cols = static_cast<std::uint32_t>(slot.width);
          grad.values = step.gradient_blocks[s].data;
          peers.channels[slot.peer_index]->send(
              MessageEnvelope{kProtocolVersion, MsgType::GradientBatch, config.id, e,
                              std::move(grad)});
        }
      }

      if (config.record_param_trail) {
        result.head_trail.push_back(result.head ? flatten(*result.head)
                                                : std::vector<double>{});
        result.tail_trail.push_back(flatten(result.tail));
      }
    }
    result.history.push_back({e, loss_sum / static_cast<double>(batches)});
    for (ChannelEndpoint* channel : peers.channels) {
      channel->send(MessageEnvelope{kProtocolVersion, MsgType::RoundComplete,
                                    config.id, e, EmptyPayload{}});
    }
  }

  // Evaluation: synchronized forward-only passes over train then test.
  for (const Split split : {Split::Train, Split::Test}) {
    const TabularDataset& ds = split == Split::Train ? config.train : config.test;
    const auto order = identity_order(ds.n());
    const std::uint32_t round = eval_round(config.epochs, split);
    std::vector<double> predictions;
    predictions.reserve(ds.n());
    for (const auto& range : chunk(ds.n(), config.batch_size)) {
      ++batch_id;
      const std::uint64_t checksum = batch_checksum(ds.entity_ids, order, range);
      std::optional<HeadForwardResult> own_fwd;
      if (result.head) {
        own_fwd = head_forward(*result.head, slice_rows(ds.features, order, range));
      }
      std::vector<Matrix> blocks;
      blocks.reserve(slots.size());
      for (const auto& slot : slots) {
        if (slot.own) {
          blocks.push_back(own_fwd->activations);
        } else {
          blocks.push_back(receive_activation_block(
              *peers.channels[slot.peer_index], peers.ids[slot.peer_index], round,
              batch_id, range.count, slot.width, checksum));
        }
      }
      Matrix concat(range.count, result.tail.input_width());
      std::size_t offset = 0;
      for (const auto& block : blocks) {
        for (std::size_t i = 0; i < range.count; ++i) {
          for (std::size_t j = 0; j < block.cols; ++j) {
            concat(i, offset + j) = block(i, j);
          }
        }
        offset += block.cols;
      }
      const auto out = forward(result.tail, concat).output;
      predictions.insert(predictions.end(), out.data.begin(), out.data.end());
    }
    EvalRow row;
    row.collaborator = config.id;
    row.split = split;
    row.mode = Mode::Vfl;
    row.pe = percentage_error(*ds.labels, predictions);
    row.mse = mean_squared_error(*ds.labels, predictions);
    row.n = ds.n();
    result.eval.push_back(row);
  }

  for (ChannelEndpoint* channel : peers.channels) {
    channel->send(MessageEnvelope{kProtocolVersion, MsgType::Shutdown, config.id,
                                  eval_round(config.epochs, Split::Test),
                                  EmptyPayload{}});
  }
  return result;
}

VflResult run_vfl(const VflPlan& plan, TransportKind transport) {
  plan.validate();
  const std::size_t holder = plan.label_holder_index();

  std::vector<std::size_t> feature_indices;
  for (std::size_t k = 0; k < plan.workers.size(); ++k) {
    if (k != holder) feature_indices.push_back(k);
  }

  std::vector<std::unique_ptr<ChannelEndpoint>> holder_side;
  std::vector<std::unique_ptr<ChannelEndpoint>> worker_side;
  std::unique_ptr<Listener> listener;
  if (transport == TransportKind::Inproc) {
    for (std::size_t i = 0; i < feature_indices.size(); ++i) {
      auto [a, b] = open_inproc_pair();
      holder_side.push_back(std::move(a));
      worker_side.push_back(std::move(b));
    }
  } else {
    listener = listen("127.0.0.1:0");
  }
  const std::string address =
      listener ? "127.0.0.1:" + std::to_string(listener->port()) : "";

  std::vector<FeatureWorkerResult> worker_results(feature_indices.size());
  std::vector<std::exception_ptr> failures(feature_indices.size());
  std::vector<std::thread> threads;
  threads.reserve(feature_indices.size());
  for (std::size_t i = 0; i < feature_indices.size(); ++i) {
    const std::size_t k = feature_indices[i];
    FeatureWorkerConfig config;
    config.id = plan.workers[k].id;
    config.train = feature_view(plan.workers[k].train);
    config.test = feature_view(plan.workers[k].test);
    config.head = *plan.architecture.head_configs[k];
    config.epochs = plan.epochs;
    config.batch_size = plan.batch_size;
    config.learning_rate = plan.learning_rate;
    config.plan_seed = plan.seed;
    config.record_param_trail = plan.record_param_trail;
    ChannelEndpoint* endpoint =
        transport == TransportKind::Inproc ? worker_side[i].get() : nullptr;
    threads.emplace_back([config = std::move(config), endpoint, address, i,
                          &worker_results, &failures]() mutable {
      try {
        if (endpoint != nullptr) {
          worker_results[i] = run_vfl_feature_worker(config, *endpoint);
        } else {
          const auto channel = dial(address);
          worker_results[i] = run_vfl_feature_worker(config, *channel);
        }
      } catch (...) {
        failures[i] = std::current_exception();
        if (endpoint != nullptr) endpoint->close();
      }
    });
  }

  LabelWorkerConfig config;
  config.id = plan.workers[holder].id;
  config.train = plan.workers[holder].train;
  config.test = plan.workers[holder].test;
  config.head = plan.architecture.head_configs[holder];
  config.tail = plan.architecture.tail_config;
  for (const std::size_t k : feature_indices) {
    config.feature_workers.emplace_back(
        plan.workers[k].id, plan.architecture.head_configs[k]->output_width());
  }
  config.epochs = plan.epochs;
  config.batch_size = plan.batch_size;
  config.learning_rate = plan.learning_rate;
  config.plan_seed = plan.seed;
  config.record_param_trail = plan.record_param_trail;

  LabelWorkerResult holder_result;
  std::exception_ptr holder_failure;
  try {
    std::vector<ChannelEndpoint*> channels;
    if (transport == TransportKind::Inproc) {
      for (const auto& endpoint : holder_side) channels.push_back(endpoint.get());
      holder_result = run_vfl_label_worker(config, channels);
    } else {
      std::vector<std::unique_ptr<ChannelEndpoint>> accepted;
      for (std::size_t i = 0; i < feature_indices.size(); ++i) {
        accepted.push_back(listener->accept());
      }
      for (const auto& endpoint : accepted) channels.push_back(endpoint.get());
      holder_result = run_vfl_label_worker(config, channels);
      for (auto& endpoint : accepted) endpoint->close();
    }
  } catch (...) {
    holder_failure = std::current_exception();
    for (auto& endpoint : holder_side) endpoint->close();
  }

  for (auto& thread : threads) thread.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  if (holder_failure) std::rethrow_exception(holder_failure);

  VflResult result;
  result.heads.resize(plan.workers.size());
  result.heads[holder] = holder_result.head;
  for (std::size_t i = 0; i < feature_indices.size(); ++i) {
    result.heads[feature_indices[i]] = std::move(worker_results[i].head);
  }
  result.tail = std::move(holder_result.tail);
  result.history = std::move(holder_result.history);
  result.eval = std::move(holder_result.eval);

  if (plan.record_param_trail) {
    const std::size_t steps = holder_result.tail_trail.size();
    result.param_trail.resize(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      auto& snapshot = result.param_trail[s];
      snapshot.heads.resize(plan.workers.size());
      snapshot.heads[holder] = holder_result.head_trail[s];
      for (std::size_t i = 0; i < feature_indices.size(); ++i) {
        snapshot.heads[feature_indices[i]] = worker_results[i].param_trail[s];
      }
      snapshot.tail = holder_result.tail_trail[s];
    }
  }
  return result;
}

}  // namespace fedclaims
