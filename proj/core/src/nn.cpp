#include "fedclaims/nn.hpp"

#include <cmath>
#include <string>

#include "fedclaims/error.hpp"
#include "fedclaims/rng.hpp"

namespace fedclaims {

namespace {

double activate(Activation act, double z) {
  return act == Activation::Relu ? (z > 0.0 ? z : 0.0) : z;
}

double activate_grad(Activation act, double z) {
  return act == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

// Activation of affine layer k (0-based); the last layer is identity.
Activation layer_activation(const NetworkParams& params, std::size_t k) {
  if (k + 1 == params.layers.size()) return Activation::Identity;
  return params.hidden_activations[k];
}

}  // namespace

std::size_t NetworkConfig::param_count() const {
  std::size_t count = 0;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    count += layer_sizes[k + 1] * layer_sizes[k] + layer_sizes[k + 1];
  }
  return count;
}

void NetworkConfig::validate() const {
  if (layer_sizes.size() < 2) {
    fail(ErrorKind::Config, "network config: need at least 2 layer sizes");
  }
  for (std::size_t w : layer_sizes) {
    if (w < 1) fail(ErrorKind::Config, "network config: layer width must be >= 1");
  }
  if (hidden_activations.size() != layer_sizes.size() - 2) {
    fail(ErrorKind::Config,
         "network config: expected " + std::to_string(layer_sizes.size() - 2) +
             " hidden activations, got " + std::to_string(hidden_activations.size()));
  }
}

void NetworkConfig::validate_regression() const {
  validate();
  if (layer_sizes.back() != 1) {
    fail(ErrorKind::Config, "network config: regression output width must be 1");
  }
}

std::size_t NetworkParams::param_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) {
    count += layer.weights.data.size() + layer.bias.size();
  }
  return count;
}

bool NetworkParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weights.all_finite()) return false;
    for (double b : layer.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  if (hidden_activations != other.hidden_activations) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!(layers[k].weights == other.layers[k].weights)) return false;
    if (layers[k].bias != other.layers[k].bias) return false;
  }
  return true;
}

NetworkParams init_network(const NetworkConfig& config) {
  config.validate();
  Xoshiro256 rng(config.seed);
  NetworkParams params;
  params.hidden_activations = config.hidden_activations;
  params.layers.reserve(config.affine_layer_count());
  for (std::size_t k = 0; k + 1 < config.layer_sizes.size(); ++k) {
    const std::size_t in = config.layer_sizes[k];
    const std::size_t out = config.layer_sizes[k + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    LayerParams layer;
    layer.weights = Matrix(out, in);
    for (double& w : layer.weights.data) {
      w = (2.0 * rng.uniform() - 1.0) * bound;
    }
    layer.bias.assign(out, 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ForwardResult forward(const NetworkParams& params, const Matrix& batch) {
  if (params.layers.empty()) fail(ErrorKind::Shape, "forward: empty network");
  if (batch.cols != params.input_width()) {
    fail(ErrorKind::Shape, "forward: batch width " + std::to_string(batch.cols) +
                               " != input width " +
                               std::to_string(params.input_width()));
  }
  if (!batch.all_finite()) fail(ErrorKind::Input, "forward: non-finite input batch");

  ForwardTrace trace;
  trace.input = batch;
  trace.pre.reserve(params.layers.size());
  trace.post.reserve(params.layers.size());

  const Matrix* current = &trace.input;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    const std::size_t out = layer.weights.rows;
    const std::size_t in = layer.weights.cols;
    Matrix pre(batch.rows, out);
    for (std::size_t i = 0; i < batch.rows; ++i) {
      for (std::size_t o = 0; o < out; ++o) {
        double acc = layer.bias[o];
        for (std::size_t j = 0; j < in; ++j) {
          acc += (*current)(i, j) * layer.weights(o, j);
        }
        pre(i, o) = acc;
      }
    }
    const Activation act = layer_activation(params, k);
    Matrix post = pre;
    if (act == Activation::Relu) {
      for (double& v : post.data) v = v > 0.0 ? v : 0.0;
    }
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
    current = &trace.post.back();
  }

  ForwardResult result;
  result.output = trace.post.back();
  result.trace = std::move(trace);
  return result;
}

std::vector<double> predict(const NetworkParams& params, const Matrix& batch,
                            std::size_t batch_size) {
  if (params.output_width() != 1) {
    fail(ErrorKind::Shape, "predict: output width must be 1");
  }
  if (batch_size == 0 || batch_size >= batch.rows) {
    return forward(params, batch).output.data;
  }
  std::vector<double> predictions;
  predictions.reserve(batch.rows);
  for (std::size_t start = 0; start < batch.rows; start += batch_size) {
    const std::size_t count = std::min(batch_size, batch.rows - start);
    Matrix chunk(count, batch.cols);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j < batch.cols; ++j) {
        chunk(i, j) = batch(start + i, j);
      }
    }
    auto out = forward(params, chunk).output;
    predictions.insert(predictions.end(), out.data.begin(), out.data.end());
  }
  return predictions;
}

LossResult mse_loss(std::span<const double> predictions,
                    std::span<const double> labels) {
  if (predictions.empty()) fail(ErrorKind::Input, "mse_loss: empty batch");
  if (predictions.size() != labels.size()) {
    fail(ErrorKind::Shape, "mse_loss: prediction/label length mismatch");
  }
  const double inv_b = 1.0 / static_cast<double>(predictions.size());
  LossResult result;
  result.grad.resize(predictions.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double diff = predictions[i] - labels[i];
    acc += diff * diff;
    result.grad[i] = 2.0 * inv_b * diff;
  }
  result.loss = acc * inv_b;
  return result;
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const Matrix& output_grad) {
  const std::size_t depth = params.layers.size();
  if (trace.pre.size() != depth || trace.post.size() != depth) {
    fail(ErrorKind::Shape, "backward: trace depth does not match params");
  }
  const std::size_t b = trace.batch_rows();
  if (output_grad.rows != b || output_grad.cols != params.output_width()) {
    fail(ErrorKind::Shape, "backward: output gradient shape mismatch");
  }
  if (trace.input.cols != params.input_width()) {
    fail(ErrorKind::Shape, "backward: trace input width mismatch");
  }

  Gradients grads;
  grads.layers.resize(depth);

  // delta = dLoss/dPre for the current layer; output layer is identity.
  Matrix delta = output_grad;
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = params.layers[k];
    const std::size_t out = layer.weights.rows;
    const std::size_t in = layer.weights.cols;
    if (trace.pre[k].cols != out) {
      fail(ErrorKind::Shape, "backward: trace layer width mismatch");
    }
    const Matrix& below = k == 0 ? trace.input : trace.post[k - 1];

    auto& g = grads.layers[k];
    g.weights = Matrix(out, in);
    g.bias.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t j = 0; j < in; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
          acc += delta(i, o) * below(i, j);
        }
        g.weights(o, j) = acc;
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < b; ++i) acc += delta(i, o);
      g.bias[o] = acc;
    }

    // dLoss/dPost for the layer below, then through its activation.
    Matrix below_grad(b, in);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < in; ++j) {
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          acc += delta(i, o) * layer.weights(o, j);
        }
        below_grad(i, j) = acc;
      }
    }
    if (k == 0) {
      grads.input = std::move(below_grad);
    } else {
      const Activation act = layer_activation(params, k - 1);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < in; ++j) {
          below_grad(i, j) *= activate_grad(act, trace.pre[k - 1](i, j));
        }
      }
      delta = std::move(below_grad);
    }
  }
  return grads;
}

NetworkParams sgd_step(const NetworkParams& params, const Gradients& grads,
                       double learning_rate) {
  if (grads.layers.size() != params.layers.size()) {
    fail(ErrorKind::Shape, "sgd_step: gradient depth mismatch");
  }
  NetworkParams updated = params;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& g = grads.layers[k];
    auto& layer = updated.layers[k];
    if (!g.weights.same_shape(layer.weights) || g.bias.size() != layer.bias.size()) {
      fail(ErrorKind::Shape, "sgd_step: gradient shape mismatch at layer " +
                                 std::to_string(k));
    }
    for (std::size_t i = 0; i < g.weights.data.size(); ++i) {
      if (!std::isfinite(g.weights.data[i])) {
        fail(ErrorKind::Numeric, "sgd_step: non-finite weight gradient");
      }
      layer.weights.data[i] -= learning_rate * g.weights.data[i];
    }
    for (std::size_t i = 0; i < g.bias.size(); ++i) {
      if (!std::isfinite(g.bias[i])) {
        fail(ErrorKind::Numeric, "sgd_step: non-finite bias gradient");
      }
      layer.bias[i] -= learning_rate * g.bias[i];
    }
  }
  return updated;
}

std::vector<double> flatten(const NetworkParams& params) {
  std::vector<double> values;
  values.reserve(params.param_count());
  for (const auto& layer : params.layers) {
    values.insert(values.end(), layer.weights.data.begin(), layer.weights.data.end());
    values.insert(values.end(), layer.bias.begin(), layer.bias.end());
  }
  return values;
}

NetworkParams unflatten(std::span<const double> values,
                        const NetworkConfig& config) {
  config.validate();
  if (values.size() != config.param_count()) {
    fail(ErrorKind::Shape, "unflatten: expected " +
                               std::to_string(config.param_count()) +
                               " values, got " + std::to_string(values.size()));
  }
  NetworkParams params;
  params.hidden_activations = config.hidden_activations;
  std::size_t pos = 0;
  for (std::size_t k = 0; k + 1 < config.layer_sizes.size(); ++k) {
    const std::size_t in = config.layer_sizes[k];
    const std::size_t out = config.layer_sizes[k + 1];
    LayerParams layer;
    layer.weights = Matrix(out, in);
    for (double& w : layer.weights.data) w = values[pos++];
    layer.bias.resize(out);
    for (double& bias : layer.bias) bias = values[pos++];
    params.layers.push_back(std::move(layer));
  }
  return params;
}

}  // namespace fedclaims
