#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedclaims/matrix.hpp"

namespace fedclaims {

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

/// Architecture of a feedforward network: layer widths, one activation per
/// hidden layer, and the init seed. The output layer is always identity.
struct NetworkConfig {
  std::vector<std::size_t> layer_sizes;          // input width first
  std::vector<Activation> hidden_activations;    // size = layer_sizes.size() - 2
  std::uint64_t seed = 0;

  std::size_t input_width() const { return layer_sizes.front(); }
  std::size_t output_width() const { return layer_sizes.back(); }
  std::size_t affine_layer_count() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;

  /// Structural checks: >= 2 widths, all >= 1, activation list matches depth.
  void validate() const;
  /// validate() plus the scalar-regression contract (output width 1).
  void validate_regression() const;
};

struct LayerParams {
  Matrix weights;             // out x in
  std::vector<double> bias;   // out
};

/// Trainable state of a network. Carries the hidden activations alongside the
/// weights so forward/backward need no side table; flatten/unflatten cover
/// only the numeric parameters.
struct NetworkParams {
  std::vector<LayerParams> layers;
  std::vector<Activation> hidden_activations;

  std::size_t input_width() const { return layers.front().weights.cols; }
  std::size_t output_width() const { return layers.back().weights.rows; }
  std::size_t param_count() const;
  bool all_finite() const;
  bool operator==(const NetworkParams& other) const;
};

/// Per-layer pre/post-activation cache from one forward pass.
struct ForwardTrace {
  Matrix input;              // b x p
  std::vector<Matrix> pre;   // b x out_k
  std::vector<Matrix> post;  // b x out_k
  std::size_t batch_rows() const { return input.rows; }
};

/// Parameter gradients, shape-congruent with NetworkParams, plus the
/// loss gradient with respect to the input batch (needed by split training).
struct Gradients {
  std::vector<LayerParams> layers;
  Matrix input;  // b x p
};

struct ForwardResult {
  Matrix output;  // b x out
  ForwardTrace trace;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // dLoss/dPrediction, length b
};

/// Glorot-uniform weights (uniform on +-sqrt(6/(in+out))), zero biases, drawn
/// from xoshiro256** seeded with config.seed. Same config -> identical bits.
NetworkParams init_network(const NetworkConfig& config);

/// Affine maps plus activations over a b x p batch; records the full trace.
ForwardResult forward(const NetworkParams& params, const Matrix& batch);

/// Forward pass without trace for width-1 networks; returns predictions.
std::vector<double> predict(const NetworkParams& params, const Matrix& batch,
                            std::size_t batch_size = 0);

/// Mean squared error: loss = mean((yhat-y)^2), grad = 2/b * (yhat-y).
LossResult mse_loss(std::span<const double> predictions,
                    std::span<const double> labels);

/// Reverse-mode gradients for the trace produced by forward() on `params`.
/// `output_grad` is dLoss/dOutput, shape b x out.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const Matrix& output_grad);

/// theta <- theta - lr * g. Pure: inputs untouched.
NetworkParams sgd_step(const NetworkParams& params, const Gradients& grads,
                       double learning_rate);

/// Canonical parameter order: layer 0..L-1, weights row-major, then bias.
std::vector<double> flatten(const NetworkParams& params);
NetworkParams unflatten(std::span<const double> values,
                        const NetworkConfig& config);

}  // namespace fedclaims
