#include <doctest.h>

#include <cmath>

#include "fedclaims/error.hpp"
#include "fedclaims/nn.hpp"
#include "fedclaims/rng.hpp"

using namespace fedclaims;

namespace {

Matrix row_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

NetworkParams manual_params(std::vector<Matrix> weights,
                            std::vector<std::vector<double>> biases,
                            std::vector<Activation> hidden_acts) {
  NetworkParams params;
  params.hidden_activations = std::move(hidden_acts);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    params.layers.push_back({std::move(weights[k]), std::move(biases[k])});
  }
  return params;
}

// Independent oracle: central finite differences of the full MSE loss with
// respect to every parameter, evaluated through forward()+mse_loss() only.
struct NumericGradients {
  std::vector<double> values;  // flatten order
};

double loss_at(const NetworkParams& params, const Matrix& batch,
               const std::vector<double>& labels) {
  const auto out = forward(params, batch).output;
  return mse_loss(out.data, labels).loss;
}

NumericGradients numeric_gradients(const NetworkParams& params, const Matrix& batch,
                                   const std::vector<double>& labels, double step) {
  NumericGradients result;
  NetworkParams probe = params;
  for (std::size_t k = 0; k < probe.layers.size(); ++k) {
    auto& layer = probe.layers[k];
    for (double& w : layer.weights.data) {
      const double saved = w;
      w = saved + step;
      const double up = loss_at(probe, batch, labels);
      w = saved - step;
      const double down = loss_at(probe, batch, labels);
      w = saved;
      result.values.push_back((up - down) / (2.0 * step));
    }
    for (double& b : layer.bias) {
      const double saved = b;
      b = saved + step;
      const double up = loss_at(probe, batch, labels);
      b = saved - step;
      const double down = loss_at(probe, batch, labels);
      b = saved;
      result.values.push_back((up - down) / (2.0 * step));
    }
  }
  return result;
}

// Gradcheck metric: relative where the gradient is large, absolute near zero.
double grad_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

std::vector<double> analytic_flat(const NetworkParams& params, const Matrix& batch,
                                  const std::vector<double>& labels) {
  const ForwardResult fwd = forward(params, batch);
  const LossResult loss = mse_loss(fwd.output.data, labels);
  Matrix output_grad(batch.rows, 1);
  output_grad.data = loss.grad;
  const Gradients grads = backward(params, fwd.trace, output_grad);
  std::vector<double> flat;
  for (const auto& layer : grads.layers) {
    flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

}  // namespace

TEST_CASE("init: biases zero, deterministic, bounded") {
  NetworkConfig config{{3, 1}, {}, 99};
  const auto params = init_network(config);
  CHECK(params.layers.size() == 1);
  CHECK(params.layers[0].bias == std::vector<double>{0.0});

  const auto again = init_network(config);
  CHECK(params == again);

  NetworkConfig wide{{4, 8, 1}, {Activation::Relu}, 7};
  const auto net = init_network(wide);
  const double bound = std::sqrt(6.0 / (4.0 + 8.0));
  for (double w : net.layers[0].weights.data) {
    CHECK(std::abs(w) <= bound);
    CHECK(std::abs(w) < std::sqrt(6.0 / 5.0) + 1e-15);
  }
  // Different seeds diverge.
  wide.seed = 8;
  CHECK(!(init_network(wide) == net));
}

TEST_CASE("init: rejects invalid configs") {
  CHECK_THROWS_AS(init_network(NetworkConfig{{3}, {}, 0}), Error);
  CHECK_THROWS_AS(init_network(NetworkConfig{{3, 0, 1}, {Activation::Relu}, 0}), Error);
  CHECK_THROWS_AS(init_network(NetworkConfig{{3, 4, 1}, {}, 0}), Error);
  NetworkConfig head{{3, 4}, {}, 0};
  CHECK_NOTHROW(head.validate());
  CHECK_THROWS_AS(head.validate_regression(), Error);
}

TEST_CASE("forward: identity and hand-computed cases") {
  // 2->2 identity layer.
  auto identity = manual_params({row_matrix({{1, 0}, {0, 1}})}, {{0, 0}}, {});
  const auto out = forward(identity, row_matrix({{3, 5}})).output;
  CHECK(out.data == std::vector<double>{3.0, 5.0});

  // 1->1: 2*3 + 1 = 7.
  auto affine = manual_params({row_matrix({{2}})}, {{1}}, {});
  CHECK(forward(affine, row_matrix({{3}})).output.data[0] == 7.0);

  // relu hidden with pre-activation -1 -> post 0.
  auto relu_net = manual_params({row_matrix({{1}}), row_matrix({{1}})}, {{-4}, {0}},
                                {Activation::Relu});
  const auto result = forward(relu_net, row_matrix({{3}}));
  CHECK(result.trace.pre[0](0, 0) == -1.0);
  CHECK(result.trace.post[0](0, 0) == 0.0);
  CHECK(result.output(0, 0) == 0.0);
}

TEST_CASE("forward: errors on bad input") {
  auto params = manual_params({row_matrix({{2}})}, {{1}}, {});
  CHECK_THROWS_AS(forward(params, row_matrix({{1, 2}})), Error);
  Matrix bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(params, bad), Error);
}

TEST_CASE("mse_loss: hand cases") {
  {
    const auto r = mse_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2});
    CHECK(r.loss == 0.0);
    CHECK(r.grad == std::vector<double>{0.0, 0.0});
  }
  {
    const auto r = mse_loss(std::vector<double>{2}, std::vector<double>{0});
    CHECK(r.loss == 4.0);
    CHECK(r.grad == std::vector<double>{4.0});
  }
  {
    const auto r = mse_loss(std::vector<double>{1, 3}, std::vector<double>{0, 0});
    CHECK(r.loss == 5.0);
    CHECK(r.grad == std::vector<double>{1.0, 3.0});
  }
  CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("backward: hand chain rule and zero-input case") {
  // w=2, b=0, x=1, y=0 -> yhat=2, dL/dw = 4, dL/db = 4.
  auto params = manual_params({row_matrix({{2}})}, {{0}}, {});
  const auto batch = row_matrix({{1}});
  const auto grads_flat = analytic_flat(params, batch, {0.0});
  CHECK(grads_flat[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(grads_flat[1] == doctest::Approx(4.0).epsilon(1e-15));

  // Zero input kills the weight gradient, bias gradient survives.
  const auto zero_batch = row_matrix({{0}, {0}});
  const auto zero_flat = analytic_flat(params, zero_batch, {1.0, 1.0});
  CHECK(zero_flat[0] == 0.0);
  CHECK(zero_flat[1] != 0.0);
}

TEST_CASE("backward: matches finite differences on random relu networks") {
  Xoshiro256 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    NetworkConfig config{{3, 4, 1}, {Activation::Relu}, 1000 + trial};
    auto params = init_network(config);
    // Shift biases so relu kinks sit away from the evaluation point.
    for (auto& layer : params.layers) {
      for (double& b : layer.bias) b = 0.2 * rng.normal();
    }
    Matrix batch(5, 3);
    for (double& v : batch.data) v = rng.normal();
    std::vector<double> labels(5);
    for (double& y : labels) y = rng.normal();

    const auto analytic = analytic_flat(params, batch, labels);
    const auto numeric = numeric_gradients(params, batch, labels, 1e-6);
    REQUIRE(analytic.size() == numeric.values.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      CHECK(grad_error(analytic[i], numeric.values[i]) < 1e-6);
    }
  }
}

TEST_CASE("backward: returns input gradient") {
  auto params = manual_params({row_matrix({{2}})}, {{0}}, {});
  const auto batch = row_matrix({{1}});
  const ForwardResult fwd = forward(params, batch);
  const LossResult loss = mse_loss(fwd.output.data, std::vector<double>{0.0});
  Matrix output_grad(1, 1);
  output_grad.data = loss.grad;
  const Gradients grads = backward(params, fwd.trace, output_grad);
  // dL/dx = dL/dyhat * w = 4 * 2.
  CHECK(grads.input(0, 0) == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("sgd_step: identity and hand case") {
  auto params = manual_params({row_matrix({{1.0}})}, {{0.0}}, {});
  Gradients grads;
  grads.layers.push_back({row_matrix({{0.5}}), {0.0}});

  const auto frozen = sgd_step(params, grads, 0.0);
  CHECK(frozen == params);

  const auto moved = sgd_step(params, grads, 0.1);
  CHECK(moved.layers[0].weights(0, 0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(params.layers[0].weights(0, 0) == 1.0);  // pure update

  Gradients zero;
  zero.layers.push_back({row_matrix({{0.0}}), {0.0}});
  CHECK(sgd_step(params, zero, 0.5) == params);

  Gradients bad;
  bad.layers.push_back({row_matrix({{std::numeric_limits<double>::infinity()}}), {0.0}});
  CHECK_THROWS_AS(sgd_step(params, bad, 0.1), Error);
}

TEST_CASE("flatten/unflatten: canonical order and round trip") {
  auto params = manual_params({row_matrix({{1, 2}})}, {{3}}, {});
  CHECK(flatten(params) == std::vector<double>{1.0, 2.0, 3.0});

  NetworkConfig config{{2, 1}, {}, 0};
  const auto rebuilt = unflatten(flatten(params), config);
  CHECK(rebuilt == params);

  CHECK_THROWS_AS(unflatten(std::vector<double>{1.0, 2.0}, config), Error);

  // Property: round trip is exact for random networks.
  for (int trial = 0; trial < 10; ++trial) {
    NetworkConfig random_config{{4, 6, 3, 1},
                                {Activation::Relu, Activation::Identity},
                                static_cast<std::uint64_t>(trial)};
    const auto p = init_network(random_config);
    CHECK(unflatten(flatten(p), random_config) == p);
  }
}

TEST_CASE("forward/backward: deterministic across repeated runs") {
  NetworkConfig config{{6, 8, 4, 1}, {Activation::Relu, Activation::Relu}, 42};
  const auto params = init_network(config);
  Xoshiro256 rng(5);
  Matrix batch(7, 6);
  for (double& v : batch.data) v = rng.normal();
  std::vector<double> labels(7, 1.0);

  const auto a = analytic_flat(params, batch, labels);
  const auto b = analytic_flat(params, batch, labels);
  CHECK(a == b);
}
