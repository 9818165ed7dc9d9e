#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "spikerl/gradient_diagnostics.hpp"
#include "spikerl/surrogate.hpp"

using namespace spikerl;

namespace {

MlpNetwork tiny_net(const std::vector<int>& sizes, std::uint64_t seed,
                    Scalar gain = 3.0) {
  RandomStream rng(seed);
  MlpNetwork net = make_mlp(sizes, Activation::rectifier, rng);
  for (auto& w : net.weights) w *= gain;
  for (auto& b : net.biases) b *= gain;
  return net;
}

DiagBatch random_batch(int in, int out, std::uint64_t seed) {
  RandomStream rng(seed);
  DiagBatch b;
  b.inputs = Matrix(in, 1);
  for (int i = 0; i < in; ++i) b.inputs(i, 0) = rng.uniform(-2.0, 2.0);
  b.loss_grads = Matrix(out, 1);
  for (int i = 0; i < out; ++i) b.loss_grads(i, 0) = rng.uniform(-1.0, 1.0);
  return b;
}

}  // namespace

TEST_CASE("single hidden layer: slopes rescale rows by the surrogate factor") {
  MlpNetwork net = tiny_net({5, 6, 3}, 21);
  DiagBatch batch = random_batch(5, 3, 22);
  SpikeStackTape tape = spike_stack_forward(net, batch.inputs, 1.0);
  MlpGrads g1 = spike_stack_backward(net, tape, batch.loss_grads, 2.0);
  MlpGrads g2 = spike_stack_backward(net, tape, batch.loss_grads, 50.0);

  // output-layer gradients carry no surrogate factor at all
  CHECK((g1.weights[1] - g2.weights[1]).cwiseAbs().maxCoeff() == 0.0);
  // input-layer rows scale exactly by the factor ratio at that neuron
  for (int i = 0; i < 6; ++i) {
    const Scalar x = tape.x[0](i, 0);
    const Scalar ratio = surrogate_grad(x, 2.0) / surrogate_grad(x, 50.0);
    for (int j = 0; j < 5; ++j) {
      if (g2.weights[0](i, j) != 0.0) {
        CHECK(g1.weights[0](i, j) / g2.weights[0](i, j) ==
              doctest::Approx(ratio).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("zero loss gradient zeroes every statistic") {
  MlpNetwork net = tiny_net({4, 5, 5, 2}, 23);
  DiagBatch batch = random_batch(4, 2, 24);
  batch.loss_grads.setZero();
  auto stats = layer_gradient_magnitudes(net, batch, 10.0);
  for (const auto& s : stats) CHECK(s.mean_abs_grad == 0.0);
  auto cos = gradient_cosine_similarity(net, batch, 1.0, 100.0);
  for (Scalar c : cos) CHECK(std::isnan(c));  // undefined sentinel
}

TEST_CASE("cosine of a slope with itself is one") {
  MlpNetwork net = tiny_net({6, 8, 8, 3}, 25);
  DiagBatch batch = random_batch(6, 3, 26);
  auto cos = gradient_cosine_similarity(net, batch, 37.0, 37.0);
  for (Scalar c : cos) {
    if (!std::isnan(c)) CHECK(std::abs(c - 1.0) < 1e-12);
  }
}

TEST_CASE("one-parameter layers give cosine in {-1, 1} or the sentinel") {
  MlpNetwork net = tiny_net({1, 1, 1}, 27, 5.0);
  DiagBatch batch = random_batch(1, 1, 28);
  auto cos = gradient_cosine_similarity(net, batch, 2.0, 80.0);
  for (Scalar c : cos) {
    const bool ok = std::isnan(c) || c == 1.0 || c == -1.0;
    CHECK(ok);
  }
}

TEST_CASE("shallow slopes keep larger input-layer gradients than steep ones") {
  SlopeSweepConfig cfg;
  cfg.slopes = {1.0, 100.0};
  cfg.trials = 20;
  cfg.hidden_layers = 4;
  cfg.neurons = 32;
  cfg.input_dim = 32;
  cfg.output_dim = 32;
  cfg.seed = 5;
  auto rows = run_slope_sweep(cfg);
  Scalar mag_shallow = -1.0, mag_steep = -1.0;
  for (const auto& r : rows) {
    if (r.layer == 0 && r.slope == 1.0) mag_shallow = r.mean_abs_grad;
    if (r.layer == 0 && r.slope == 100.0) mag_steep = r.mean_abs_grad;
  }
  CHECK(mag_shallow > 10.0 * mag_steep);
}

TEST_CASE("slope sweep rows cover every slope and layer") {
  SlopeSweepConfig cfg;
  cfg.slopes = {1.0, 10.0};
  cfg.trials = 3;
  cfg.hidden_layers = 2;
  cfg.neurons = 8;
  cfg.input_dim = 8;
  cfg.output_dim = 4;
  auto rows = run_slope_sweep(cfg);
  CHECK(rows.size() == 2u * 3u);  // slopes x (hidden_layers + 1)
}

TEST_CASE("sweep csv has the pinned column header") {
  SlopeSweepConfig cfg;
  cfg.slopes = {1.0};
  cfg.trials = 1;
  cfg.hidden_layers = 1;
  cfg.neurons = 4;
  cfg.input_dim = 4;
  cfg.output_dim = 2;
  auto rows = run_slope_sweep(cfg);
  const std::string path = "diag_sweep_test.csv";
  write_slope_sweep_csv(path, rows);
  std::string header;
  {
    std::ifstream in(path);
    std::getline(in, header);
  }
  std::remove(path.c_str());
  CHECK(header == "slope,layer,mean_abs_grad,zero_fraction,cosine_to_ref");
}
