#include "spikerl/gradient_diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "spikerl/surrogate.hpp"

namespace spikerl {

namespace {

MlpNetwork make_probe_net(const SlopeSweepConfig& cfg, RandomStream& rng) {
  std::vector<int> sizes;
  sizes.push_back(cfg.input_dim);
  for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.neurons);
  sizes.push_back(cfg.output_dim);
  MlpNetwork net = make_mlp(sizes, Activation::rectifier, rng);
  for (auto& w : net.weights) w *= cfg.weight_gain;
  for (auto& b : net.biases) b *= cfg.weight_gain;
  return net;
}

Scalar cosine_or_nan(const MlpGrads& a, const MlpGrads& b, int layer) {
  const auto& ga = a.weights[layer];
  const auto& gb = b.weights[layer];
  const Scalar na = ga.norm();
  const Scalar nb = gb.norm();
  if (na == 0.0 || nb == 0.0)
    return std::numeric_limits<Scalar>::quiet_NaN();
  return ga.cwiseProduct(gb).sum() / (na * nb);
}

}  // namespace

SpikeStackTape spike_stack_forward(const MlpNetwork& net, const Matrix& input,
                                   Scalar u_thr) {
  if (input.rows() != net.input_dim())
    throw std::invalid_argument("spike_stack_forward: input dim mismatch");
  SpikeStackTape tape;
  tape.input = input;
  Matrix a = input;
  for (int l = 0; l + 1 < net.num_layers(); ++l) {
    Matrix pre = (net.weights[l] * a).colwise() + net.biases[l];
    Matrix x = pre.array() - u_thr;
    a = (x.array() > 0.0).cast<Scalar>().matrix();
    tape.x.push_back(std::move(x));
    tape.act.push_back(a);
  }
  return tape;
}

MlpGrads spike_stack_backward(const MlpNetwork& net, const SpikeStackTape& tape,
                              const Matrix& loss_grads, Scalar k) {
  const int last = net.num_layers() - 1;
  if (loss_grads.rows() != net.output_dim() ||
      loss_grads.cols() != tape.input.cols())
    throw std::invalid_argument("spike_stack_backward: loss_grads mismatch");

  MlpGrads g = zero_grads(net);
  Matrix delta = loss_grads;  // output layer is linear
  for (int l = last; l >= 0; --l) {
    const Matrix& below = (l == 0) ? tape.input : tape.act[l - 1];
    g.weights[l] = delta * below.transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = net.weights[l].transpose() * delta;
    delta = back.cwiseProduct(
        surrogate_grad(tape.x[l - 1].array(), k).matrix());
  }
  return g;
}

std::vector<LayerGradStats> layer_gradient_magnitudes(const MlpNetwork& net,
                                                      const DiagBatch& batch,
                                                      Scalar k, Scalar u_thr) {
  const SpikeStackTape tape = spike_stack_forward(net, batch.inputs, u_thr);
  const MlpGrads g = spike_stack_backward(net, tape, batch.loss_grads, k);
  std::vector<LayerGradStats> stats;
  for (int l = 0; l < net.num_layers(); ++l) {
    LayerGradStats s;
    s.layer_index = l;
    s.mean_abs_grad = g.weights[l].cwiseAbs().mean();
    s.zero_fraction =
        static_cast<Scalar>((g.weights[l].array() == 0.0).count()) /
        static_cast<Scalar>(g.weights[l].size());
    stats.push_back(s);
  }
  return stats;
}

std::vector<Scalar> gradient_cosine_similarity(const MlpNetwork& net,
                                               const DiagBatch& batch,
                                               Scalar k_shallow, Scalar k_ref,
                                               Scalar u_thr) {
  const SpikeStackTape tape = spike_stack_forward(net, batch.inputs, u_thr);
  const MlpGrads ga = spike_stack_backward(net, tape, batch.loss_grads, k_shallow);
  const MlpGrads gb = spike_stack_backward(net, tape, batch.loss_grads, k_ref);
  std::vector<Scalar> cos;
  for (int l = 0; l < net.num_layers(); ++l)
    cos.push_back(cosine_or_nan(ga, gb, l));
  return cos;
}

std::vector<SlopeSweepRow> run_slope_sweep(const SlopeSweepConfig& cfg) {
  const int num_layers = cfg.hidden_layers + 1;
  const int ns = static_cast<int>(cfg.slopes.size());

  std::vector<std::vector<Scalar>> mag(ns, std::vector<Scalar>(num_layers, 0));
  std::vector<std::vector<Scalar>> zf(ns, std::vector<Scalar>(num_layers, 0));
  std::vector<std::vector<Scalar>> cs(ns, std::vector<Scalar>(num_layers, 0));
  std::vector<std::vector<long>> cs_n(ns, std::vector<long>(num_layers, 0));

  for (int trial = 0; trial < cfg.trials; ++trial) {
    RandomStream rng(split_seed(cfg.seed, static_cast<std::uint64_t>(trial)));
    MlpNetwork net = make_probe_net(cfg, rng);
    DiagBatch batch;
    batch.inputs = Matrix(cfg.input_dim, 1);
    for (int i = 0; i < cfg.input_dim; ++i)
      batch.inputs(i, 0) = rng.uniform(cfg.input_lo, cfg.input_hi);
    batch.loss_grads = Matrix(cfg.output_dim, 1);
    for (int i = 0; i < cfg.output_dim; ++i)
      batch.loss_grads(i, 0) = rng.uniform(-1.0, 1.0);

    const SpikeStackTape tape =
        spike_stack_forward(net, batch.inputs, cfg.u_thr);
    const MlpGrads g_ref =
        spike_stack_backward(net, tape, batch.loss_grads, cfg.k_ref);

    for (int si = 0; si < ns; ++si) {
      const MlpGrads g =
          spike_stack_backward(net, tape, batch.loss_grads, cfg.slopes[si]);
      for (int l = 0; l < num_layers; ++l) {
        mag[si][l] += g.weights[l].cwiseAbs().mean();
        zf[si][l] +=
            static_cast<Scalar>((g.weights[l].array() == 0.0).count()) /
            static_cast<Scalar>(g.weights[l].size());
        const Scalar c = cosine_or_nan(g, g_ref, l);
        if (!std::isnan(c)) {
          cs[si][l] += c;
          ++cs_n[si][l];
        }
      }
    }
  }

  std::vector<SlopeSweepRow> rows;
  for (int si = 0; si < ns; ++si) {
    for (int l = 0; l < num_layers; ++l) {
      SlopeSweepRow r;
      r.slope = cfg.slopes[si];
      r.layer = l;
      r.mean_abs_grad = mag[si][l] / cfg.trials;
      r.zero_fraction = zf[si][l] / cfg.trials;
      r.cosine_to_ref = cs_n[si][l] > 0
                            ? cs[si][l] / static_cast<Scalar>(cs_n[si][l])
                            : std::numeric_limits<Scalar>::quiet_NaN();
      rows.push_back(r);
    }
  }
  return rows;
}

void write_slope_sweep_csv(const std::string& path,
                           const std::vector<SlopeSweepRow>& rows) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_slope_sweep_csv: cannot write " + path);
  out << "slope,layer,mean_abs_grad,zero_fraction,cosine_to_ref\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g,%.17g\n", r.slope,
                  r.layer, r.mean_abs_grad, r.zero_fraction, r.cosine_to_ref);
    out << buf;
  }
}

}  // namespace spikerl
