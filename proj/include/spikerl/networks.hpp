#pragma once

#include <cstdint>
#include <vector>

#include "spikerl/lif.hpp"
#include "spikerl/types.hpp"

namespace spikerl {

// ---------------------------------------------------------------- MLP ----

enum class Activation { rectifier, smooth_sigmoid };

// Dense feedforward network. Hidden layers use `activation`, the output
// layer is always linear.
struct MlpNetwork {
  std::vector<Matrix> weights;  // weights[l] maps layer l to layer l+1
  std::vector<Vector> biases;
  Activation activation = Activation::rectifier;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
  }
  int output_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
  }
  std::vector<int> layer_sizes() const;

  long param_count() const;
  Vector to_flat() const;
  void from_flat(const Vector& flat);
};

MlpNetwork make_mlp(const std::vector<int>& sizes, Activation activation,
                    RandomStream& rng);

// Columns of x are samples.
Matrix mlp_forward(const MlpNetwork& net, const Matrix& x);
Vector mlp_forward(const MlpNetwork& net, const Vector& x);

struct MlpTape {
  Matrix input;
  std::vector<Matrix> pre;  // pre-activations, one per layer
  std::vector<Matrix> act;  // post-activations; act.back() is the output
};

MlpTape mlp_forward_tape(const MlpNetwork& net, const Matrix& x);

struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  Vector to_flat() const;
  void scale(Scalar s);
  void add(const MlpGrads& other);
};

MlpGrads zero_grads(const MlpNetwork& net);

struct MlpBackwardResult {
  MlpGrads grads;
  Matrix input_grad;
};

// out_grad columns match the tape's samples. Gradients are summed over
// the batch (callers divide by the sample count they care about).
MlpBackwardResult mlp_backward(const MlpNetwork& net, const MlpTape& tape,
                               const Matrix& out_grad);

// -------------------------------------------------------------- policy ----

// Spiking controller: dense encoder producing input currents, two LIF
// layers, and a linear decoder reading the second layer's spikes. Carries
// persistent neuron state between act() calls until reset_state().
struct SnnPolicy {
  Matrix w_enc;  // obs -> h1 currents
  Vector b_enc;
  Matrix w_hid;  // h1 spikes -> h2 currents
  Vector b_hid;
  Matrix w_dec;  // h2 spikes -> actions
  Vector b_dec;
  Scalar beta = 0.9;
  Scalar u_thr = 1.0;
  Scalar slope = 2.0;  // surrogate slope k used for training

  LifLayerState lif1, lif2;

  int obs_dim() const { return static_cast<int>(w_enc.cols()); }
  int hidden1() const { return static_cast<int>(w_enc.rows()); }
  int hidden2() const { return static_cast<int>(w_hid.rows()); }
  int act_dim() const { return static_cast<int>(w_dec.rows()); }

  void reset_state();
  Vector act(const Vector& obs);  // one control step, advances state

  long param_count() const;
  Vector to_flat() const;
  void from_flat(const Vector& flat);
};

SnnPolicy make_snn_policy(int obs_dim, int h1, int h2, int act_dim,
                          RandomStream& rng, Scalar beta = 0.9,
                          Scalar u_thr = 1.0);

enum class ForwardMode { spiking_surrogate, smooth };

// Everything backward needs, recorded by the matching forward call.
struct GradientTape {
  ForwardMode mode = ForwardMode::spiking_surrogate;
  Scalar k = 0.0;  // slope used by a smooth forward
  std::vector<Vector> obs;
  std::vector<Vector> x1, s1;  // distance from threshold / spikes, layer 1
  std::vector<Vector> x2, s2;
  int length() const { return static_cast<int>(obs.size()); }
};

struct SnnForwardResult {
  std::vector<Vector> actions;
  GradientTape tape;
  LifLayerState final1, final2;
  long spike_count1 = 0;  // spiking mode only
  long spike_count2 = 0;
};

// Unrolls the network over a sequence from the given initial states
// (zero states when omitted). Does not touch the policy's persistent
// rollout state. In smooth mode the Heaviside is replaced by the
// antiderivative-consistent fast sigmoid at slope k (gradient checks only).
SnnForwardResult snn_forward_sequence(
    const SnnPolicy& policy, const std::vector<Vector>& observations,
    ForwardMode mode = ForwardMode::spiking_surrogate, Scalar smooth_k = 25.0,
    const LifLayerState* init1 = nullptr, const LifLayerState* init2 = nullptr);

struct SnnGrads {
  Matrix w_enc, w_hid, w_dec;
  Vector b_enc, b_hid, b_dec;

  Vector to_flat() const;
  void scale(Scalar s);
  void add(const SnnGrads& other);
};

SnnGrads zero_grads(const SnnPolicy& policy);

// Backpropagation through time over a recorded tape. output_grads[t] is
// dLoss/daction at step t; steps with warm_up_mask[t] == 0 inject zero
// loss gradient but still pass recurrent credit from later steps through
// their states. The surrogate factor is evaluated at slope k (smooth-mode
// tapes must be replayed with the slope they were recorded at). The reset
// path is differentiated in smooth mode and detached in spiking mode.
SnnGrads snn_backward_sequence(const SnnPolicy& policy,
                               const GradientTape& tape,
                               const std::vector<Vector>& output_grads,
                               const std::vector<std::uint8_t>& warm_up_mask,
                               Scalar k);

// ----------------------------------------------------------- utilities ----

// target <- tau * source + (1 - tau) * target
void soft_update(MlpNetwork& target, const MlpNetwork& source, Scalar tau);
void soft_update(SnnPolicy& target, const SnnPolicy& source, Scalar tau);

// Adam over a flat parameter vector.
struct Adam {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Vector m, v;
  long t = 0;

  void step(Vector& params, const Vector& grads);
};

}  // namespace spikerl
