#pragma once

#include <string>
#include <vector>

#include "spikerl/networks.hpp"
#include "spikerl/types.hpp"

namespace spikerl {

// Gradient health diagnostics for surrogate-trained networks: how the
// choice of slope k shapes per-layer gradient magnitude, the share of
// exactly-zero weight gradients, and the agreement (cosine) with the
// gradient a steep reference slope would produce on the same forward pass.
//
// The probe network is a deep feedforward stack of threshold units
// (Heaviside at u_thr, single step from rest) so the forward pass is
// independent of k; only the backward surrogate changes. MlpNetwork is
// used as the weight container, layer index 0 is closest to the input.

struct DiagBatch {
  Matrix inputs;      // columns are samples
  Matrix loss_grads;  // dLoss/doutput, same column count
};

struct LayerGradStats {
  int layer_index = 0;
  Scalar mean_abs_grad = 0.0;
  Scalar zero_fraction = 0.0;
  Scalar cosine_to_ref = 0.0;
};

struct SpikeStackTape {
  Matrix input;
  std::vector<Matrix> x;    // distance from threshold per hidden layer
  std::vector<Matrix> act;  // binary spikes per hidden layer
};

SpikeStackTape spike_stack_forward(const MlpNetwork& net, const Matrix& input,
                                   Scalar u_thr = 1.0);

// Weight/bias gradients under surrogate slope k on a recorded tape.
MlpGrads spike_stack_backward(const MlpNetwork& net, const SpikeStackTape& tape,
                              const Matrix& loss_grads, Scalar k);

// Per-layer mean |dL/dW| and exact-zero fraction for one probe batch.
std::vector<LayerGradStats> layer_gradient_magnitudes(const MlpNetwork& net,
                                                      const DiagBatch& batch,
                                                      Scalar k,
                                                      Scalar u_thr = 1.0);

// Per-layer cosine between the gradients at k_shallow and k_ref computed
// on the identical forward tape. Zero-norm vectors yield NaN (undefined).
std::vector<Scalar> gradient_cosine_similarity(const MlpNetwork& net,
                                               const DiagBatch& batch,
                                               Scalar k_shallow,
                                               Scalar k_ref = 100.0,
                                               Scalar u_thr = 1.0);

struct SlopeSweepConfig {
  std::vector<Scalar> slopes = {1, 2, 5, 10, 25, 50, 100};
  int trials = 100;
  int hidden_layers = 4;
  int neurons = 64;
  int input_dim = 64;
  int output_dim = 64;
  Scalar k_ref = 100.0;
  Scalar u_thr = 1.0;
  Scalar weight_gain = 3.0;  // init bound = gain / sqrt(fan_in)
  Scalar input_lo = -2.0;
  Scalar input_hi = 2.0;
  std::uint64_t seed = 7;
};

struct SlopeSweepRow {
  Scalar slope;
  int layer;
  Scalar mean_abs_grad;
  Scalar zero_fraction;
  Scalar cosine_to_ref;  // NaN-excluded trial average
};

// Fresh random init and probe batch per trial; stats averaged over trials.
std::vector<SlopeSweepRow> run_slope_sweep(const SlopeSweepConfig& cfg);

// Columns: slope,layer,mean_abs_grad,zero_fraction,cosine_to_ref
void write_slope_sweep_csv(const std::string& path,
                           const std::vector<SlopeSweepRow>& rows);

}  // namespace spikerl
