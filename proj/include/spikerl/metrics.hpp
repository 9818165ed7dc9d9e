#pragma once

#include <vector>

#include "spikerl/networks.hpp"
#include "spikerl/types.hpp"

namespace spikerl {

// Dense synaptic operations for one inference pass: every weight is used
// once, so this is the sum of consecutive layer-size products.
long count_dense_synops(const std::vector<int>& layer_sizes);

// Spike activity of the two hidden layers over a replayed observation
// sequence. Sparsity = 1 - spikes / (neurons * steps).
struct SparsityReport {
  Scalar layer1 = 0.0;
  Scalar layer2 = 0.0;
  Scalar overall = 0.0;
  long spikes1 = 0;
  long spikes2 = 0;
  long steps = 0;
};

SparsityReport measure_activation_sparsity(
    const SnnPolicy& policy, const std::vector<Vector>& observations);

// Operation counts when silent presynaptic neurons cost nothing.
// presyn_sparsity[l] is the sparsity of the activity entering weight
// layer l (0 for a continuous input). The encoder layer counts as
// multiply-accumulates when encoder_is_mac; everything downstream of a
// spiking layer is accumulate-only.
struct EffectiveOps {
  Scalar macs = 0.0;
  Scalar acs = 0.0;
};

EffectiveOps effective_ops(const std::vector<int>& layer_sizes,
                           const std::vector<Scalar>& presyn_sparsity,
                           bool encoder_is_mac = true);

// Convenience: one uniform sparsity for every spiking layer, dense input.
EffectiveOps effective_ops_uniform(const std::vector<int>& layer_sizes,
                                   Scalar activation_sparsity,
                                   bool encoder_is_mac = true);

// Per-event energy model (picojoules).
struct EnergyModel {
  Scalar p_syn_pj = 23.6;    // synaptic event
  Scalar p_weight_pj = 1.7;  // weight lookup / accumulate
  Scalar p_update_pj = 81.0; // neuron state update
};

// Energy per inference pass in millijoules for a spiking network with the
// given layer sizes (input, hidden..., output) and uniform hidden-layer
// activation sparsity. Hidden layers pay a state update plus a weight
// access per incoming synapse; spike handling is discounted by sparsity;
// the linear readout pays weight accesses only.
Scalar estimate_energy_mj(const std::vector<int>& layer_sizes,
                          Scalar activation_sparsity,
                          const EnergyModel& model = EnergyModel{});

// Deployed memory footprint in KB: parameters at bytes_per_param, plus
// two state variables per hidden neuron (membrane and spike) when spiking.
Scalar footprint_kb(const std::vector<int>& layer_sizes, bool spiking,
                    Scalar bytes_per_param = 4.0);

// Everything the cost tables need for one policy on one trajectory.
// eff_macs/eff_acs use the measured per-layer sparsity; eff_acs_uniform
// applies the single overall sparsity to every spiking layer instead.
// Invariant: eff_macs + eff_acs <= dense_synops.
struct OpsReport {
  Scalar footprint_kb = 0.0;
  Scalar activation_sparsity = 0.0;
  long dense_synops = 0;
  Scalar eff_macs = 0.0;
  Scalar eff_acs = 0.0;
  Scalar eff_acs_uniform = 0.0;
  Scalar energy_mj = 0.0;
  SparsityReport sparsity;
};

OpsReport build_ops_report(const SnnPolicy& policy,
                           const std::vector<Vector>& observations,
                           Scalar bytes_per_param = 4.0);

}  // namespace spikerl
