#include "spikerl/metrics.hpp"

#include <stdexcept>

namespace spikerl {

long count_dense_synops(const std::vector<int>& layer_sizes) {
  long ops = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    ops += static_cast<long>(layer_sizes[l]) * layer_sizes[l + 1];
  return ops;
}

SparsityReport measure_activation_sparsity(
    const SnnPolicy& policy, const std::vector<Vector>& observations) {
  SparsityReport rep;
  rep.steps = static_cast<long>(observations.size());
  if (rep.steps == 0) return rep;
  const SnnForwardResult fwd = snn_forward_sequence(policy, observations);
  rep.spikes1 = fwd.spike_count1;
  rep.spikes2 = fwd.spike_count2;
  const Scalar n1 = static_cast<Scalar>(policy.hidden1()) * rep.steps;
  const Scalar n2 = static_cast<Scalar>(policy.hidden2()) * rep.steps;
  rep.layer1 = 1.0 - rep.spikes1 / n1;
  rep.layer2 = 1.0 - rep.spikes2 / n2;
  rep.overall = 1.0 - (rep.spikes1 + rep.spikes2) / (n1 + n2);
  return rep;
}

EffectiveOps effective_ops(const std::vector<int>& layer_sizes,
                           const std::vector<Scalar>& presyn_sparsity,
                           bool encoder_is_mac) {
  if (presyn_sparsity.size() + 1 != layer_sizes.size())
    throw std::invalid_argument(
        "effective_ops: need one sparsity entry per weight layer");
  EffectiveOps ops;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const Scalar sp = presyn_sparsity[l];
    if (sp < 0.0 || sp > 1.0)
      throw std::invalid_argument("effective_ops: sparsity outside [0,1]");
    const Scalar dense =
        static_cast<Scalar>(layer_sizes[l]) * layer_sizes[l + 1];
    const Scalar active = (1.0 - sp) * dense;
    if (l == 0 && encoder_is_mac)
      ops.macs += active;
    else
      ops.acs += active;
  }
  return ops;
}

EffectiveOps effective_ops_uniform(const std::vector<int>& layer_sizes,
                                   Scalar activation_sparsity,
                                   bool encoder_is_mac) {
  std::vector<Scalar> presyn(layer_sizes.empty() ? 0 : layer_sizes.size() - 1,
                             activation_sparsity);
  if (!presyn.empty()) presyn[0] = 0.0;  // continuous input
  return effective_ops(layer_sizes, presyn, encoder_is_mac);
}

Scalar estimate_energy_mj(const std::vector<int>& layer_sizes,
                          Scalar activation_sparsity,
                          const EnergyModel& model) {
  if (layer_sizes.size() < 2) return 0.0;
  if (activation_sparsity < 0.0 || activation_sparsity > 1.0)
    throw std::invalid_argument("estimate_energy_mj: sparsity outside [0,1]");
  const std::size_t last = layer_sizes.size() - 1;
  Scalar pj = 0.0;
  for (std::size_t l = 1; l < last; ++l) {
    const Scalar n = layer_sizes[l];
    const Scalar fan_in = layer_sizes[l - 1];
    pj += n * (model.p_update_pj + fan_in * model.p_weight_pj);
    pj += model.p_syn_pj * (1.0 - activation_sparsity) * n;
  }
  pj += static_cast<Scalar>(layer_sizes[last]) * layer_sizes[last - 1] *
        model.p_weight_pj;
  return pj * 1e-9;
}

Scalar footprint_kb(const std::vector<int>& layer_sizes, bool spiking,
                    Scalar bytes_per_param) {
  if (layer_sizes.size() < 2) return 0.0;
  Scalar params = 0.0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    params += static_cast<Scalar>(layer_sizes[l]) * layer_sizes[l + 1] +
              layer_sizes[l + 1];
  Scalar bytes = params * bytes_per_param;
  if (spiking) {
    Scalar hidden = 0.0;
    for (std::size_t l = 1; l + 1 < layer_sizes.size(); ++l)
      hidden += layer_sizes[l];
    bytes += 2.0 * hidden * bytes_per_param;
  }
  return bytes / 1024.0;
}

OpsReport build_ops_report(const SnnPolicy& policy,
                           const std::vector<Vector>& observations,
                           Scalar bytes_per_param) {
  const std::vector<int> sizes = {policy.obs_dim(), policy.hidden1(),
                                  policy.hidden2(), policy.act_dim()};
  OpsReport r;
  r.sparsity = measure_activation_sparsity(policy, observations);
  r.activation_sparsity = r.sparsity.overall;
  r.dense_synops = count_dense_synops(sizes);
  const EffectiveOps eff =
      effective_ops(sizes, {0.0, r.sparsity.layer1, r.sparsity.layer2});
  r.eff_macs = eff.macs;
  r.eff_acs = eff.acs;
  r.eff_acs_uniform =
      effective_ops_uniform(sizes, r.activation_sparsity).acs;
  r.energy_mj = estimate_energy_mj(sizes, r.activation_sparsity);
  r.footprint_kb = footprint_kb(sizes, /*spiking=*/true, bytes_per_param);
  return r;
}

}  // namespace spikerl
