#include <doctest.h>

#include "spikerl/metrics.hpp"

using namespace spikerl;

TEST_CASE("dense synop counts for the pinned architectures") {
  CHECK(count_dense_synops({18, 256, 128, 4}) == 37888);
  CHECK(count_dense_synops({146, 64, 64, 4}) == 13696);
  CHECK(count_dense_synops({7}) == 0);
  CHECK(count_dense_synops({}) == 0);
}

TEST_CASE("effective ops: encoder is dense MAC work, spiking layers scale") {
  auto ops = effective_ops_uniform({18, 256, 128, 4}, 0.79);
  CHECK(ops.macs == doctest::Approx(4608.0).epsilon(1e-12));
  CHECK(ops.acs ==
        doctest::Approx(0.21 * (256.0 * 128.0 + 128.0 * 4.0)).epsilon(1e-12));
  CHECK(ops.macs + ops.acs <= 37888.0);
}

TEST_CASE("effective ops edge sparsities") {
  auto none = effective_ops_uniform({18, 256, 128, 4}, 0.0);
  CHECK(none.macs + none.acs == doctest::Approx(37888.0).epsilon(1e-12));
  auto full = effective_ops_uniform({18, 256, 128, 4}, 1.0);
  CHECK(full.acs == 0.0);
  CHECK(full.macs == doctest::Approx(4608.0).epsilon(1e-12));
}

TEST_CASE("effective ops validates inputs") {
  CHECK_THROWS_AS(effective_ops({18, 4}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(effective_ops({18, 4}, {1.5}), std::invalid_argument);
}

TEST_CASE("energy estimate reproduces the reference controller figure") {
  // 18-256-128-4 at sparsity 0.79:
  //   256*(81 + 18*1.7) + 23.6*0.21*256
  // + 128*(81 + 256*1.7) + 23.6*0.21*128
  // + 4*128*1.7                      = 97416.704 pJ
  const Scalar e = estimate_energy_mj({18, 256, 128, 4}, 0.79);
  CHECK(e == doctest::Approx(9.7416704e-5).epsilon(1e-9));
  CHECK(std::abs(e / 9.7e-5 - 1.0) < 0.01);
}

TEST_CASE("energy is linear in each per-event cost") {
  const std::vector<int> sizes = {18, 256, 128, 4};
  EnergyModel m;
  const Scalar base = estimate_energy_mj(sizes, 0.79, m);
  EnergyModel doubled = m;
  doubled.p_syn_pj *= 2.0;
  doubled.p_weight_pj *= 2.0;
  doubled.p_update_pj *= 2.0;
  CHECK(estimate_energy_mj(sizes, 0.79, doubled) ==
        doctest::Approx(2.0 * base).epsilon(1e-12));

  // superposition: evaluate each cost separately and sum
  EnergyModel only_syn{m.p_syn_pj, 0.0, 0.0};
  EnergyModel only_w{0.0, m.p_weight_pj, 0.0};
  EnergyModel only_u{0.0, 0.0, m.p_update_pj};
  const Scalar sum = estimate_energy_mj(sizes, 0.79, only_syn) +
                     estimate_energy_mj(sizes, 0.79, only_w) +
                     estimate_energy_mj(sizes, 0.79, only_u);
  CHECK(sum == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("full sparsity removes all spike-event energy") {
  EnergyModel m;
  EnergyModel no_syn = m;
  no_syn.p_syn_pj = 0.0;
  CHECK(estimate_energy_mj({18, 256, 128, 4}, 1.0, m) ==
        doctest::Approx(estimate_energy_mj({18, 256, 128, 4}, 1.0, no_syn))
            .epsilon(1e-12));
}

TEST_CASE("activation sparsity of a silent network is one") {
  RandomStream rng(3);
  SnnPolicy p = make_snn_policy(3, 8, 8, 2, rng);
  p.from_flat(Vector::Zero(p.param_count()));
  std::vector<Vector> obs(10, Vector::Zero(3));
  auto rep = measure_activation_sparsity(p, obs);
  CHECK(rep.layer1 == 1.0);
  CHECK(rep.layer2 == 1.0);
  CHECK(rep.overall == 1.0);
}

TEST_CASE("activation sparsity counts spikes it can see") {
  // encoder drives every neuron over threshold each step -> sparsity 0
  SnnPolicy p;
  p.w_enc = Matrix::Constant(4, 2, 3.0);
  p.b_enc = Vector::Zero(4);
  p.w_hid = Matrix::Constant(4, 4, 3.0);
  p.b_hid = Vector::Zero(4);
  p.w_dec = Matrix::Constant(1, 4, 1.0);
  p.b_dec = Vector::Zero(1);
  p.lif1 = LifLayerState(4);
  p.lif2 = LifLayerState(4);
  std::vector<Vector> obs(5, Vector::Ones(2));
  auto rep = measure_activation_sparsity(p, obs);
  CHECK(rep.layer1 == 0.0);
  CHECK(rep.layer2 == 0.0);
  CHECK(rep.spikes1 == 20);
}

TEST_CASE("memory footprint scales as expected") {
  CHECK(footprint_kb({}, false) == 0.0);
  CHECK(footprint_kb({5}, true) == 0.0);

  // params * 4 bytes / 1024
  const Scalar mlp = footprint_kb({10, 20, 5}, false);
  CHECK(mlp == doctest::Approx((10 * 20 + 20 + 20 * 5 + 5) * 4.0 / 1024.0)
                   .epsilon(1e-12));

  // spiking adds two state words per hidden neuron
  const Scalar snn = footprint_kb({18, 256, 128, 4}, true);
  const Scalar params = 18 * 256 + 256 + 256 * 128 + 128 + 128 * 4 + 4;
  CHECK(snn == doctest::Approx((params + 2 * (256 + 128)) * 4.0 / 1024.0)
                   .epsilon(1e-12));
  // order of magnitude of the reference controller (~158 kb)
  CHECK(snn > 100.0);
  CHECK(snn < 200.0);

  // doubling widths roughly quadruples the dominant layer cost
  const Scalar small = footprint_kb({64, 64, 4}, false);
  const Scalar big = footprint_kb({128, 128, 4}, false);
  CHECK(big / small > 3.0);
  CHECK(big / small < 4.5);
}
