#pragma once

#include <stdexcept>

#include "spikerl/surrogate.hpp"
#include "spikerl/types.hpp"

namespace spikerl {

// State of one layer of leaky integrate-and-fire neurons with soft reset.
struct LifLayerState {
  Vector membrane;  // potential after the previous step's reset
  Vector spikes;    // output of the previous step

  explicit LifLayerState(int n = 0)
      : membrane(Vector::Zero(n)), spikes(Vector::Zero(n)) {}

  void reset() {
    membrane.setZero();
    spikes.setZero();
  }
  int size() const { return static_cast<int>(membrane.size()); }
};

// One soft-reset step. The membrane is charged first, the threshold test is
// applied to the post-charge potential (strict inequality), and firing
// subtracts the threshold once:
//   pre  = beta * U + I
//   s    = pre > u_thr ? 1 : 0
//   U'   = pre - s * u_thr
// Returns the post-charge potential as well; backward passes need it.
struct LifStepResult {
  Vector spikes;
  Vector membrane;      // after reset
  Vector pre_membrane;  // after charge, before reset
};

inline LifStepResult lif_step(const Vector& membrane, const Vector& current,
                              Scalar beta, Scalar u_thr) {
  if (membrane.size() != current.size())
    throw std::invalid_argument("lif_step: membrane/current size mismatch");
  LifStepResult r;
  r.pre_membrane = beta * membrane + current;
  r.spikes = (r.pre_membrane.array() > u_thr).cast<Scalar>();
  r.membrane = r.pre_membrane - u_thr * r.spikes;
  return r;
}

// Smooth stand-in for the Heaviside spike used only by gradient checks:
// the antiderivative of surrogate_grad, offset so the value at threshold
// is 1/2. Its exact derivative is surrogate_grad(x, k).
inline Scalar smooth_spike(Scalar x, Scalar k) {
  return 0.5 + x / (1.0 + k * std::abs(x));
}

inline LifStepResult lif_step_smooth(const Vector& membrane,
                                     const Vector& current, Scalar beta,
                                     Scalar u_thr, Scalar k) {
  if (membrane.size() != current.size())
    throw std::invalid_argument("lif_step: membrane/current size mismatch");
  LifStepResult r;
  r.pre_membrane = beta * membrane + current;
  r.spikes = r.pre_membrane.unaryExpr(
      [&](Scalar u) { return smooth_spike(u - u_thr, k); });
  r.membrane = r.pre_membrane - u_thr * r.spikes;
  return r;
}

}  // namespace spikerl
