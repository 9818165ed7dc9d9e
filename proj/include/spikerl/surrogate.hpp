#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spikerl/types.hpp"

namespace spikerl {

// Derivative of the fast sigmoid normalized by its slope:
//   d/dx [ x / (1 + k|x|) ] = 1 / (1 + k|x|)^2
// Used in place of the Heaviside derivative during backpropagation,
// evaluated at the distance of the membrane from the threshold.
template <class S>
inline S surrogate_grad(S x, S k) {
  const S d = S(1) + k * std::abs(x);
  return S(1) / (d * d);
}

// Elementwise expression overload.
template <class Derived>
inline auto surrogate_grad(const Eigen::ArrayBase<Derived>& x,
                           typename Derived::Scalar k) {
  using S = typename Derived::Scalar;
  return (S(1) + k * x.abs()).square().inverse();
}

enum class SlopeMode { fixed, interval, adaptive };

// Slope-of-surrogate schedule. Three modes:
//   fixed:    k stays at k0.
//   interval: k jumps at listed epochs (defaults double k every 100 epochs).
//   adaptive: k follows a running window of normalized reward scores and
//             their first differences,
//               k = 0.5 * mean(scores) + 0.5 * mean(score diffs),
//             clamped to [k_min, k_max].
struct SlopeSchedule {
  SlopeMode mode = SlopeMode::adaptive;
  Scalar k = 2.0;
  Scalar k_min = 1.0;
  Scalar k_max = 100.0;
  int window = 10;

  // interval mode: (epoch, k) pairs, epochs ascending.
  std::vector<std::pair<int, Scalar>> interval_points;

  // adaptive mode: raw episode rewards are normalized linearly from
  // [score_floor, score_ceil] onto [0, 100] before entering the window.
  Scalar score_floor = -200.0;
  Scalar score_ceil = 450.0;

  std::deque<Scalar> scores;
  std::deque<Scalar> diffs;
  bool has_prev = false;
  Scalar prev_score = 0.0;
};

inline SlopeSchedule make_fixed_slope(Scalar k) {
  SlopeSchedule s;
  s.mode = SlopeMode::fixed;
  s.k = k;
  return s;
}

// Default interval plan: k doubles every `period` epochs starting at k0,
// clamped at k_max.
inline SlopeSchedule make_interval_slope(Scalar k0 = 2.0, int period = 100,
                                         Scalar k_max = 100.0) {
  SlopeSchedule s;
  s.mode = SlopeMode::interval;
  s.k = k0;
  s.k_max = k_max;
  Scalar k = k0;
  int epoch = 0;
  while (true) {
    s.interval_points.emplace_back(epoch, std::min(k, k_max));
    if (k >= k_max) break;
    k *= 2.0;
    epoch += period;
  }
  return s;
}

inline SlopeSchedule make_adaptive_slope(Scalar k0 = 2.0) {
  SlopeSchedule s;
  s.mode = SlopeMode::adaptive;
  s.k = k0;
  return s;
}

// Map a raw mean episode reward onto the [0, 100] score scale.
inline Scalar normalize_slope_score(const SlopeSchedule& s, Scalar raw) {
  const Scalar t = (raw - s.score_floor) / (s.score_ceil - s.score_floor);
  return 100.0 * std::clamp(t, 0.0, 1.0);
}

// Feed one normalized score; returns the new clamped k. Only legal in
// adaptive mode. Tolerates out-of-range scores (the clamp handles them).
inline Scalar update_adaptive_slope(SlopeSchedule& s, Scalar score) {
  if (s.mode != SlopeMode::adaptive)
    throw std::logic_error(
        "update_adaptive_slope: schedule is not in adaptive mode");
  if (s.has_prev) {
    s.diffs.push_back(score - s.prev_score);
    if (static_cast<int>(s.diffs.size()) > s.window) s.diffs.pop_front();
  }
  s.prev_score = score;
  s.has_prev = true;
  s.scores.push_back(score);
  if (static_cast<int>(s.scores.size()) > s.window) s.scores.pop_front();

  Scalar score_mean = 0.0;
  for (Scalar v : s.scores) score_mean += v;
  score_mean /= static_cast<Scalar>(s.scores.size());
  Scalar diff_mean = 0.0;
  if (!s.diffs.empty()) {
    for (Scalar v : s.diffs) diff_mean += v;
    diff_mean /= static_cast<Scalar>(s.diffs.size());
  }
  s.k = std::clamp(0.5 * score_mean + 0.5 * diff_mean, s.k_min, s.k_max);
  return s.k;
}

// Advance fixed/interval schedules to an epoch; adaptive schedules are
// driven by update_adaptive_slope instead.
inline Scalar slope_for_epoch(SlopeSchedule& s, int epoch) {
  switch (s.mode) {
    case SlopeMode::fixed:
      return s.k;
    case SlopeMode::interval: {
      Scalar k = s.k;
      for (const auto& [e, v] : s.interval_points) {
        if (e <= epoch) k = v;
        else break;
      }
      s.k = std::clamp(k, s.k_min, s.k_max);
      return s.k;
    }
    case SlopeMode::adaptive:
      return s.k;
  }
  return s.k;
}

}  // namespace spikerl
