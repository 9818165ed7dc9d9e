#include <doctest.h>

#include <cmath>

#include "spikerl/surrogate.hpp"
#include "spikerl/types.hpp"

using namespace spikerl;

TEST_CASE("surrogate gradient pinned values") {
  CHECK(surrogate_grad(0.0, 7.0) == 1.0);
  CHECK(surrogate_grad(1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
  // (0.5, 100): 1 / 51^2
  CHECK(surrogate_grad(0.5, 100.0) ==
        doctest::Approx(1.0 / 2601.0).epsilon(1e-15));
}

TEST_CASE("surrogate gradient properties on random points") {
  RandomStream rng(123);
  for (int i = 0; i < 1000; ++i) {
    const Scalar x = rng.uniform(-10.0, 10.0);
    const Scalar k = rng.uniform(1.0, 100.0);
    const Scalar g = surrogate_grad(x, k);
    CHECK(g > 0.0);
    CHECK(g <= 1.0);
    CHECK(g == surrogate_grad(-x, k));  // even in x
    if (x != 0.0) {
      CHECK(surrogate_grad(x, k + 1.0) < g);          // decreasing in k
      CHECK(surrogate_grad(x * 1.5, k) < g);          // decreasing in |x|
    }
  }
}

TEST_CASE("surrogate gradient expression overload matches scalar") {
  Array x(4);
  x << -1.0, 0.0, 0.5, 3.0;
  Array g = surrogate_grad(x, 10.0);
  for (int i = 0; i < 4; ++i)
    CHECK(g[i] == doctest::Approx(surrogate_grad(x[i], 10.0)).epsilon(1e-15));
}

TEST_CASE("adaptive slope: flat zero scores clamp to k_min") {
  SlopeSchedule s = make_adaptive_slope(2.0);
  Scalar k = 0.0;
  for (int i = 0; i < 10; ++i) k = update_adaptive_slope(s, 0.0);
  CHECK(k == 1.0);
}

TEST_CASE("adaptive slope: constant score 100 settles at 50") {
  SlopeSchedule s = make_adaptive_slope(2.0);
  Scalar k = 0.0;
  for (int i = 0; i < 10; ++i) k = update_adaptive_slope(s, 100.0);
  CHECK(k == 50.0);
}

TEST_CASE("adaptive slope: improving ramp mixes level and trend") {
  // scores 0,20,...,180: mean 90, mean diff 20 -> 45 + 10 = 55 exactly
  SlopeSchedule s = make_adaptive_slope(2.0);
  Scalar k = 0.0;
  for (int i = 0; i < 10; ++i)
    k = update_adaptive_slope(s, static_cast<Scalar>(20 * i));
  CHECK(k == 55.0);
}

TEST_CASE("adaptive slope clamps at 100 for large score levels") {
  SlopeSchedule s = make_adaptive_slope(2.0);
  Scalar k = 0.0;
  for (int i = 0; i < 10; ++i) k = update_adaptive_slope(s, 200.0);
  CHECK(k == 100.0);
  SlopeSchedule s2 = make_adaptive_slope(2.0);
  for (int i = 0; i < 12; ++i) k = update_adaptive_slope(s2, 300.0);
  CHECK(k == 100.0);
}

TEST_CASE("adaptive slope window forgets old scores") {
  SlopeSchedule s = make_adaptive_slope(2.0);
  for (int i = 0; i < 30; ++i) update_adaptive_slope(s, 80.0);
  // after 10+ constant pushes only the constant remains in both windows
  const Scalar k = update_adaptive_slope(s, 80.0);
  CHECK(k == 40.0);
  CHECK(s.scores.size() == 10);
  CHECK(s.diffs.size() == 10);
}

TEST_CASE("update_adaptive_slope refuses non-adaptive schedules") {
  SlopeSchedule fixed = make_fixed_slope(5.0);
  CHECK_THROWS_AS(update_adaptive_slope(fixed, 10.0), std::logic_error);
}

TEST_CASE("fixed slope never moves") {
  SlopeSchedule s = make_fixed_slope(25.0);
  for (int e = 0; e < 500; e += 50) CHECK(slope_for_epoch(s, e) == 25.0);
}

TEST_CASE("interval slope doubles every period and saturates") {
  SlopeSchedule s = make_interval_slope(2.0, 100, 100.0);
  CHECK(slope_for_epoch(s, 0) == 2.0);
  CHECK(slope_for_epoch(s, 99) == 2.0);
  CHECK(slope_for_epoch(s, 100) == 4.0);
  CHECK(slope_for_epoch(s, 250) == 8.0);
  CHECK(slope_for_epoch(s, 500) == 64.0);
  CHECK(slope_for_epoch(s, 600) == 100.0);
  CHECK(slope_for_epoch(s, 10000) == 100.0);
}

TEST_CASE("interval slope sequence is reproducible") {
  SlopeSchedule a = make_interval_slope();
  SlopeSchedule b = make_interval_slope();
  for (int e = 0; e < 800; ++e)
    CHECK(slope_for_epoch(a, e) == slope_for_epoch(b, e));
}

TEST_CASE("score normalization maps the reward range onto [0,100]") {
  SlopeSchedule s = make_adaptive_slope();
  CHECK(normalize_slope_score(s, -200.0) == 0.0);
  CHECK(normalize_slope_score(s, 450.0) == 100.0);
  CHECK(normalize_slope_score(s, 125.0) ==
        doctest::Approx(50.0).epsilon(1e-12));
  // out-of-range rewards clamp
  CHECK(normalize_slope_score(s, -1000.0) == 0.0);
  CHECK(normalize_slope_score(s, 1000.0) == 100.0);
}
