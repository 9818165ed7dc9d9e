#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace spikerl {

using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

// splitmix64, used to derive independent seed streams from one master seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic random stream with distribution code owned by this project,
// so results do not depend on the standard library's distribution choices.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1).
  Scalar uniform() {
    return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53;
  }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method.
  Scalar normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    Scalar u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const Scalar m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(bits() % static_cast<std::uint64_t>(n));
  }

  Vector uniform_vector(int n, Scalar lo, Scalar hi) {
    Vector out(n);
    for (int i = 0; i < n; ++i) out[i] = uniform(lo, hi);
    return out;
  }

  Vector normal_vector(int n, Scalar stddev = 1.0) {
    Vector out(n);
    for (int i = 0; i < n; ++i) out[i] = stddev * normal();
    return out;
  }

 private:
  std::mt19937_64 engine_;
  Scalar spare_ = 0.0;
  bool has_spare_ = false;
};

// Named per-component streams derived from one master seed.
struct SeedStreams {
  std::uint64_t env;
  std::uint64_t init;
  std::uint64_t noise;
  std::uint64_t sampler;
};

inline SeedStreams seed_streams(std::uint64_t master) {
  return SeedStreams{split_seed(master, 0), split_seed(master, 1),
                     split_seed(master, 2), split_seed(master, 3)};
}

}  // namespace spikerl
