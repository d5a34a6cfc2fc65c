#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gen3d {

// Deterministic random stream. All randomness in the project flows through
// this wrapper so runs are reproducible from a single seed; named substreams
// let independent stages (dataset, init, sampling) draw without interfering.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Derives a child seed by hashing the parent seed with a stream name.
  static uint64_t derive_seed(uint64_t seed, std::string_view name);
  static Rng substream(uint64_t seed, std::string_view name) {
    return Rng(derive_seed(seed, name));
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
  }

  // Standard normal via Box-Muller; avoids std::normal_distribution whose
  // output sequence is not pinned by the standard.
  double normal();

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gen3d
