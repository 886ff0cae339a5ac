#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace feasc {

/// Mixes (seed, a, b) into a new 64-bit seed with the splitmix64 finalizer.
/// Per-sample augmentation seeds are derive_seed(global_seed, epoch, sample_index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Seeded generator with fixed, library-independent conversions so that
/// draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

}  // namespace feasc
