#pragma once

#include <cstdint>

namespace smd {

// Deterministic splitmix64 generator with Box-Muller normals. Streams derived
// from the same seed produce identical bytes on every platform, which the
// reproducibility contracts rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  long uniform_int(long lo, long hi);  // inclusive bounds
  double normal();
  bool bernoulli(double p);

  // Independent substream; stable under calls made on *this.
  Rng stream(std::uint64_t id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double cached_ = 0;
  bool has_cached_ = false;
};

}  // namespace smd
