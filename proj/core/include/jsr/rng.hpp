#pragma once

#include <cstdint>

namespace jsr {

// Splittable counter-based generator (SplitMix64 core). A stream is fully
// determined by its (seed, stream) key: draws are identical across runs and
// thread counts, and distinct keys give independent streams, so parallel
// sample generation never depends on execution order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  // Independent stream keyed by (a, b) relative to this one.
  RngStream derive(std::uint64_t a, std::uint64_t b = 0) const;

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();   // N(0, 1)

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jsr
