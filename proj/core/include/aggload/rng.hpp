#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace aggload {

// Deterministic random stream with portable output.
//
// The engine is std::mt19937_64, whose sequence is pinned by the standard,
// and every distribution below is implemented by hand on top of raw 64-bit
// draws.  Standard-library distributions are deliberately avoided: their
// algorithms are implementation-defined, and identical seeds must produce
// identical samples on every platform and standard library.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  // Child stream for an independent substream (worker, transformer,
  // dataset...).  Derivation is stateless: it depends only on this stream's
  // seed and the tag, never on how many draws were consumed.
  RngStream derive(std::uint64_t tag) const;

  // Raw 64 uniform bits.
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.  One engine draw.
  double uniform();

  // Standard normal via Box-Muller.  Always consumes exactly two engine
  // draws and never caches the second variate, so the draw count per call
  // is fixed.
  double normal();

  // Binomial(n, p) by inversion of the CDF (one uniform), falling back to
  // a Bernoulli sum when (1-p)^n underflows.
  long binomial(long n, double p);

  // Multinomial(n, probs) via the sequential conditional binomial method.
  std::vector<long> multinomial(long n, const std::vector<double>& probs);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace aggload
