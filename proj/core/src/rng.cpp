#include "aggload/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace aggload {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RngStream RngStream::derive(std::uint64_t tag) const {
  // Two finalizer rounds keep distinct (seed, tag) pairs well separated.
  return RngStream(splitmix64(splitmix64(seed_) ^ splitmix64(~tag)));
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // Box-Muller, cosine branch only: fixed cost of two uniforms per variate.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();  // log(0) guard; astronomically rare
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

long RngStream::binomial(long n, double p) {
  if (n < 0) throw std::invalid_argument("binomial: n must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial: p must lie in [0,1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;

  // Work with p <= 1/2 and flip at the end; keeps the inversion walk short
  // and (1-p)^n as large as possible.
  bool flipped = p > 0.5;
  double q = flipped ? 1.0 - p : p;

  double pmf = std::pow(1.0 - q, static_cast<double>(n));  // P(X = 0)
  if (pmf > 0.0) {
    double u = uniform();
    double cdf = pmf;
    long k = 0;
    double ratio = q / (1.0 - q);
    while (u > cdf && k < n) {
      // pmf(k+1) = pmf(k) * (n-k)/(k+1) * q/(1-q)
      pmf *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
      ++k;
      cdf += pmf;
    }
    return flipped ? n - k : k;
  }

  // (1-q)^n underflowed (enormous n): sum Bernoulli draws instead.
  long k = 0;
  for (long i = 0; i < n; ++i) k += (uniform() < q) ? 1 : 0;
  return flipped ? n - k : k;
}

std::vector<long> RngStream::multinomial(long n, const std::vector<double>& probs) {
  if (probs.empty()) throw std::invalid_argument("multinomial: empty probability vector");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("multinomial: negative probability");
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("multinomial: probabilities sum to zero");

  // Sequential conditional binomials: class j gets Binomial(remaining,
  // p_j / mass of classes >= j).
  std::vector<long> out(probs.size(), 0);
  long remaining = n;
  double mass = total;
  for (std::size_t j = 0; j + 1 < probs.size() && remaining > 0; ++j) {
    double cond = probs[j] / mass;
    if (cond > 1.0) cond = 1.0;
    long x = binomial(remaining, cond);
    out[j] = x;
    remaining -= x;
    mass -= probs[j];
    if (mass <= 0.0) break;
  }
  out.back() += remaining;
  return out;
}

}  // namespace aggload
