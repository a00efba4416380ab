// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>

#include "prgds/errors.hpp"

namespace prgds {

using Rng = std::mt19937_64;

inline uint64_t hash64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator used for per-entry streams in the parallel
// allocation kernels. Each (phase key, entry index) pair gets its own
// stream, so serial and parallel execution produce identical draws.
class SplitMix64 {
 public:
  using result_type = uint64_t;
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<uint64_t>::max(); }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
};

inline SplitMix64 entry_stream(uint64_t phase_key, uint64_t entry_index) {
  return SplitMix64(hash64(phase_key ^ hash64(entry_index)));
}

// Gamma draw parameterized by rate. Shape exactly zero yields exactly zero,
// matching the convention that a gamma variable with zero shape is zero
// almost surely.
template <class G>
double sample_gamma(double shape, double rate, G& rng) {
  if (shape == 0.0) return 0.0;
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("sample_gamma: shape must be >= 0 and rate > 0");
  }
  std::gamma_distribution<double> d(shape, 1.0 / rate);
  return d(rng);
}

template <class G>
long sample_poisson(double mean, G& rng) {
  if (mean == 0.0) return 0;
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw NumericError("sample_poisson: mean must be finite and >= 0");
  }
  std::poisson_distribution<long> d(mean);
  return d(rng);
}

template <class G>
long sample_binomial(long n, double p, G& rng) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<long> d(n, p);
  return d(rng);
}

template <class G>
double sample_uniform(G& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

// Multinomial draw by sequential binomial thinning, O(K). Components with
// zero weight are skipped and receive exactly zero. A positive total with
// all-zero weights is a model inconsistency (a positive count cannot be
// allocated to a zero rate).
template <class G>
void sample_multinomial(long total, std::span<const double> weights,
                        std::span<long> out, G& rng) {
  const size_t k_count = weights.size();
  for (size_t k = 0; k < k_count; ++k) out[k] = 0;
  if (total == 0) return;
  double wsum = 0.0;
  size_t last_positive = k_count;
  for (size_t k = 0; k < k_count; ++k) {
    if (weights[k] > 0.0) {
      wsum += weights[k];
      last_positive = k;
    }
  }
  if (!(wsum > 0.0) || !std::isfinite(wsum)) {
    throw NumericError("sample_multinomial: positive count with no positive weight");
  }
  long rem = total;
  for (size_t k = 0; k < k_count && rem > 0; ++k) {
    if (weights[k] <= 0.0) continue;
    if (k == last_positive) {
      out[k] += rem;
      rem = 0;
      break;
    }
    const double p = weights[k] / wsum;
    const long draw = sample_binomial(rem, p, rng);
    out[k] = draw;
    rem -= draw;
    wsum -= weights[k];
    if (wsum <= 0.0) {  // fp drift; dump the remainder on the last component
      out[last_positive] += rem;
      rem = 0;
    }
  }
  if (rem > 0) out[last_positive] += rem;
}

// Dirichlet draw by gamma normalization. With very small concentrations the
// gamma draws can all underflow to zero; in that case redraw in log space
// using log G(a) = log G(a+1) + log(U)/a and normalize by the max.
template <class G>
void sample_dirichlet(std::span<const double> alpha, std::span<double> out, G& rng) {
  const size_t n = alpha.size();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = sample_gamma(alpha[i], 1.0, rng);
    total += out[i];
  }
  if (total > 0.0 && std::isfinite(total)) {
    for (size_t i = 0; i < n; ++i) out[i] /= total;
    return;
  }
  std::vector<double> lg(n);
  double lg_max = -std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (size_t i = 0; i < n; ++i) {
    const double boosted = sample_gamma(alpha[i] + 1.0, 1.0, rng);
    double u = unif(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    lg[i] = std::log(boosted) + std::log(u) / alpha[i];
    lg_max = std::max(lg_max, lg[i]);
  }
  if (!std::isfinite(lg_max)) {
    throw NumericError("sample_dirichlet: degenerate log-space draw");
  }
  total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::exp(lg[i] - lg_max);
    total += out[i];
  }
  for (size_t i = 0; i < n; ++i) out[i] /= total;
}

}  // namespace prgds
