// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "prgds/rng.hpp"

namespace prgds {

// log of the modified Bessel function of the first kind I_v(x), v > -1,
// x >= 0, by adaptive ascending series in log space.
double log_bessel_i(double order, double x);

// log of the confluent hypergeometric function 1F1(a; b; z) for a, b, z > 0.
double log_hyp1f1(double a, double b, double z);

// log-space add: log(exp(a) + exp(b)).
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// ---------------------------------------------------------------------------
// Bessel distribution on {0, 1, 2, ...}:
//   P(n) = (scale/2)^(2n+order) / (n! Gamma(n+order+1) I_order(scale))
// Arises as the conditional of a Poisson shape increment given the gamma
// value it feeds.

struct BesselParams {
  double order;  // > -1
  double scale;  // >= 0; scale 0 degenerates to a point mass at 0
};

void validate(const BesselParams& p);
double bessel_log_pmf(const BesselParams& p, long n);
long bessel_mode(const BesselParams& p);

// ---------------------------------------------------------------------------
// Shifted confluent hypergeometric (SCH) distribution on {1, 2, 3, ...}:
//   P(h) = zeta^h Gamma(m+h) / (h! Gamma(h)) / (zeta m! 1F1(m+1; 2; zeta))
// Arises as the conditional of the Poisson shape given downstream counts
// with the gamma value marginalized out.

struct SchParams {
  long count;   // m >= 1, the observed downstream total
  double zeta;  // >= 0; zeta 0 degenerates to a point mass at 1
};

void validate(const SchParams& p);
double sch_log_pmf(const SchParams& p, long h);
long sch_mode(const SchParams& p);

// ---------------------------------------------------------------------------
// Randomized gamma of the first type: the continuous marginal of a gamma
// variable whose shape is shape_offset plus a Poisson(intensity) increment,
// with rate `rate`. shape_offset 0 puts an atom of mass exp(-intensity)
// at exactly zero.

struct Rg1Params {
  double shape_offset;  // >= 0
  double intensity;     // >= 0
  double rate;          // > 0
};

void validate(const Rg1Params& p);

// Density only exists for shape_offset > 0; for shape_offset 0 the mixed
// atom-plus-density representation must be used instead (domain error).
double rg1_log_pdf(const Rg1Params& p, double value);

template <class G>
double rg1_sample(const Rg1Params& p, G& rng) {
  validate(p);
  const long h = sample_poisson(p.intensity, rng);
  return sample_gamma(p.shape_offset + static_cast<double>(h), p.rate, rng);
}

// ---------------------------------------------------------------------------
// Inverse-CDF table for a unimodal pmf, built outward from the mode in
// linear space with masses relative to the mode. Exact up to floating
// truncation wherever relative mass exceeds ~1e-17; avoids evaluating the
// normalizer per draw.

class PmfTable {
 public:
  template <class RatioFn>
  PmfTable(long support_min, long mode, RatioFn ratio) {
    static constexpr double kCut = 1e-17;
    std::vector<double> down;
    double mass = 1.0;
    for (long n = mode; n > support_min; --n) {
      mass /= ratio(n - 1);
      if (!(mass > kCut) || !std::isfinite(mass)) break;
      down.push_back(mass);
    }
    lo_ = mode - static_cast<long>(down.size());
    std::vector<double> pmf(down.rbegin(), down.rend());
    pmf.push_back(1.0);
    mass = 1.0;
    for (long n = mode;; ++n) {
      mass *= ratio(n);
      if (!(mass > kCut)) break;
      pmf.push_back(mass);
    }
    cdf_.resize(pmf.size());
    double acc = 0.0;
    for (size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      cdf_[i] = acc;
    }
  }

  template <class G>
  long draw(G& rng) const {
    const double u = sample_uniform(rng) * cdf_.back();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return lo_ + static_cast<long>(it - cdf_.begin());
  }

  long support_lo() const { return lo_; }
  size_t width() const { return cdf_.size(); }

 private:
  long lo_ = 0;
  std::vector<double> cdf_;
};

// Reusable samplers; build the table once, draw many times.

class BesselSampler {
 public:
  explicit BesselSampler(const BesselParams& p);
  template <class G>
  long operator()(G& rng) const {
    if (degenerate_) return 0;
    return table_.draw(rng);
  }

 private:
  bool degenerate_;
  PmfTable table_{0, 0, [](long) { return 0.0; }};
};

class SchSampler {
 public:
  explicit SchSampler(const SchParams& p);
  template <class G>
  long operator()(G& rng) const {
    if (degenerate_) return 1;
    return table_.draw(rng);
  }

 private:
  bool degenerate_;
  PmfTable table_{1, 1, [](long) { return 0.0; }};
};

template <class G>
long bessel_sample(const BesselParams& p, G& rng) {
  return BesselSampler(p)(rng);
}

template <class G>
long sch_sample(const SchParams& p, G& rng) {
  return SchSampler(p)(rng);
}

// ---------------------------------------------------------------------------
// Posterior of the Poisson shape increment h in the chain
//   m ~ Pois(theta * obs_coef), theta ~ Gam(eps + h, theta_rate), h ~ Pois(h_rate).
//
// With eps > 0 the conditional given theta is Bessel(eps - 1,
// 2 sqrt(theta * theta_rate * h_rate)). With eps == 0 that chain has an
// absorbing state at h == 0, so theta must be marginalized out, giving
// Pois(zeta) for m == 0 and SCH(m, zeta) for m >= 1 with
// zeta = h_rate * theta_rate / (obs_coef + theta_rate). The caller
// acknowledges which regime it is in via `theta_marginalized`.

template <class G>
long pgp_posterior_h(long m, bool theta_marginalized, double eps, double theta,
                     double h_rate, double theta_rate, double obs_coef, G& rng) {
  if (!(h_rate >= 0.0) || !(theta_rate > 0.0) || !(obs_coef >= 0.0)) {
    throw std::domain_error("pgp_posterior_h: rates must be nonnegative, theta_rate > 0");
  }
  if (!theta_marginalized) {
    if (!(eps > 0.0)) {
      throw std::domain_error(
          "pgp_posterior_h: eps == 0 requires theta marginalized (absorbing state at h == 0)");
    }
    if (!(theta >= 0.0)) throw std::domain_error("pgp_posterior_h: theta must be >= 0");
    return bessel_sample(BesselParams{eps - 1.0, 2.0 * std::sqrt(theta * theta_rate * h_rate)},
                         rng);
  }
  if (eps != 0.0) {
    throw std::domain_error("pgp_posterior_h: marginalized form requires eps == 0");
  }
  const double zeta = h_rate * theta_rate / (obs_coef + theta_rate);
  if (m == 0) return sample_poisson(zeta, rng);
  if (m < 0) throw std::domain_error("pgp_posterior_h: m must be >= 0");
  return sch_sample(SchParams{m, zeta}, rng);
}

}  // namespace prgds
