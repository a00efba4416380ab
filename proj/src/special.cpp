// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/special.hpp"

#include <cmath>
#include <stdexcept>

#include "prgds/errors.hpp"

namespace prgds {

namespace {

constexpr long kMaxSeriesTerms = 10'000'000;

}  // namespace

double log_bessel_i(double order, double x) {
  if (!(order > -1.0) || !(x >= 0.0) || !std::isfinite(order) || !std::isfinite(x)) {
    throw std::domain_error("log_bessel_i: requires order > -1 and finite x >= 0");
  }
  if (x == 0.0) {
    if (order == 0.0) return 0.0;  // I_0(0) = 1
    return -std::numeric_limits<double>::infinity();
  }
  // I_v(x) = sum_{n>=0} (x/2)^(2n+v) / (n! Gamma(n+v+1)).
  // Accumulate in log space relative to the n = 0 term; successive term
  // ratio is q / ((n+1)(n+v+1)) with q = (x/2)^2, which eventually decays
  // geometrically, so stop once the ratio-bounded tail is negligible.
  const double log_half_x = std::log(0.5 * x);
  const double q = 0.25 * x * x;
  const double log_t0 = order * log_half_x - std::lgamma(order + 1.0);
  double log_term = 0.0;  // relative to t0
  double log_sum = 0.0;
  for (long n = 0; n < kMaxSeriesTerms; ++n) {
    const double ratio = q / ((static_cast<double>(n) + 1.0) * (static_cast<double>(n) + order + 1.0));
    log_term += std::log(ratio);
    if (log_term < log_sum + std::log(1e-18) && ratio < 0.5) break;
    log_sum = log_add(log_sum, log_term);
    if (n + 1 == kMaxSeriesTerms) {
      throw NumericError("log_bessel_i: series failed to converge");
    }
  }
  return log_t0 + log_sum;
}

double log_hyp1f1(double a, double b, double z) {
  if (!(a > 0.0) || !(b > 0.0) || !(z >= 0.0)) {
    throw std::domain_error("log_hyp1f1: requires a, b > 0 and z >= 0");
  }
  if (z == 0.0) return 0.0;
  // 1F1(a;b;z) = sum_{n>=0} (a)_n z^n / ((b)_n n!); all terms positive.
  double log_term = 0.0;
  double log_sum = 0.0;
  for (long n = 0; n < kMaxSeriesTerms; ++n) {
    const double dn = static_cast<double>(n);
    const double ratio = (a + dn) * z / ((b + dn) * (dn + 1.0));
    log_term += std::log(ratio);
    if (log_term < log_sum + std::log(1e-18) && ratio < 0.5) break;
    log_sum = log_add(log_sum, log_term);
    if (n + 1 == kMaxSeriesTerms) {
      throw NumericError("log_hyp1f1: series failed to converge");
    }
  }
  return log_sum;
}

// ---------------------------------------------------------------------------
// Bessel distribution

void validate(const BesselParams& p) {
  if (!(p.order > -1.0) || !std::isfinite(p.order)) {
    throw std::domain_error("BesselParams: order must be finite and > -1");
  }
  if (!(p.scale >= 0.0) || !std::isfinite(p.scale)) {
    throw std::domain_error("BesselParams: scale must be finite and >= 0");
  }
}

double bessel_log_pmf(const BesselParams& p, long n) {
  validate(p);
  if (n < 0) return -std::numeric_limits<double>::infinity();
  if (p.scale == 0.0) {
    return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  const double dn = static_cast<double>(n);
  const double log_half = std::log(0.5 * p.scale);
  return (2.0 * dn + p.order) * log_half - std::lgamma(dn + 1.0) -
         std::lgamma(dn + p.order + 1.0) - log_bessel_i(p.order, p.scale);
}

namespace {

// Successive-mass ratio P(n+1)/P(n) = q / ((n+1)(n+order+1)), q = (scale/2)^2.
struct BesselRatio {
  double q;
  double order;
  double operator()(long n) const {
    const double dn = static_cast<double>(n);
    return q / ((dn + 1.0) * (dn + order + 1.0));
  }
};

}  // namespace

long bessel_mode(const BesselParams& p) {
  validate(p);
  if (p.scale == 0.0) return 0;
  const double q = 0.25 * p.scale * p.scale;
  // Ratio >= 1 iff n^2 + (order+2) n + (order+1-q) <= 0; seed from the
  // larger root, then walk to the exact ratio crossing.
  const double disc = p.order * p.order + 4.0 * q;
  double root = 0.5 * (-(p.order + 2.0) + std::sqrt(disc));
  long mode = std::max(0L, static_cast<long>(std::floor(root)));
  const BesselRatio ratio{q, p.order};
  while (ratio(mode) > 1.0) ++mode;
  while (mode > 0 && ratio(mode - 1) <= 1.0) --mode;
  return mode;
}

BesselSampler::BesselSampler(const BesselParams& p) : degenerate_(false) {
  validate(p);
  if (p.scale == 0.0) {
    degenerate_ = true;
    return;
  }
  const double q = 0.25 * p.scale * p.scale;
  table_ = PmfTable(0, bessel_mode(p), BesselRatio{q, p.order});
}

// ---------------------------------------------------------------------------
// Shifted confluent hypergeometric distribution

void validate(const SchParams& p) {
  if (p.count < 1) {
    throw std::domain_error("SchParams: count must be >= 1");
  }
  if (!(p.zeta >= 0.0) || !std::isfinite(p.zeta)) {
    throw std::domain_error("SchParams: zeta must be finite and >= 0");
  }
}

double sch_log_pmf(const SchParams& p, long h) {
  validate(p);
  if (h < 1) return -std::numeric_limits<double>::infinity();
  if (p.zeta == 0.0) {
    return h == 1 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  const double m = static_cast<double>(p.count);
  const double dh = static_cast<double>(h);
  const double log_norm =
      std::log(p.zeta) + std::lgamma(m + 1.0) + log_hyp1f1(m + 1.0, 2.0, p.zeta);
  return dh * std::log(p.zeta) + std::lgamma(m + dh) - std::lgamma(dh + 1.0) -
         std::lgamma(dh) - log_norm;
}

namespace {

// Successive-mass ratio P(h+1)/P(h) = zeta (m+h) / ((h+1) h).
struct SchRatio {
  double zeta;
  double m;
  double operator()(long h) const {
    const double dh = static_cast<double>(h);
    return zeta * (m + dh) / ((dh + 1.0) * dh);
  }
};

}  // namespace

long sch_mode(const SchParams& p) {
  validate(p);
  if (p.zeta == 0.0) return 1;
  const double m = static_cast<double>(p.count);
  // Ratio >= 1 iff h^2 + (1-zeta) h - zeta m <= 0; seed from the larger
  // root, clamp into the support, then walk to the exact crossing.
  const double disc = (1.0 - p.zeta) * (1.0 - p.zeta) + 4.0 * p.zeta * m;
  double root = 0.5 * ((p.zeta - 1.0) + std::sqrt(disc));
  long mode = std::max(1L, static_cast<long>(std::floor(root)));
  const SchRatio ratio{p.zeta, m};
  while (ratio(mode) > 1.0) ++mode;
  while (mode > 1 && ratio(mode - 1) <= 1.0) --mode;
  return mode;
}

SchSampler::SchSampler(const SchParams& p) : degenerate_(false) {
  validate(p);
  if (p.zeta == 0.0) {
    degenerate_ = true;
    return;
  }
  table_ = PmfTable(1, sch_mode(p), SchRatio{p.zeta, static_cast<double>(p.count)});
}

// ---------------------------------------------------------------------------
// Randomized gamma of the first type

void validate(const Rg1Params& p) {
  if (!(p.shape_offset >= 0.0) || !std::isfinite(p.shape_offset)) {
    throw std::domain_error("Rg1Params: shape_offset must be finite and >= 0");
  }
  if (!(p.intensity >= 0.0) || !std::isfinite(p.intensity)) {
    throw std::domain_error("Rg1Params: intensity must be finite and >= 0");
  }
  if (!(p.rate > 0.0) || !std::isfinite(p.rate)) {
    throw std::domain_error("Rg1Params: rate must be finite and > 0");
  }
}

double rg1_log_pdf(const Rg1Params& p, double value) {
  validate(p);
  if (!(p.shape_offset > 0.0)) {
    throw std::domain_error(
        "rg1_log_pdf: shape_offset 0 places an atom at zero; no density exists");
  }
  if (!(value > 0.0)) return -std::numeric_limits<double>::infinity();
  const double e = p.shape_offset;
  if (p.intensity == 0.0) {
    // Plain gamma density.
    return e * std::log(p.rate) + (e - 1.0) * std::log(value) - p.rate * value -
           std::lgamma(e);
  }
  const double cross = p.intensity * p.rate * value;
  return -p.intensity - p.rate * value + e * std::log(p.rate) +
         (e - 1.0) * std::log(value) - 0.5 * (e - 1.0) * std::log(cross) +
         log_bessel_i(e - 1.0, 2.0 * std::sqrt(cross));
}

}  // namespace prgds
