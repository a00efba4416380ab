// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include <boost/math/special_functions/gamma.hpp>

#include "prgds/errors.hpp"

namespace prgds {

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // tail series converges slowly; Q ~ 1 here
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw DataError("ks_two_sample: empty sample");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const size_t na = a.size(), nb = b.size();
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < na && j < nb) {
    const double x = std::min(a[i], b[j]);
    while (i < na && a[i] <= x) ++i;
    while (j < nb && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(na) -
                             static_cast<double>(j) / static_cast<double>(nb)));
  }
  const double ne = static_cast<double>(na) * static_cast<double>(nb) /
                    static_cast<double>(na + nb);
  const double root = std::sqrt(ne);
  KsResult result;
  result.statistic = d;
  result.p_value = kolmogorov_q((root + 0.12 + 0.11 / root) * d);
  return result;
}

GofResult discrete_gof(const std::function<long(Rng&)>& sampler,
                       const std::function<double(long)>& log_pmf,
                       long n_draws, Rng& rng) {
  if (n_draws < 1) throw DataError("discrete_gof: need at least one draw");
  std::map<long, long> hist;
  long hi = 0;
  for (long i = 0; i < n_draws; ++i) {
    const long v = sampler(rng);
    if (v < 0) throw DataError("discrete_gof: negative draw");
    ++hist[v];
    hi = std::max(hi, v);
  }
  const double dn = static_cast<double>(n_draws);

  // Exact bins 0..hi-1 plus a pooled right tail at >= hi.
  std::vector<double> expected;
  std::vector<double> observed;
  double expected_below = 0.0;
  for (long v = 0; v < hi; ++v) {
    const double lp = log_pmf(v);
    const double p = lp == -std::numeric_limits<double>::infinity()
                         ? 0.0
                         : std::exp(lp);
    expected.push_back(dn * p);
    expected_below += dn * p;
    const auto it = hist.find(v);
    observed.push_back(it == hist.end() ? 0.0
                                        : static_cast<double>(it->second));
  }
  expected.push_back(std::max(0.0, dn - expected_below));
  double tail_obs = 0.0;
  for (const auto& [v, c] : hist) {
    if (v >= hi) tail_obs += static_cast<double>(c);
  }
  observed.push_back(tail_obs);

  // Pool adjacent bins until each expects at least 5.
  std::vector<double> pe, po;
  double ce = 0.0, co = 0.0;
  for (size_t i = 0; i < expected.size(); ++i) {
    ce += expected[i];
    co += observed[i];
    if (ce >= 5.0) {
      pe.push_back(ce);
      po.push_back(co);
      ce = co = 0.0;
    }
  }
  if (ce > 0.0 || co > 0.0) {
    if (pe.empty()) {
      pe.push_back(ce);
      po.push_back(co);
    } else {
      pe.back() += ce;
      po.back() += co;
    }
  }

  GofResult result;
  result.pooled_bins = static_cast<long>(pe.size());
  if (result.pooled_bins <= 1) return result;  // point mass: trivially passes
  double chi2 = 0.0;
  for (size_t i = 0; i < pe.size(); ++i) {
    const double diff = po[i] - pe[i];
    chi2 += diff * diff / pe[i];
  }
  result.statistic = chi2;
  const double dof = static_cast<double>(result.pooled_bins - 1);
  result.p_value = boost::math::gamma_q(dof / 2.0, chi2 / 2.0);
  return result;
}

namespace {

struct Monitored {
  const char* name;
  std::function<double(const ModelState&, const SparseCountSequence&)> value;
};

std::vector<Monitored> monitored_statistics() {
  const auto sum2d = [](const Array2D<double>& a) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.data()[i];
    return acc;
  };
  return {
      {"gamma", [](const ModelState& s, const SparseCountSequence&) {
         return s.gamma;
       }},
      {"beta", [](const ModelState& s, const SparseCountSequence&) {
         return s.beta;
       }},
      {"tau", [](const ModelState& s, const SparseCountSequence&) {
         return s.tau;
       }},
      {"lambda_total", [](const ModelState& s, const SparseCountSequence&) {
         double acc = 0.0;
         for (double v : s.lambda) acc += v;
         return acc;
       }},
      {"theta_total", [sum2d](const ModelState& s, const SparseCountSequence&) {
         return sum2d(s.theta);
       }},
      {"h_total", [](const ModelState& s, const SparseCountSequence&) {
         double acc = 0.0;
         for (size_t i = 0; i < s.h.size(); ++i) {
           acc += static_cast<double>(s.h.data()[i]);
         }
         return acc;
       }},
      {"count_total", [](const ModelState&, const SparseCountSequence& d) {
         return static_cast<double>(d.total());
       }},
  };
}

}  // namespace

GewekeReport geweke_test(const ModelHyper& hyper, const std::vector<long>& dims,
                         long num_steps, long n_samples, long thin,
                         double alpha, Rng& rng, const SweepFn& sweep) {
  if (n_samples < 10) throw DataError("geweke_test: too few samples");
  if (thin < 1) throw DataError("geweke_test: thin must be positive");
  const SweepFn step =
      sweep ? sweep
            : SweepFn([](ModelState& s, const SparseCountSequence& d,
                         Rng& r) { gibbs_sweep(s, d, r); });
  const auto stats = monitored_statistics();
  const size_t n_stats = stats.size();
  std::vector<std::vector<double>> forward(n_stats), chain(n_stats);
  for (auto& v : forward) v.reserve(static_cast<size_t>(n_samples));
  for (auto& v : chain) v.reserve(static_cast<size_t>(n_samples));

  // Marginal-conditional stream: independent draws from the joint prior.
  for (long i = 0; i < n_samples; ++i) {
    const ModelState state = sample_prior(hyper, dims, num_steps, rng);
    const SparseCountSequence data = simulate_data(state, rng);
    for (size_t j = 0; j < n_stats; ++j) {
      forward[j].push_back(stats[j].value(state, data));
    }
  }

  // Successive-conditional stream: sweep given data, then re-simulate the
  // data given the state; thin transitions between records.
  ModelState state = sample_prior(hyper, dims, num_steps, rng);
  SparseCountSequence data = simulate_data(state, rng);
  for (long i = 0; i < n_samples; ++i) {
    for (long rep = 0; rep < thin; ++rep) {
      step(state, data, rng);
      data = simulate_data(state, rng);
    }
    for (size_t j = 0; j < n_stats; ++j) {
      chain[j].push_back(stats[j].value(state, data));
    }
  }

  GewekeReport report;
  report.alpha = alpha;
  const double per_stat = alpha / static_cast<double>(n_stats);
  for (size_t j = 0; j < n_stats; ++j) {
    const KsResult ks = ks_two_sample(forward[j], chain[j]);
    GewekeStat stat;
    stat.name = stats[j].name;
    stat.ks_stat = ks.statistic;
    stat.p_value = ks.p_value;
    stat.pass = ks.p_value >= per_stat;
    report.pass = report.pass && stat.pass;
    report.stats.push_back(std::move(stat));
  }
  return report;
}

void write_geweke_csv(std::ostream& os, const GewekeReport& report) {
  os << "statistic,ks,p,pass\n";
  for (const auto& stat : report.stats) {
    os << stat.name << ',' << stat.ks_stat << ',' << stat.p_value << ','
       << (stat.pass ? 1 : 0) << '\n';
  }
}

}  // namespace prgds
