// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "prgds/engine.hpp"
#include "prgds/model.hpp"
#include "prgds/rng.hpp"

namespace prgds {

// Survival function of the Kolmogorov distribution.
double kolmogorov_q(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test (asymptotic p-value).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct GofResult {
  double statistic = 0.0;
  double p_value = 1.0;
  long pooled_bins = 0;
};

// Pooled-tail chi-square goodness of fit for a sampler over the nonnegative
// integers against its log-pmf; bins are pooled until each expects >= 5.
GofResult discrete_gof(const std::function<long(Rng&)>& sampler,
                       const std::function<double(long)>& log_pmf,
                       long n_draws, Rng& rng);

struct GewekeStat {
  std::string name;
  double ks_stat = 0.0;
  double p_value = 1.0;
  bool pass = true;
};

struct GewekeReport {
  std::vector<GewekeStat> stats;
  double alpha = 0.001;  // family level; each stat tested at alpha / #stats
  bool pass = true;
};

// Joint-distribution sampler check: compares scalar summaries of
// (state, data) between independent prior simulation and a chain that
// alternates full update sweeps with re-simulating the data given the state.
// A custom sweep can be injected to demonstrate sensitivity to broken updates.
GewekeReport geweke_test(const ModelHyper& hyper, const std::vector<long>& dims,
                         long num_steps, long n_samples, long thin,
                         double alpha, Rng& rng, const SweepFn& sweep = {});

// Machine-readable form: statistic,ks,p,pass per line.
void write_geweke_csv(std::ostream& os, const GewekeReport& report);

}  // namespace prgds
