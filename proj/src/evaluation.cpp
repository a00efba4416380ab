// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "prgds/errors.hpp"

namespace prgds {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool step_selected(const HoldoutMask& mask, long t, HeldoutSubset subset) {
  switch (subset) {
    case HeldoutSubset::kSmoothing:
      return mask.is_smoothing(t);
    case HeldoutSubset::kForecasting:
      return mask.is_forecasting(t);
    case HeldoutSubset::kAll:
      return mask.holds(t);
  }
  return false;
}

double poisson_log_pmf(long y, double mu) {
  if (mu <= 0.0) return y == 0 ? 0.0 : kNegInf;
  if (y == 0) return -mu;
  const double dy = static_cast<double>(y);
  return -mu + dy * std::log(mu) - std::lgamma(dy + 1.0);
}

// Order-independent log of the mean of exp(values); sorting fixes the
// floating-point summation order regardless of input order.
double log_mean_exp(std::vector<double>& values) {
  std::sort(values.begin(), values.end(), std::greater<double>());
  const double top = values.front();
  if (top == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc) - std::log(static_cast<double>(values.size()));
}

}  // namespace

const char* subset_name(HeldoutSubset subset) {
  switch (subset) {
    case HeldoutSubset::kSmoothing:
      return "smoothing";
    case HeldoutSubset::kForecasting:
      return "forecasting";
    case HeldoutSubset::kAll:
      return "all";
  }
  return "?";
}

double information_rate(const PosteriorSampleSet& samples,
                        const SparseCountSequence& data,
                        const HoldoutMask& mask, HeldoutSubset subset) {
  const long n_samples = static_cast<long>(samples.samples.size());
  if (n_samples == 0) throw DataError("information_rate: no posterior samples");
  if (mask.num_steps != data.num_steps()) {
    throw DataError("information_rate: mask and data step counts differ");
  }
  const long m_count = data.num_modes();
  for (const auto& sample : samples.samples) {
    if (sample.state.num_steps != data.num_steps() ||
        sample.state.dims != data.dims()) {
      throw DataError("information_rate: sample shape does not match data");
    }
  }
  std::vector<long> steps;
  for (long t = 1; t <= data.num_steps(); ++t) {
    if (step_selected(mask, t, subset)) steps.push_back(t);
  }
  if (steps.empty()) {
    throw DataError(std::string("information_rate: no held-out steps in ") +
                    subset_name(subset) + " subset");
  }

  const long k_count = samples.samples.front().state.num_components();
  double total = 0.0;
  long n_cells = 0;
  std::vector<double> lp(static_cast<size_t>(n_samples));
  std::vector<double> weight(static_cast<size_t>(n_samples * k_count));
  std::vector<long> idx(static_cast<size_t>(m_count));
  for (const long t : steps) {
    // Per-sample, per-component step coefficients, hoisted out of the cell loop.
    for (long si = 0; si < n_samples; ++si) {
      const ModelState& s = samples.samples[static_cast<size_t>(si)].state;
      for (long k = 0; k < k_count; ++k) {
        weight[static_cast<size_t>(si * k_count + k)] =
            s.rho[t - 1] * s.lambda[k] * s.theta(t - 1, k);
      }
    }
    std::fill(idx.begin(), idx.end(), 0);
    long e = 0;
    const long e_end = data.nnz(t);
    bool done = false;
    while (!done) {
      long y = 0;
      if (e < e_end) {
        const auto entry = data.index(t, e);
        if (std::equal(entry.begin(), entry.end(), idx.begin())) {
          y = data.count(t, e);
          ++e;
        }
      }
      for (long si = 0; si < n_samples; ++si) {
        const ModelState& s = samples.samples[static_cast<size_t>(si)].state;
        double mu = 0.0;
        for (long k = 0; k < k_count; ++k) {
          double term = weight[static_cast<size_t>(si * k_count + k)];
          for (long m = 0; m < m_count; ++m) term *= s.phi[m](k, idx[m]);
          mu += term;
        }
        lp[static_cast<size_t>(si)] = poisson_log_pmf(y, mu);
      }
      total -= log_mean_exp(lp);
      ++n_cells;
      // Advance the cell odometer (last mode fastest, matching entry order).
      done = true;
      for (long m = m_count - 1; m >= 0; --m) {
        if (++idx[m] < data.dims()[m]) {
          done = false;
          break;
        }
        idx[m] = 0;
      }
    }
  }
  return total / static_cast<double>(n_cells);
}

double information_gain(double baseline_rate, double model_rate) {
  return baseline_rate - model_rate;
}

namespace {

void write_csv_field(std::ostream& os, const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    os << field;
    return;
  }
  os << '"';
  for (char c : field) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

}  // namespace

void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows) {
  os << "model,dataset,mask-seed,subset,rate,gain\n";
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(17);
  for (const auto& row : rows) {
    write_csv_field(os, row.model);
    os << ',';
    write_csv_field(os, row.dataset);
    os << ',' << row.mask_seed << ',' << row.subset << ',' << row.rate << ','
       << row.gain << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

}  // namespace prgds
