// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "prgds/errors.hpp"
#include "prgds/model.hpp"

using namespace prgds;

namespace {

// One-component, one-cell state with a chosen Poisson rate.
ModelState rate_state(double mu, long num_steps = 1) {
  ModelHyper hy;
  hy.num_components = 1;
  ModelState s = make_empty_state(hy, {1}, num_steps);
  s.pi(0, 0) = 1.0;
  s.phi[0](0, 0) = 1.0;
  s.lambda[0] = mu;
  for (long t = 0; t < num_steps; ++t) s.theta(t, 0) = 1.0;
  for (auto& v : s.rho) v = 1.0;
  return s;
}

PosteriorSampleSet single_cell_set(std::vector<double> rates) {
  PosteriorSampleSet set;
  long iter = 1;
  for (double mu : rates) {
    set.samples.push_back(PosteriorSample{0, iter++, rate_state(mu)});
  }
  return set;
}

HoldoutMask forecast_last(long num_steps) {
  HoldoutMask mask;
  mask.num_steps = num_steps;
  mask.forecasting = {num_steps};
  return mask;
}

// Independent high-precision evaluation: plain long-double mean of the
// per-sample Poisson likelihoods, no shared code with the implementation.
long double oracle_rate(const PosteriorSampleSet& samples,
                        const SparseCountSequence& data,
                        const std::vector<long>& steps) {
  const long m_count = data.num_modes();
  long double total = 0.0L;
  long n_cells = 0;
  for (const long t : steps) {
    std::vector<long> idx(static_cast<size_t>(m_count), 0);
    bool done = false;
    long e = 0;
    while (!done) {
      long y = 0;
      if (e < data.nnz(t)) {
        const auto entry = data.index(t, e);
        if (std::equal(entry.begin(), entry.end(), idx.begin())) {
          y = data.count(t, e);
          ++e;
        }
      }
      long double mean_lik = 0.0L;
      for (const auto& sample : samples.samples) {
        const ModelState& s = sample.state;
        long double mu = 0.0L;
        for (long k = 0; k < s.num_components(); ++k) {
          long double term = static_cast<long double>(s.rho[t - 1]) *
                             s.lambda[k] * s.theta(t - 1, k);
          for (long m = 0; m < m_count; ++m) term *= s.phi[m](k, idx[m]);
          mu += term;
        }
        const long double lp =
            -mu + y * logl(mu) - lgammal(static_cast<long double>(y) + 1.0L);
        mean_lik += y == 0 ? expl(-mu) : expl(lp);
      }
      mean_lik /= static_cast<long double>(samples.samples.size());
      total -= logl(mean_lik);
      ++n_cells;
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
  return total / static_cast<long double>(n_cells);
}

}  // namespace

TEST_CASE("zero count under unit rate scores one nat") {
  SparseCountSequence data(1, {1});
  data.finalize();
  const auto set = single_cell_set({1.0});
  const double r =
      information_rate(set, data, forecast_last(1), HeldoutSubset::kAll);
  CHECK(std::abs(r - 1.0) <= 1e-12);
}

TEST_CASE("count two under rate two scores the exact poisson surprisal") {
  SparseCountSequence data(1, {1});
  data.add(1, std::vector<long>{0}, 2);
  data.finalize();
  const auto set = single_cell_set({2.0});
  const double r =
      information_rate(set, data, forecast_last(1), HeldoutSubset::kAll);
  // -log(e^-2 * 2^2 / 2!) = 2 - log 2.
  CHECK(std::abs(r - (2.0 - std::log(2.0))) <= 1e-12);
}

TEST_CASE("multi-sample predictive averages the likelihoods") {
  SparseCountSequence data(1, {1});
  data.add(1, std::vector<long>{0}, 2);
  data.finalize();
  const auto set = single_cell_set({1.0, 3.0});
  const double r =
      information_rate(set, data, forecast_last(1), HeldoutSubset::kAll);
  const double lik = 0.5 * (std::exp(-1.0) * 1.0 / 2.0 +
                            std::exp(-3.0) * 9.0 / 2.0);
  CHECK(std::abs(r + std::log(lik)) <= 1e-12);
}

TEST_CASE("rates match a high-precision oracle on random instances") {
  ModelHyper hy;
  hy.num_components = 3;
  Rng rng(20240811);
  for (int rep = 0; rep < 8; ++rep) {
    // Random live states and random sparse data over a 3x2 grid, 6 steps.
    PosteriorSampleSet set;
    for (long si = 0; si < 10; ++si) {
      ModelState s = make_empty_state(hy, {3, 2}, 6);
      for (long k = 0; k < 3; ++k) {
        s.lambda[k] = sample_gamma(2.0, 1.0, rng) + 0.05;
        for (long t = 0; t < 6; ++t) {
          s.theta(t, k) = sample_gamma(2.0, 2.0, rng) + 0.02;
        }
        std::vector<double> row(3);
        sample_dirichlet(std::vector<double>{1.0, 1.0, 1.0}, row, rng);
        for (long d = 0; d < 3; ++d) s.phi[0](k, d) = row[d];
        std::vector<double> row2(2);
        sample_dirichlet(std::vector<double>{1.0, 1.0}, row2, rng);
        for (long d = 0; d < 2; ++d) s.phi[1](k, d) = row2[d];
        s.pi(k, k) = 1.0;
      }
      for (auto& v : s.rho) v = sample_gamma(3.0, 3.0, rng) + 0.1;
      set.samples.push_back(PosteriorSample{si % 2, si, std::move(s)});
    }
    SparseCountSequence data(6, {3, 2});
    for (long t = 1; t <= 6; ++t) {
      for (long a = 0; a < 3; ++a) {
        for (long b = 0; b < 2; ++b) {
          const long y = sample_poisson(1.3, rng);
          if (y > 0) data.add(t, std::vector<long>{a, b}, y);
        }
      }
    }
    data.finalize();
    HoldoutMask mask;
    mask.num_steps = 6;
    mask.smoothing = {3};
    mask.forecasting = {5, 6};

    const struct {
      HeldoutSubset subset;
      std::vector<long> steps;
    } cases[] = {
        {HeldoutSubset::kSmoothing, {3}},
        {HeldoutSubset::kForecasting, {5, 6}},
        {HeldoutSubset::kAll, {3, 5, 6}},
    };
    for (const auto& c : cases) {
      const double got = information_rate(set, data, mask, c.subset);
      const long double want = oracle_rate(set, data, c.steps);
      CHECK(std::abs(got - static_cast<double>(want)) <=
            1e-10 * std::max(1.0, std::abs(static_cast<double>(want))));
    }
  }
}

TEST_CASE("sample order cannot change the result") {
  ModelHyper hy;
  hy.num_components = 2;
  Rng rng(5);
  PosteriorSampleSet set;
  for (long si = 0; si < 7; ++si) {
    ModelState s = make_empty_state(hy, {4}, 2);
    for (long k = 0; k < 2; ++k) {
      s.lambda[k] = sample_gamma(2.0, 1.0, rng) + 0.1;
      for (long t = 0; t < 2; ++t) s.theta(t, k) = sample_gamma(1.5, 1.0, rng) + 0.1;
      std::vector<double> row(4);
      sample_dirichlet(std::vector<double>{1, 1, 1, 1}, row, rng);
      for (long d = 0; d < 4; ++d) s.phi[0](k, d) = row[d];
      s.pi(k, k) = 1.0;
    }
    for (auto& v : s.rho) v = 1.0;
    set.samples.push_back(PosteriorSample{0, si, std::move(s)});
  }
  SparseCountSequence data(2, {4});
  data.add(2, std::vector<long>{1}, 3);
  data.add(2, std::vector<long>{3}, 1);
  data.finalize();
  const auto mask = forecast_last(2);
  const double base = information_rate(set, data, mask, HeldoutSubset::kAll);
  std::mt19937_64 shuffler(99);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(set.samples.begin(), set.samples.end(), shuffler);
    CHECK(information_rate(set, data, mask, HeldoutSubset::kAll) == base);
  }
}

TEST_CASE("extreme counts and rates stay finite in log space") {
  SparseCountSequence data(1, {1});
  data.add(1, std::vector<long>{0}, 1000000);
  data.finalize();
  const auto big = single_cell_set({1.0e6});
  const double r =
      information_rate(big, data, forecast_last(1), HeldoutSubset::kAll);
  CHECK(std::isfinite(r));
  // Stirling-order check: -log Pois(1e6; 1e6) ~ 0.5*log(2*pi*1e6).
  CHECK(r == doctest::Approx(0.5 * std::log(2.0 * M_PI * 1.0e6)).epsilon(1e-4));

  const auto tiny = single_cell_set({1.0});
  const double far =
      information_rate(tiny, data, forecast_last(1), HeldoutSubset::kAll);
  CHECK(std::isfinite(far));
  CHECK(far > 1e6);
}

TEST_CASE("a dead predictive against a positive count is infinitely surprised") {
  SparseCountSequence data(1, {1});
  data.add(1, std::vector<long>{0}, 2);
  data.finalize();
  const auto set = single_cell_set({0.0});
  const double r =
      information_rate(set, data, forecast_last(1), HeldoutSubset::kAll);
  CHECK(std::isinf(r));

  SparseCountSequence zeros(1, {1});
  zeros.finalize();
  CHECK(information_rate(set, zeros, forecast_last(1), HeldoutSubset::kAll) ==
        0.0);
}

TEST_CASE("shape and subset mismatches are rejected") {
  SparseCountSequence data(2, {1});
  data.finalize();
  const auto set = single_cell_set({1.0});  // single-step state vs 2-step data
  CHECK_THROWS_AS(
      information_rate(set, data, forecast_last(2), HeldoutSubset::kAll),
      DataError);

  SparseCountSequence one(1, {1});
  one.finalize();
  const auto mask = forecast_last(1);
  CHECK_THROWS_AS(
      information_rate(PosteriorSampleSet{}, one, mask, HeldoutSubset::kAll),
      DataError);
  CHECK_THROWS_AS(
      information_rate(single_cell_set({1.0}), one, mask,
                       HeldoutSubset::kSmoothing),
      DataError);
}

TEST_CASE("gain is the baseline minus the model and antisymmetric") {
  CHECK(information_gain(1.5, 1.2) == doctest::Approx(0.3));
  CHECK(information_gain(2.0, 2.0) == 0.0);
  CHECK(information_gain(0.7, 1.1) == -information_gain(1.1, 0.7));
}

TEST_CASE("csv rows carry the documented columns") {
  std::vector<EvalRow> rows;
  rows.push_back(EvalRow{"prgds", "data.txt", 7, "smoothing", 1.25, 0.5});
  rows.push_back(EvalRow{"sta,tic", "d\"x\"", 7, "all", 0.5, 0.0});
  std::ostringstream os;
  write_eval_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "model,dataset,mask-seed,subset,rate,gain");
  std::getline(in, line);
  CHECK(line == "prgds,data.txt,7,smoothing,1.25,0.5");
  std::getline(in, line);
  CHECK(line == "\"sta,tic\",\"d\"\"x\"\"\",7,all,0.5,0");
  CHECK_FALSE(std::getline(in, line));
}
