// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/baseline.hpp"

#include <cmath>

#include "prgds/errors.hpp"
#include "prgds/special.hpp"

namespace prgds {

namespace {

std::vector<double> factor_row_products(const ModelState& s) {
  std::vector<double> prod(static_cast<size_t>(s.num_components()), 1.0);
  for (const auto& mat : s.phi) {
    for (long k = 0; k < mat.rows(); ++k) {
      double acc = 0.0;
      for (long d = 0; d < mat.cols(); ++d) acc += mat(k, d);
      prod[static_cast<size_t>(k)] *= acc;
    }
  }
  return prod;
}

}  // namespace

ModelState make_static_state(const ModelHyper& hyper,
                             const std::vector<long>& dims, long num_steps,
                             Rng& rng) {
  validate(hyper);
  ModelHyper hy = hyper;
  // The static model has no activation chain; pin the unused shape setting so
  // structural checks on the pinned theta stay meaningful.
  hy.eps_theta = 1.0;
  ModelState s = make_empty_state(hy, dims, num_steps);
  const long k_count = s.num_components();
  const double dk = static_cast<double>(k_count);

  s.gamma = sample_gamma(hy.a0, hy.b0, rng);
  s.beta = sample_gamma(hy.alpha0, hy.alpha0, rng);
  for (long k = 0; k < k_count; ++k) {
    s.g[k] = sample_poisson(s.gamma / dk, rng);
    s.lambda[k] = sample_gamma(
        hy.eps_lambda / dk + static_cast<double>(s.g[k]), s.beta, rng);
  }
  for (auto& mat : s.phi) {
    const std::vector<double> alpha(static_cast<size_t>(mat.cols()), hy.a0);
    std::vector<double> row(static_cast<size_t>(mat.cols()));
    for (long k = 0; k < k_count; ++k) {
      sample_dirichlet(alpha, row, rng);
      for (long d = 0; d < mat.cols(); ++d) mat(k, d) = row[d];
    }
  }
  s.theta.fill(1.0);
  for (auto& v : s.rho) v = 1.0;
  for (long k = 0; k < k_count; ++k) s.pi(k, k) = 1.0;
  s.tau = 1.0;
  return s;
}

void static_sweep(ModelState& s, const SparseCountSequence& data, Rng& rng) {
  const long k_count = s.num_components();
  const double dk = static_cast<double>(k_count);
  const ModelHyper& hy = s.hyper;

  update_y_sources(s, data, rng);

  // Weights and their shape counts; exposure is the summed per-step rate
  // coefficient (theta and rho are pinned to one, kept explicit for safety).
  const std::vector<double> phiprod = factor_row_products(s);
  const double eps_k = hy.eps_lambda / dk;
  const double c1 = s.gamma / dk;
  for (long k = 0; k < k_count; ++k) {
    long m_count = 0;
    double exposure = 0.0;
    for (long t = 1; t <= s.num_steps; ++t) {
      m_count += s.y_comp(t - 1, k);
      exposure += s.rho[t - 1] * s.theta(t - 1, k) * phiprod[k];
    }
    if (eps_k > 0.0) {
      s.g[k] = pgp_posterior_h(m_count, false, eps_k, s.lambda[k], c1, s.beta,
                               exposure, rng);
    } else {
      if (c1 == 0.0 && m_count > 0) {
        throw NumericError(
            "weight chain: downstream counts with a dead upstream state");
      }
      s.g[k] =
          pgp_posterior_h(m_count, true, 0.0, 0.0, c1, s.beta, exposure, rng);
    }
    s.lambda[k] = sample_gamma(
        eps_k + static_cast<double>(s.g[k]) + static_cast<double>(m_count),
        s.beta + exposure, rng);
  }

  long g_total = 0;
  double lambda_total = 0.0;
  for (long k = 0; k < k_count; ++k) {
    g_total += s.g[k];
    lambda_total += s.lambda[k];
  }
  s.gamma = sample_gamma(hy.a0 + static_cast<double>(g_total), hy.b0 + 1.0, rng);
  s.beta = sample_gamma(hy.alpha0 + hy.eps_lambda + static_cast<double>(g_total),
                        hy.alpha0 + lambda_total, rng);

  for (long m = 0; m < s.num_modes(); ++m) {
    auto& mat = s.phi[m];
    std::vector<double> alpha(static_cast<size_t>(mat.cols()));
    std::vector<double> row(static_cast<size_t>(mat.cols()));
    for (long k = 0; k < k_count; ++k) {
      for (long d = 0; d < mat.cols(); ++d) {
        alpha[static_cast<size_t>(d)] =
            hy.a0 + static_cast<double>(s.y_mode[m](k, d));
      }
      sample_dirichlet(alpha, row, rng);
      for (long d = 0; d < mat.cols(); ++d) mat(k, d) = row[d];
    }
  }
}

PosteriorSampleSet fit_static_cp(const SparseCountSequence& data,
                                 const HoldoutMask& mask,
                                 const ModelHyper& hyper,
                                 const McmcConfig& config,
                                 const FitOptions& options) {
  const InitFn init = [](const ModelHyper& hy, const std::vector<long>& dims,
                         long num_steps, Rng& rng) {
    ModelState s = make_static_state(hy, dims, num_steps, rng);
    for (auto& v : s.lambda) {
      if (v == 0.0) v = sample_gamma(1.0, s.beta, rng);
    }
    return s;
  };
  const SweepFn sweep = [](ModelState& s, const SparseCountSequence& d,
                           Rng& rng) { static_sweep(s, d, rng); };
  return run_mcmc(data, mask, hyper, config, options, init, sweep, "static");
}

GammaPosterior fit_static_univariate(const SparseCountSequence& data,
                                     const HoldoutMask& mask, double a0,
                                     double b0) {
  if (data.num_modes() != 1) {
    throw DataError("static univariate model requires single-mode data");
  }
  if (mask.num_steps != data.num_steps()) {
    throw DataError("static univariate model: mask and data step counts differ");
  }
  if (!(a0 > 0.0) || !(b0 > 0.0)) {
    throw DataError("static univariate model: prior parameters must be positive");
  }
  GammaPosterior post;
  post.shapes.assign(static_cast<size_t>(data.dims()[0]), a0);
  long observed_steps = 0;
  for (long t = 1; t <= data.num_steps(); ++t) {
    if (mask.holds(t)) continue;
    ++observed_steps;
    for (long e = 0; e < data.nnz(t); ++e) {
      post.shapes[static_cast<size_t>(data.index(t, e)[0])] +=
          static_cast<double>(data.count(t, e));
    }
  }
  post.rate = b0 + static_cast<double>(observed_steps);
  return post;
}

}  // namespace prgds
