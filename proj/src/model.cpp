// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prgds/errors.hpp"
#include "prgds/kernels.hpp"
#include "prgds/special.hpp"

namespace prgds {

namespace {

constexpr double kMaxSimulationRate = 1e9;

// Product over modes of the row sums of phi; analytically 1 per the simplex
// constraint, computed explicitly so every conditional stays exactly
// self-consistent with the sampled state.
std::vector<double> phi_row_products(const ModelState& s) {
  const long k_count = s.num_components();
  std::vector<double> prod(static_cast<size_t>(k_count), 1.0);
  for (const auto& mat : s.phi) {
    for (long k = 0; k < k_count; ++k) {
      const auto row = mat.row(k);
      double acc = 0.0;
      for (double v : row) acc += v;
      prod[k] *= acc;
    }
  }
  return prod;
}

std::vector<double> pi_col_sums(const ModelState& s) {
  const long k_count = s.num_components();
  std::vector<double> col(static_cast<size_t>(k_count), 0.0);
  for (long k1 = 0; k1 < k_count; ++k1) {
    for (long k2 = 0; k2 < k_count; ++k2) col[k2] += s.pi(k1, k2);
  }
  return col;
}

std::vector<long> h_src_col_sums(const ModelState& s, long t) {
  const long k_count = s.num_components();
  std::vector<long> col(static_cast<size_t>(k_count), 0);
  const auto& src = s.h_src[t - 1];
  for (long k1 = 0; k1 < k_count; ++k1) {
    for (long k2 = 0; k2 < k_count; ++k2) col[k2] += src(k1, k2);
  }
  return col;
}

// Rate of the shape-increment prior: tau * sum_k2 pi(k,k2) theta_prev[k2].
double chain_rate(const ModelState& s, long t, long k) {
  const auto prev = s.theta_prev(t);
  double acc = 0.0;
  for (long k2 = 0; k2 < s.num_components(); ++k2) {
    acc += s.pi(k, k2) * prev[k2];
  }
  return s.tau * acc;
}

}  // namespace

void validate(const ModelHyper& h) {
  if (!(h.eps_theta >= 0.0) || !(h.eps_lambda >= 0.0)) {
    throw DataError("hyper: shape offsets must be >= 0");
  }
  if (!(h.alpha0 > 0.0) || !(h.a0 > 0.0) || !(h.b0 > 0.0)) {
    throw DataError("hyper: alpha0, a0, b0 must be > 0");
  }
  if (h.num_components < 1) {
    throw DataError("hyper: need at least one component");
  }
}

ModelState make_empty_state(const ModelHyper& hyper, const std::vector<long>& dims,
                            long num_steps) {
  validate(hyper);
  if (num_steps < 1) throw DataError("state needs at least one time step");
  if (dims.empty()) throw DataError("state needs at least one mode");
  const int t_count = static_cast<int>(num_steps);
  const int k_count = static_cast<int>(hyper.num_components);
  ModelState s;
  s.hyper = hyper;
  s.num_steps = num_steps;
  s.dims = dims;
  s.theta = Array2D<double>(t_count, k_count);
  s.h = Array2D<long>(t_count, k_count);
  s.h_src.assign(static_cast<size_t>(num_steps), Array2D<long>(k_count, k_count));
  s.pi = Array2D<double>(k_count, k_count);
  for (long d : dims) {
    if (d < 1) throw DataError("mode dimensions must be positive");
    s.phi.emplace_back(k_count, static_cast<int>(d));
    s.y_mode.emplace_back(k_count, static_cast<int>(d));
  }
  s.lambda.assign(static_cast<size_t>(k_count), 0.0);
  s.g.assign(static_cast<size_t>(k_count), 0);
  s.rho.assign(static_cast<size_t>(num_steps), 1.0);
  s.y_comp = Array2D<long>(t_count, k_count);
  return s;
}

ModelState sample_prior(const ModelHyper& hyper, const std::vector<long>& dims,
                        long num_steps, Rng& rng) {
  ModelState s = make_empty_state(hyper, dims, num_steps);
  const long k_count = hyper.num_components;

  s.gamma = sample_gamma(hyper.a0, hyper.b0, rng);
  s.beta = sample_gamma(hyper.alpha0, hyper.alpha0, rng);
  for (long k = 0; k < k_count; ++k) {
    s.g[k] = sample_poisson(s.gamma / static_cast<double>(k_count), rng);
    s.lambda[k] = sample_gamma(
        hyper.eps_lambda / static_cast<double>(k_count) + static_cast<double>(s.g[k]),
        s.beta, rng);
  }
  s.tau = sample_gamma(hyper.alpha0, hyper.alpha0, rng);

  std::vector<double> alpha(static_cast<size_t>(k_count), hyper.a0);
  std::vector<double> draw(static_cast<size_t>(k_count));
  for (long k2 = 0; k2 < k_count; ++k2) {
    sample_dirichlet(alpha, draw, rng);
    for (long k1 = 0; k1 < k_count; ++k1) s.pi(k1, k2) = draw[k1];
  }
  for (auto& mat : s.phi) {
    std::vector<double> a_row(static_cast<size_t>(mat.cols()), hyper.a0);
    std::vector<double> row(static_cast<size_t>(mat.cols()));
    for (long k = 0; k < k_count; ++k) {
      sample_dirichlet(a_row, row, rng);
      std::copy(row.begin(), row.end(), mat.row(k).begin());
    }
  }

  if (hyper.stationary_rho) {
    const double shared = sample_gamma(hyper.a0, hyper.b0, rng);
    std::fill(s.rho.begin(), s.rho.end(), shared);
  } else {
    for (auto& r : s.rho) r = sample_gamma(hyper.a0, hyper.b0, rng);
  }

  for (long t = 1; t <= num_steps; ++t) {
    const auto prev = s.theta_prev(t);
    for (long k = 0; k < k_count; ++k) {
      long total = 0;
      for (long k2 = 0; k2 < k_count; ++k2) {
        const long c = sample_poisson(s.tau * s.pi(k, k2) * prev[k2], rng);
        s.h_src[t - 1](k, k2) = c;
        total += c;
      }
      s.h(t - 1, k) = total;
      s.theta(t - 1, k) = sample_gamma(
          hyper.eps_theta + static_cast<double>(total), s.tau, rng);
    }
  }
  return s;
}

SparseCountSequence simulate_data(const ModelState& s, Rng& rng) {
  std::vector<long> steps(static_cast<size_t>(s.num_steps));
  std::iota(steps.begin(), steps.end(), 1);
  return simulate_data(s, steps, rng);
}

SparseCountSequence simulate_data(const ModelState& s,
                                  std::span<const long> steps, Rng& rng) {
  const long k_count = s.num_components();
  const long m_count = s.num_modes();
  SparseCountSequence seq(s.num_steps, s.dims);

  // Unnormalized per-mode cdfs over factor rows, for event placement.
  std::vector<Array2D<double>> cdf;
  for (const auto& mat : s.phi) {
    auto& c = cdf.emplace_back(mat.rows(), mat.cols());
    for (long k = 0; k < k_count; ++k) {
      double acc = 0.0;
      for (long d = 0; d < mat.cols(); ++d) {
        acc += mat(k, d);
        c(k, d) = acc;
      }
    }
  }
  const std::vector<double> phiprod = phi_row_products(s);

  std::vector<long> idx(static_cast<size_t>(m_count));
  for (const long t : steps) {
    if (t < 1 || t > s.num_steps) {
      throw DataError("simulate_data: step out of range");
    }
    for (long k = 0; k < k_count; ++k) {
      const double rate =
          s.rho[t - 1] * s.lambda[k] * s.theta(t - 1, k) * phiprod[k];
      if (!(rate <= kMaxSimulationRate)) {
        throw NumericError("simulate_data: component rate overflow");
      }
      const long events = sample_poisson(rate, rng);
      for (long e = 0; e < events; ++e) {
        for (long m = 0; m < m_count; ++m) {
          const auto row = cdf[m].row(k);
          const double u = sample_uniform(rng) * row.back();
          const auto it = std::lower_bound(row.begin(), row.end(), u);
          idx[m] = std::min<long>(it - row.begin(),
                                  static_cast<long>(row.size()) - 1);
        }
        seq.add(t, idx, 1);
      }
    }
  }
  seq.finalize();
  return seq;
}

void update_y_sources(ModelState& s, const SparseCountSequence& data, Rng& rng) {
  if (data.num_steps() != s.num_steps || data.dims() != s.dims) {
    throw DataError("update_y_sources: data shape mismatch");
  }
  const uint64_t phase_key = rng();
  allocate_y_sources(s, data, phase_key, true, s.y_comp, s.y_mode);
}

void update_h_sources(ModelState& s, Rng& rng) {
  const uint64_t phase_key = rng();
  allocate_h_sources(s, phase_key, true);
}

namespace {

// Samples the shape increment and then the activation for one (t, k), using
// the variant-appropriate conditional, and returns them through the state.
void resample_h_theta_cell(ModelState& s, long t, long k, long m_count,
                           double obs_coef, Rng& rng) {
  const double eps = s.hyper.eps_theta;
  const double c1 = chain_rate(s, t, k);
  long h_new = 0;
  if (eps > 0.0) {
    h_new = pgp_posterior_h(m_count, false, eps, s.theta(t - 1, k), c1, s.tau,
                            obs_coef, rng);
  } else {
    if (c1 == 0.0 && m_count > 0) {
      throw NumericError(
          "activation chain: downstream counts with a dead upstream state");
    }
    h_new = pgp_posterior_h(m_count, true, 0.0, 0.0, c1, s.tau, obs_coef, rng);
  }
  s.h(t - 1, k) = h_new;
  s.theta(t - 1, k) =
      sample_gamma(eps + static_cast<double>(h_new) + static_cast<double>(m_count),
                   s.tau + obs_coef, rng);
}

}  // namespace

void update_h_theta(ModelState& s, Rng& rng) {
  const long k_count = s.num_components();
  const std::vector<double> phiprod = phi_row_products(s);
  const std::vector<double> picol = pi_col_sums(s);
  for (long t = s.num_steps; t >= 1; --t) {
    const bool has_next = t < s.num_steps;
    const std::vector<long> col_next =
        has_next ? h_src_col_sums(s, t + 1)
                 : std::vector<long>(static_cast<size_t>(k_count), 0);
    for (long k = 0; k < k_count; ++k) {
      const long m_count = s.y_comp(t - 1, k) + col_next[k];
      const double obs_coef = s.rho[t - 1] * s.lambda[k] * phiprod[k] +
                              (has_next ? s.tau * picol[k] : 0.0);
      resample_h_theta_cell(s, t, k, m_count, obs_coef, rng);
    }
    // Row totals at this step changed; re-split them so the column sums seen
    // by the previous step are consistent.
    for (long k = 0; k < k_count; ++k) sample_h_row_sources(s, t, k, rng);
  }
}

void update_theta(ModelState& s, Rng& rng) {
  const long k_count = s.num_components();
  const std::vector<double> phiprod = phi_row_products(s);
  const std::vector<double> picol = pi_col_sums(s);
  for (long t = 1; t <= s.num_steps; ++t) {
    const bool has_next = t < s.num_steps;
    const std::vector<long> col_next =
        has_next ? h_src_col_sums(s, t + 1)
                 : std::vector<long>(static_cast<size_t>(k_count), 0);
    for (long k = 0; k < k_count; ++k) {
      const long m_count = s.y_comp(t - 1, k) + col_next[k];
      const double obs_coef = s.rho[t - 1] * s.lambda[k] * phiprod[k] +
                              (has_next ? s.tau * picol[k] : 0.0);
      const double shape = s.hyper.eps_theta + static_cast<double>(s.h(t - 1, k)) +
                           static_cast<double>(m_count);
      s.theta(t - 1, k) = sample_gamma(shape, s.tau + obs_coef, rng);
    }
  }
}

void update_h(ModelState& s, Rng& rng) {
  if (!(s.hyper.eps_theta > 0.0)) {
    throw NumericError(
        "update_h: the sparse variant requires the joint pass (absorbing zero)");
  }
  const long k_count = s.num_components();
  for (long t = 1; t <= s.num_steps; ++t) {
    for (long k = 0; k < k_count; ++k) {
      const double c1 = chain_rate(s, t, k);
      const double scale = 2.0 * std::sqrt(s.theta(t - 1, k) * s.tau * c1);
      s.h(t - 1, k) =
          bessel_sample(BesselParams{s.hyper.eps_theta - 1.0, scale}, rng);
      sample_h_row_sources(s, t, k, rng);
    }
  }
}

void update_lambda_g(ModelState& s, Rng& rng) {
  const long k_count = s.num_components();
  const double dk = static_cast<double>(k_count);
  const std::vector<double> phiprod = phi_row_products(s);
  const std::vector<double> picol = pi_col_sums(s);
  const std::vector<long> col1 = h_src_col_sums(s, 1);
  const double eps_k = s.hyper.eps_lambda / dk;
  const double c1 = s.gamma / dk;
  for (long k = 0; k < k_count; ++k) {
    long m_count = col1[k];
    double exposure = s.tau * picol[k];
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
      s.g[k] = pgp_posterior_h(m_count, true, 0.0, 0.0, c1, s.beta, exposure, rng);
    }
    s.lambda[k] = sample_gamma(
        eps_k + static_cast<double>(s.g[k]) + static_cast<double>(m_count),
        s.beta + exposure, rng);
  }
}

void update_conjugates(ModelState& s, const SparseCountSequence& data, Rng& rng) {
  const long k_count = s.num_components();
  const ModelHyper& hy = s.hyper;

  // Transition matrix columns.
  {
    Array2D<long> h_sum(static_cast<int>(k_count), static_cast<int>(k_count));
    for (const auto& src : s.h_src) {
      for (size_t i = 0; i < h_sum.size(); ++i) h_sum.data()[i] += src.data()[i];
    }
    std::vector<double> alpha(static_cast<size_t>(k_count));
    std::vector<double> draw(static_cast<size_t>(k_count));
    for (long k2 = 0; k2 < k_count; ++k2) {
      for (long k1 = 0; k1 < k_count; ++k1) {
        alpha[k1] = hy.a0 + static_cast<double>(h_sum(k1, k2));
      }
      sample_dirichlet(alpha, draw, rng);
      for (long k1 = 0; k1 < k_count; ++k1) s.pi(k1, k2) = draw[k1];
    }
  }

  // Factor rows.
  for (long m = 0; m < s.num_modes(); ++m) {
    auto& mat = s.phi[m];
    const auto& counts = s.y_mode[m];
    std::vector<double> alpha(static_cast<size_t>(mat.cols()));
    std::vector<double> draw(static_cast<size_t>(mat.cols()));
    for (long k = 0; k < k_count; ++k) {
      for (long d = 0; d < mat.cols(); ++d) {
        alpha[d] = hy.a0 + static_cast<double>(counts(k, d));
      }
      sample_dirichlet(alpha, draw, rng);
      std::copy(draw.begin(), draw.end(), mat.row(k).begin());
    }
  }

  const std::vector<double> phiprod = phi_row_products(s);
  const std::vector<double> picol = pi_col_sums(s);

  // Scale of the activation chain.
  {
    long h_total = 0;
    double theta_total = 0.0;
    double prev_exposure = 0.0;
    for (long t = 1; t <= s.num_steps; ++t) {
      const auto prev = s.theta_prev(t);
      for (long k = 0; k < k_count; ++k) {
        h_total += s.h(t - 1, k);
        theta_total += s.theta(t - 1, k);
        prev_exposure += picol[k] * prev[k];
      }
    }
    const double shape = hy.alpha0 +
                         hy.eps_theta * static_cast<double>(s.num_steps * k_count) +
                         2.0 * static_cast<double>(h_total);
    const double rate = hy.alpha0 + theta_total + prev_exposure;
    s.tau = sample_gamma(shape, rate, rng);
  }

  // Weight-chain scale and its shape-count intensity.
  {
    long g_total = std::accumulate(s.g.begin(), s.g.end(), 0L);
    double lambda_total = std::accumulate(s.lambda.begin(), s.lambda.end(), 0.0);
    s.beta = sample_gamma(hy.alpha0 + hy.eps_lambda + static_cast<double>(g_total),
                          hy.alpha0 + lambda_total, rng);
    s.gamma = sample_gamma(hy.a0 + static_cast<double>(g_total), hy.b0 + 1.0, rng);
  }

  // Per-step (or pooled) scaling factors.
  if (data.num_steps() != s.num_steps) {
    throw DataError("update_conjugates: data shape mismatch");
  }
  if (hy.stationary_rho) {
    double exposure = 0.0;
    long long y_total = 0;
    for (long t = 1; t <= s.num_steps; ++t) {
      y_total += data.step_total(t);
      for (long k = 0; k < k_count; ++k) {
        exposure += s.lambda[k] * s.theta(t - 1, k) * phiprod[k];
      }
    }
    const double shared =
        sample_gamma(hy.a0 + static_cast<double>(y_total), hy.b0 + exposure, rng);
    std::fill(s.rho.begin(), s.rho.end(), shared);
  } else {
    for (long t = 1; t <= s.num_steps; ++t) {
      double exposure = 0.0;
      for (long k = 0; k < k_count; ++k) {
        exposure += s.lambda[k] * s.theta(t - 1, k) * phiprod[k];
      }
      s.rho[t - 1] =
          sample_gamma(hy.a0 + static_cast<double>(data.step_total(t)),
                       hy.b0 + exposure, rng);
    }
  }
}

void gibbs_sweep(ModelState& s, const SparseCountSequence& data, Rng& rng) {
  update_y_sources(s, data, rng);
  update_h_sources(s, rng);
  update_h_theta(s, rng);
  update_lambda_g(s, rng);
  update_conjugates(s, data, rng);
}

void check_invariants(const ModelState& s, double tol) {
  const long k_count = s.num_components();
  auto fail = [](const std::string& what) { throw NumericError("invariant: " + what); };

  for (size_t i = 0; i < s.theta.size(); ++i) {
    const double v = s.theta.data()[i];
    if (!(v >= 0.0) || !std::isfinite(v)) fail("theta must be finite nonnegative");
  }
  for (double v : s.lambda) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail("lambda must be finite nonnegative");
  }
  for (double v : s.rho) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail("rho must be finite nonnegative");
  }
  for (double v : {s.tau, s.beta, s.gamma}) {
    if (!(v > 0.0) || !std::isfinite(v)) fail("scales must be finite positive");
  }
  for (long v : s.g) {
    if (v < 0) fail("g must be nonnegative");
  }

  for (long k2 = 0; k2 < k_count; ++k2) {
    double col = 0.0;
    for (long k1 = 0; k1 < k_count; ++k1) {
      if (!(s.pi(k1, k2) >= 0.0)) fail("pi entries must be nonnegative");
      col += s.pi(k1, k2);
    }
    if (std::abs(col - 1.0) > tol) fail("pi columns must sum to one");
  }
  for (const auto& mat : s.phi) {
    for (long k = 0; k < k_count; ++k) {
      double row = 0.0;
      for (double v : mat.row(k)) {
        if (!(v >= 0.0)) fail("phi entries must be nonnegative");
        row += v;
      }
      if (std::abs(row - 1.0) > tol) fail("phi rows must sum to one");
    }
  }

  for (long t = 1; t <= s.num_steps; ++t) {
    for (long k = 0; k < k_count; ++k) {
      long total = 0;
      for (long k2 = 0; k2 < k_count; ++k2) {
        const long v = s.h_src[t - 1](k, k2);
        if (v < 0) fail("h sources must be nonnegative");
        total += v;
      }
      if (total != s.h(t - 1, k)) fail("h source rows must sum to the row total");
    }
  }

  // Aggregate consistency between the component and per-mode y views.
  for (long m = 0; m < s.num_modes(); ++m) {
    for (long k = 0; k < k_count; ++k) {
      long by_mode = 0;
      for (long v : s.y_mode[m].row(k)) {
        if (v < 0) fail("y aggregates must be nonnegative");
        by_mode += v;
      }
      long by_comp = 0;
      for (long t = 1; t <= s.num_steps; ++t) by_comp += s.y_comp(t - 1, k);
      if (by_mode != by_comp) fail("y aggregates disagree across views");
    }
  }

  if (s.hyper.eps_theta == 0.0) {
    for (long t = 1; t <= s.num_steps; ++t) {
      const std::vector<long> col_next =
          t < s.num_steps ? h_src_col_sums(s, t + 1)
                          : std::vector<long>(static_cast<size_t>(k_count), 0);
      for (long k = 0; k < k_count; ++k) {
        const long shape_count =
            s.h(t - 1, k) + s.y_comp(t - 1, k) + col_next[k];
        const bool active = s.theta(t - 1, k) > 0.0;
        if (active != (shape_count > 0)) {
          fail("sparse variant: activation zero iff realized shape zero");
        }
      }
    }
  }
}

}  // namespace prgds
