// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/selftest.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "prgds/baseline.hpp"
#include "prgds/diagnostics.hpp"
#include "prgds/engine.hpp"
#include "prgds/errors.hpp"
#include "prgds/evaluation.hpp"
#include "prgds/kernels.hpp"
#include "prgds/model.hpp"
#include "prgds/special.hpp"
#include "prgds/tensor.hpp"

namespace prgds {

namespace {

constexpr long double kNegInf = -std::numeric_limits<long double>::infinity();

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Sampler goodness of fit on a parameter grid.

CheckResult check_sampler_gof(std::ostream* log) {
  Rng rng(414213562);
  bool ok = true;
  double min_p = 1.0;
  long double worst_norm = 0.0L;
  int n_cfg = 0;
  std::ostringstream failed;

  const auto one_config = [&](const std::function<long(Rng&)>& sampler,
                              const std::function<double(long)>& log_pmf,
                              long support_min, long mode,
                              const std::string& name) {
    ++n_cfg;
    const GofResult g = discrete_gof(sampler, log_pmf, 1000000, rng);
    min_p = std::min(min_p, g.p_value);
    if (!(g.p_value > 0.01)) {
      ok = false;
      failed << ' ' << name;
    }
    // The pmf must be properly normalized: sum it over the support, walking
    // well past the mode until terms vanish.
    long double total = 0.0L;
    for (long n = support_min; n < support_min + 2000000; ++n) {
      const long double p = std::exp(static_cast<long double>(log_pmf(n)));
      total += p;
      if (n > mode + 8 && p < 1e-18L) break;
    }
    worst_norm = std::max(worst_norm, std::fabs(total - 1.0L));
    note(log, "  " + name + ": chi2 p=" + fmt(g.p_value) +
                  " |pmf sum - 1|=" + fmt(static_cast<double>(std::fabs(total - 1.0L)), 2));
  };

  for (double order : {0.0, 0.5, 3.0}) {
    for (double scale : {0.1, 2.0, 50.0}) {
      const BesselParams p{order, scale};
      const BesselSampler s(p);
      one_config([&s](Rng& r) { return s(r); },
                 [p](long n) { return bessel_log_pmf(p, n); }, 0, bessel_mode(p),
                 "bessel(v=" + fmt(order, 2) + ",a=" + fmt(scale, 3) + ")");
    }
  }
  for (long m : {1L, 2L, 10L, 100L}) {
    for (double zeta : {0.05, 0.8, 5.0}) {
      const SchParams p{m, zeta};
      const SchSampler s(p);
      one_config([&s](Rng& r) { return s(r); },
                 [p](long h) { return sch_log_pmf(p, h); }, 1, sch_mode(p),
                 "sch(m=" + std::to_string(m) + ",z=" + fmt(zeta, 3) + ")");
    }
  }

  std::ostringstream detail;
  detail << n_cfg << " sampler configs x 1e6 draws; min chi2 p=" << fmt(min_p)
         << " (need >0.01); worst |pmf sum - 1|="
         << fmt(static_cast<double>(worst_norm), 2) << " (need <=1e-6)";
  if (!failed.str().empty()) detail << "; failed:" << failed.str();
  ok = ok && worst_norm <= 1e-6L;
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. Shape-increment posterior vs numeric marginalization.
//
// In the chain h ~ Pois(c1), theta ~ Gam(h, c2), m ~ Pois(theta*c3) with a
// zero shape offset, the posterior of h given m has the closed Pois/SCH form
// with zeta = c1*c2/(c3+c2). The oracle integrates theta out numerically
// (log-space Simpson in long double) for each h and normalizes over h.

long double simpson_log_marginal(long m, long h, double c2, double c3) {
  // log integral over theta of Pois(m; theta*c3) * Gam(theta; h, c2).
  const long double lc2 = static_cast<long double>(c2);
  const long double lc3 = static_cast<long double>(c3);
  const long double hi =
      (static_cast<long double>(m + h) + 25.0L * std::sqrt(static_cast<long double>(m + h + 1)) +
       40.0L) /
      (lc2 + lc3);
  const long double lo = hi * 1e-10L;
  const int n = 4096;  // even
  const long double step = (hi - lo) / n;
  const auto log_f = [&](long double th) -> long double {
    if (!(th > 0.0L)) return kNegInf;
    return static_cast<long double>(m) * (std::log(lc3) + std::log(th)) - th * lc3 -
           std::lgamma(static_cast<long double>(m) + 1.0L) +
           static_cast<long double>(h) * std::log(lc2) +
           static_cast<long double>(h - 1) * std::log(th) - lc2 * th -
           std::lgamma(static_cast<long double>(h));
  };
  long double max_lf = kNegInf;
  std::vector<long double> lf(n + 1);
  for (int i = 0; i <= n; ++i) {
    lf[i] = log_f(lo + step * i);
    max_lf = std::max(max_lf, lf[i]);
  }
  if (max_lf == kNegInf) return kNegInf;
  long double acc = 0.0L;
  for (int i = 0; i <= n; ++i) {
    const long double w = (i == 0 || i == n) ? 1.0L : (i % 2 == 1 ? 4.0L : 2.0L);
    acc += w * std::exp(lf[i] - max_lf);
  }
  return max_lf + std::log(acc * step / 3.0L);
}

CheckResult check_increment_posterior(std::ostream* log) {
  const std::vector<long> ms = {0, 1, 2, 5, 20};
  const std::vector<std::array<double, 3>> rates = {
      {1.0, 1.0, 1.0}, {0.5, 2.0, 0.3}, {3.0, 0.7, 1.6}};
  bool ok = true;
  double worst_tv = 0.0;
  int n_set = 0;
  for (long m : ms) {
    for (const auto& [c1, c2, c3] : rates) {
      ++n_set;
      const long h_max =
          static_cast<long>(c1 + 20.0 * std::sqrt(c1 + 1.0) + m +
                            20.0 * std::sqrt(static_cast<double>(m) + 1.0) + 30.0);
      // Oracle posterior over h.
      std::vector<long double> lw(static_cast<size_t>(h_max + 1), kNegInf);
      for (long h = 0; h <= h_max; ++h) {
        const long double prior =
            static_cast<long double>(h) * std::log(static_cast<long double>(c1)) -
            static_cast<long double>(c1) -
            std::lgamma(static_cast<long double>(h) + 1.0L);
        if (h == 0) {
          // Zero shape pins theta (and hence m) to zero.
          lw[0] = (m == 0) ? prior : kNegInf;
        } else {
          lw[static_cast<size_t>(h)] = prior + simpson_log_marginal(m, h, c2, c3);
        }
      }
      const long double max_lw = *std::max_element(lw.begin(), lw.end());
      long double norm = 0.0L;
      for (long double v : lw) norm += std::exp(v - max_lw);
      // Closed form under test.
      const double zeta = c1 * c2 / (c3 + c2);
      long double tv = 0.0L;
      for (long h = 0; h <= h_max; ++h) {
        const long double oracle = std::exp(lw[static_cast<size_t>(h)] - max_lw) / norm;
        long double closed = 0.0L;
        if (m == 0) {
          closed = std::exp(static_cast<long double>(h) *
                                std::log(static_cast<long double>(zeta)) -
                            static_cast<long double>(zeta) -
                            std::lgamma(static_cast<long double>(h) + 1.0L));
        } else if (h >= 1) {
          closed = std::exp(static_cast<long double>(sch_log_pmf(SchParams{m, zeta}, h)));
        }
        tv += std::fabs(oracle - closed);
      }
      const double tv_d = static_cast<double>(tv / 2.0L);
      worst_tv = std::max(worst_tv, tv_d);
      if (!(tv_d < 0.01)) ok = false;
      note(log, "  m=" + std::to_string(m) + " rates=(" + fmt(c1, 3) + "," +
                    fmt(c2, 3) + "," + fmt(c3, 3) + "): TV=" + fmt(tv_d, 3));
    }
  }
  std::ostringstream detail;
  detail << n_set << " (m, rate) settings; worst total variation vs numeric "
         << "marginalization " << fmt(worst_tv, 3) << " (need <0.01)";
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 3. Compound Poisson-gamma draws vs the closed-form marginal.

CheckResult check_compound_marginal(std::ostream* log) {
  bool ok = true;
  std::ostringstream detail;
  detail << "marginal draws vs mixture CDF:";
  const double intensity = 1.5;
  const double rate = 2.0;
  const long h_max = 70;  // Poisson(1.5) tail beyond this is ~1e-80

  std::vector<double> pois_w(static_cast<size_t>(h_max + 1));
  for (long h = 0; h <= h_max; ++h) {
    pois_w[static_cast<size_t>(h)] =
        std::exp(h * std::log(intensity) - intensity - std::lgamma(h + 1.0));
  }
  const auto mixture_cdf = [&](double shape_offset, double x) {
    double acc = 0.0;
    for (long h = 0; h <= h_max; ++h) {
      const double shape = shape_offset + static_cast<double>(h);
      const double term = shape == 0.0
                              ? 1.0  // zero-shape draw is exactly zero
                              : boost::math::gamma_p(shape, rate * x);
      acc += pois_w[static_cast<size_t>(h)] * term;
    }
    return acc;
  };
  const auto mixture_log_pdf = [&](double shape_offset, double x) {
    long double acc = 0.0L;
    for (long h = 0; h <= h_max; ++h) {
      const long double shape = static_cast<long double>(shape_offset) + h;
      if (shape == 0.0L) continue;
      acc += static_cast<long double>(pois_w[static_cast<size_t>(h)]) *
             std::exp(shape * std::log(static_cast<long double>(rate)) +
                      (shape - 1.0L) * std::log(static_cast<long double>(x)) -
                      static_cast<long double>(rate) * x - std::lgamma(shape));
    }
    return static_cast<double>(std::log(acc));
  };

  Rng rng(271828182);
  for (double eps : {0.5, 1.0, 3.0}) {
    const Rg1Params p{eps, intensity, rate};
    const long n = 20000;
    std::vector<double> draws(static_cast<size_t>(n));
    for (auto& v : draws) v = rg1_sample(p, rng);
    std::sort(draws.begin(), draws.end());
    double d_stat = 0.0;
    for (long i = 0; i < n; ++i) {
      const double f = mixture_cdf(eps, draws[static_cast<size_t>(i)]);
      d_stat = std::max(d_stat, std::max(f - static_cast<double>(i) / n,
                                         static_cast<double>(i + 1) / n - f));
    }
    const double root = std::sqrt(static_cast<double>(n));
    const double p_value = kolmogorov_q((root + 0.12 + 0.11 / root) * d_stat);
    // Density under test vs the independently assembled mixture density.
    double worst_pdf = 0.0;
    for (double x = 0.05; x <= 8.0; x += 0.05) {
      const double lhs = rg1_log_pdf(p, x);
      const double rhs = mixture_log_pdf(eps, x);
      worst_pdf =
          std::max(worst_pdf, std::fabs(lhs - rhs) / std::max(1.0, std::fabs(rhs)));
    }
    if (!(p_value > 0.01) || !(worst_pdf <= 1e-8)) ok = false;
    detail << " eps=" << fmt(eps, 2) << " KS p=" << fmt(p_value)
           << " pdf err=" << fmt(worst_pdf, 2) << ";";
    note(log, "  eps=" + fmt(eps, 2) + ": KS D=" + fmt(d_stat) + " p=" +
                  fmt(p_value) + " max pdf rel err=" + fmt(worst_pdf, 2));
  }

  // Zero shape offset: mass at exactly zero equals exp(-intensity).
  const long n_atom = 100000;
  long zeros = 0;
  const Rg1Params p0{0.0, intensity, rate};
  for (long i = 0; i < n_atom; ++i) {
    if (rg1_sample(p0, rng) == 0.0) ++zeros;
  }
  const double target = std::exp(-intensity);
  const double se = std::sqrt(target * (1.0 - target) / n_atom);
  const double atom_dev = std::fabs(static_cast<double>(zeros) / n_atom - target);
  if (!(atom_dev <= 3.0 * se)) ok = false;
  detail << " zero-atom dev=" << fmt(atom_dev, 2) << " (3SE=" << fmt(3.0 * se, 2)
         << ")";
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. Moment identities of the latent chains.

CheckResult check_moment_identities(std::ostream* log) {
  bool ok = true;
  std::ostringstream detail;
  Rng rng(161803398);

  // (a) One-step conditional mean: E[theta | prev] = eps/tau + Pi prev,
  // componentwise, with the source counts drawn per feeding component.
  {
    const long k_count = 3;
    const double eps = 1.0;
    const double tau = 1.3;
    const std::vector<double> prev = {0.4, 1.1, 2.0};
    Array2D<double> pi(k_count, k_count);
    for (long k2 = 0; k2 < k_count; ++k2) {
      double col = 0.0;
      std::vector<double> raw(static_cast<size_t>(k_count));
      for (long k = 0; k < k_count; ++k) {
        raw[static_cast<size_t>(k)] = 0.2 + sample_uniform(rng);
        col += raw[static_cast<size_t>(k)];
      }
      for (long k = 0; k < k_count; ++k) pi(k, k2) = raw[static_cast<size_t>(k)] / col;
    }
    const long n = 1000000;
    std::vector<double> sum(static_cast<size_t>(k_count), 0.0);
    std::vector<double> sum_sq(static_cast<size_t>(k_count), 0.0);
    for (long i = 0; i < n; ++i) {
      for (long k = 0; k < k_count; ++k) {
        long h = 0;
        for (long k2 = 0; k2 < k_count; ++k2) {
          h += sample_poisson(tau * pi(k, k2) * prev[static_cast<size_t>(k2)], rng);
        }
        const double th = sample_gamma(eps + static_cast<double>(h), tau, rng);
        sum[static_cast<size_t>(k)] += th;
        sum_sq[static_cast<size_t>(k)] += th * th;
      }
    }
    double worst_sigma = 0.0;
    for (long k = 0; k < k_count; ++k) {
      double target = eps / tau;
      for (long k2 = 0; k2 < k_count; ++k2) {
        target += pi(k, k2) * prev[static_cast<size_t>(k2)];
      }
      const double mean = sum[static_cast<size_t>(k)] / n;
      const double var =
          sum_sq[static_cast<size_t>(k)] / n - mean * mean;
      const double se = std::sqrt(var / n);
      worst_sigma = std::max(worst_sigma, std::fabs(mean - target) / se);
      note(log, "  conditional mean k=" + std::to_string(k) + ": |dev|/SE=" +
                    fmt(std::fabs(mean - target) / se, 3));
    }
    if (!(worst_sigma <= 3.0)) ok = false;
    detail << "one-step mean: worst |dev|/SE=" << fmt(worst_sigma, 3)
           << " over 3 components at 1e6 replicates (need <=3);";
  }

  // (b) Expected weight total (eps_lambda + gamma_val) / beta_val is
  // independent of the component budget K.
  {
    const double gamma_val = 2.5;
    const double beta_val = 1.5;
    const double eps_lambda = 1.0;
    const double target = (eps_lambda + gamma_val) / beta_val;
    double worst_sigma = 0.0;
    for (long k_count : {1L, 10L, 100L}) {
      const long n = k_count == 100 ? 200000 : 1000000;
      double acc = 0.0;
      double acc_sq = 0.0;
      for (long i = 0; i < n; ++i) {
        double total = 0.0;
        for (long k = 0; k < k_count; ++k) {
          const long g =
              sample_poisson(gamma_val / static_cast<double>(k_count), rng);
          total += sample_gamma(
              eps_lambda / static_cast<double>(k_count) + static_cast<double>(g),
              beta_val, rng);
        }
        acc += total;
        acc_sq += total * total;
      }
      const double mean = acc / n;
      const double se = std::sqrt((acc_sq / n - mean * mean) / n);
      const double sigma = std::fabs(mean - target) / se;
      worst_sigma = std::max(worst_sigma, sigma);
      note(log, "  weight total K=" + std::to_string(k_count) + ": mean=" +
                    fmt(mean, 5) + " target=" + fmt(target, 5) + " |dev|/SE=" +
                    fmt(sigma, 3));
    }
    if (!(worst_sigma <= 3.0)) ok = false;
    detail << " weight total: worst |dev|/SE=" << fmt(worst_sigma, 3)
           << " across K in {1,10,100} (need <=3)";
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 5. Geweke joint-distribution suite plus a mutation run.

SweepFn broken_tau_sweep() {
  // A correct full sweep followed by re-drawing the time-chain scale from
  // its conditional with the rate aggregate doubled.
  return [](ModelState& s, const SparseCountSequence& d, Rng& rng) {
    gibbs_sweep(s, d, rng);
    const long k_count = s.num_components();
    long h_total = 0;
    for (size_t i = 0; i < s.h.size(); ++i) h_total += s.h.data()[i];
    double theta_total = 0.0;
    for (size_t i = 0; i < s.theta.size(); ++i) theta_total += s.theta.data()[i];
    std::vector<double> picol(static_cast<size_t>(k_count), 0.0);
    for (long k2 = 0; k2 < k_count; ++k2) {
      for (long k = 0; k < k_count; ++k) picol[static_cast<size_t>(k2)] += s.pi(k, k2);
    }
    double drift = 0.0;
    for (long t = 1; t <= s.num_steps; ++t) {
      const auto prev = s.theta_prev(t);
      for (long k = 0; k < k_count; ++k) {
        drift += picol[static_cast<size_t>(k)] * prev[static_cast<size_t>(k)];
      }
    }
    const double shape =
        s.hyper.alpha0 +
        s.hyper.eps_theta * static_cast<double>(s.num_steps * k_count) +
        2.0 * static_cast<double>(h_total);
    const double rate = s.hyper.alpha0 + theta_total + drift;
    s.tau = sample_gamma(shape, 2.0 * rate, rng);
  };
}

CheckResult check_geweke_suite(std::ostream* log) {
  bool ok = true;
  std::ostringstream detail;
  const long n_samples = 10000;
  // The shared-scale configuration mixes a single global intensity slowly,
  // so the chain stream is thinned generously; moderate priors keep forward
  // draws inside simulation range.
  const long thin = 50;
  int run = 0;
  for (double eps : {0.0, 1.0}) {
    for (bool stationary : {false, true}) {
      ModelHyper hy;
      hy.num_components = 2;
      hy.eps_theta = eps;
      hy.a0 = 0.5;
      hy.b0 = 0.5;
      hy.stationary_rho = stationary;
      Rng rng(7100 + run);
      ++run;
      const GewekeReport rep =
          geweke_test(hy, {2, 2}, 3, n_samples, thin, 0.001, rng);
      double min_p = 1.0;
      for (const auto& st : rep.stats) {
        min_p = std::min(min_p, st.p_value);
        note(log, "  eps=" + fmt(eps, 1) + " shared-scale=" +
                      (stationary ? std::string("yes") : std::string("no")) +
                      " " + st.name + ": ks=" + fmt(st.ks_stat) + " p=" +
                      fmt(st.p_value));
      }
      if (!rep.pass) ok = false;
      detail << "eps=" << fmt(eps, 1) << "/" << (stationary ? "shared" : "per-step")
             << " min p=" << fmt(min_p, 3) << (rep.pass ? "" : " FAIL") << "; ";
    }
  }
  // The same harness must detect a deliberately broken conditional.
  {
    ModelHyper hy;
    hy.num_components = 2;
    hy.a0 = 0.5;
    hy.b0 = 0.5;
    Rng rng(7199);
    const GewekeReport rep =
        geweke_test(hy, {2, 2}, 3, n_samples, 5, 0.001, rng, broken_tau_sweep());
    bool tau_flagged = false;
    for (const auto& st : rep.stats) {
      if (st.name == "tau" && !st.pass) tau_flagged = true;
    }
    if (!tau_flagged || rep.pass) ok = false;
    detail << "doubled-rate mutation " << (tau_flagged ? "detected" : "MISSED");
    note(log, std::string("  mutation run: tau ") +
                  (tau_flagged ? "flagged as expected" : "NOT flagged"));
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. End-to-end synthetic recovery against the static baseline.

PosteriorSampleSet chain_subset(const PosteriorSampleSet& all, long chain) {
  PosteriorSampleSet out = all;
  out.samples.clear();
  for (const auto& s : all.samples) {
    if (s.chain == chain) out.samples.push_back(s);
  }
  return out;
}

CheckResult check_recovery(std::ostream* log) {
  // One scaling factor shared across steps, in generation and in every fit:
  // a free per-step scale is uninformed at held-out steps (only its own
  // imputed data would anchor it), which makes held-out prediction
  // meaningless for any model.
  ModelHyper gen;
  gen.num_components = 3;
  gen.a0 = 2.0;
  gen.b0 = 1.0;
  gen.stationary_rho = true;
  const std::vector<long> dims = {10, 10, 5};
  const long num_steps = 30;

  // First generating seed (from the pinned base) whose draw yields a data
  // volume worth fitting; the scan is deterministic.
  const uint64_t base_seed = 20260823;
  std::optional<SparseCountSequence> data;
  uint64_t gen_seed = base_seed;
  for (; gen_seed < base_seed + 200; ++gen_seed) {
    try {
      Rng g(gen_seed);
      const ModelState truth = sample_prior(gen, dims, num_steps, g);
      SparseCountSequence d = simulate_data(truth, g);
      if (d.total() >= 2000 && d.total() <= 60000) {
        data.emplace(std::move(d));
        break;
      }
    } catch (const NumericError&) {
      // overdispersed draw; try the next seed
    }
  }
  if (!data) return {false, "no generating seed produced usable data"};
  note(log, "  generating seed " + std::to_string(gen_seed) + ", total count " +
                std::to_string(data->total()) + ", nnz " +
                std::to_string(data->nnz()));

  Rng mask_rng(7);
  const HoldoutMask mask = make_holdout_mask(num_steps, 2, mask_rng);

  McmcConfig config;
  config.n_iterations = 2000;
  config.burn_in = 500;
  config.thin = 50;
  config.n_chains = 2;

  ModelHyper fit_hyper;
  fit_hyper.num_components = 3;
  fit_hyper.stationary_rho = true;

  FitOptions options;
  options.progress = log;
  options.progress_every = 1000;

  config.seed = 103;
  const PosteriorSampleSet stat_fit = fit_static_cp(*data, mask, fit_hyper, config, options);

  bool ok = true;
  std::ostringstream detail;
  detail << "seed " << gen_seed << " smoothing gain vs static:";
  for (double eps : {1.0, 0.0}) {
    ModelHyper hy = fit_hyper;
    hy.eps_theta = eps;
    McmcConfig cfg = config;
    cfg.seed = eps == 1.0 ? 101 : 102;
    const PosteriorSampleSet dyn = fit(*data, mask, hy, cfg, options);
    const double gain =
        information_rate(stat_fit, *data, mask, HeldoutSubset::kSmoothing) -
        information_rate(dyn, *data, mask, HeldoutSubset::kSmoothing);
    // Across-chain spread of the same gain.
    std::vector<double> per_chain;
    for (long c : {0L, 1L}) {
      per_chain.push_back(
          information_rate(chain_subset(stat_fit, c), *data, mask,
                           HeldoutSubset::kSmoothing) -
          information_rate(chain_subset(dyn, c), *data, mask,
                           HeldoutSubset::kSmoothing));
    }
    const double se = std::fabs(per_chain[0] - per_chain[1]) / 2.0;
    const bool this_ok = gain > 0.0 && gain > 3.0 * se;
    if (!this_ok) ok = false;
    detail << " eps=" << fmt(eps, 1) << ": " << fmt(gain, 3) << " nats/cell (3SE="
           << fmt(3.0 * se, 2) << ")" << (this_ok ? "" : " FAIL") << ";";
    note(log, "  eps=" + fmt(eps, 1) + ": gain=" + fmt(gain, 4) + " chain gains=" +
                  fmt(per_chain[0], 4) + "/" + fmt(per_chain[1], 4));
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. Sparse-variant semantics on bursty data.

CheckResult check_sparse_semantics(std::ostream* log) {
  // Hand-built generator: three components, each active in 6 of 40 steps
  // (15%), spatially separated so the fit must localize them in time. The
  // fit shares one scaling factor across steps; otherwise an empty step can
  // be explained by a near-zero per-step scale instead of dead activations.
  ModelHyper gen;
  gen.num_components = 3;
  const std::vector<long> dims = {6, 6};
  const long num_steps = 40;
  ModelState truth = make_empty_state(gen, dims, num_steps);
  truth.lambda = {4.0, 4.0, 4.0};
  truth.tau = 1.0;
  for (long k = 0; k < 3; ++k) {
    for (long d = 0; d < 6; ++d) {
      truth.phi[0](k, d) = (d / 2 == k) ? 0.5 : 0.0;  // disjoint row blocks
      truth.phi[1](k, d) = 1.0 / 6.0;
    }
  }
  const auto active = [](long t, long k) {
    const long start = 4 + k * 14;  // windows [4,9], [18,23], [32,37]
    return t >= start && t < start + 6;
  };
  for (long t = 1; t <= num_steps; ++t) {
    for (long k = 0; k < 3; ++k) {
      truth.theta(t - 1, k) = active(t, k) ? 3.0 : 0.0;
    }
  }
  Rng gen_rng(424242);
  const SparseCountSequence data = simulate_data(truth, gen_rng);
  note(log, "  bursty data: total " + std::to_string(data.total()) + ", nnz " +
                std::to_string(data.nnz()));

  McmcConfig config;
  config.n_iterations = 1200;
  config.burn_in = 400;
  config.thin = 25;
  config.n_chains = 2;
  const HoldoutMask mask = HoldoutMask::none(num_steps);

  bool ok = true;
  std::ostringstream detail;
  double sparse_fraction = 0.0;
  long dense_zeros = -1;
  for (double eps : {0.0, 1.0}) {
    ModelHyper hy;
    hy.num_components = 3;
    hy.eps_theta = eps;
    hy.a0 = 0.1;
    hy.b0 = 0.1;
    hy.stationary_rho = true;
    McmcConfig cfg = config;
    cfg.seed = eps == 0.0 ? 301 : 302;
    const PosteriorSampleSet fit_out = fit(data, mask, hy, cfg);
    long idle = 0;
    long idle_zero = 0;
    long exact_zero = 0;
    for (const auto& s : fit_out.samples) {
      for (long t = 1; t <= num_steps; ++t) {
        for (long k = 0; k < 3; ++k) {
          const bool is_zero = s.state.theta(t - 1, k) == 0.0;
          if (is_zero) ++exact_zero;
          if (s.state.y_comp(t - 1, k) == 0) {
            ++idle;
            if (is_zero) ++idle_zero;
          }
        }
      }
    }
    if (eps == 0.0) {
      sparse_fraction =
          idle > 0 ? static_cast<double>(idle_zero) / static_cast<double>(idle) : 0.0;
      if (!(idle > 0) || !(sparse_fraction > 0.5)) ok = false;
      note(log, "  sparse fit: " + std::to_string(idle_zero) + "/" +
                    std::to_string(idle) + " idle component-steps exactly zero");
    } else {
      dense_zeros = exact_zero;
      if (exact_zero != 0) ok = false;
      note(log, "  dense fit: " + std::to_string(exact_zero) + " exact zeros");
    }
  }
  detail << "idle component-steps exactly zero: " << fmt(100.0 * sparse_fraction, 3)
         << "% under the sparse variant (need >50%); " << dense_zeros
         << " exact zeros under the dense variant (need 0)";
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 8. Allocation cost is linear in the number of non-zero entries.

CheckResult check_allocation_scaling(std::ostream* log) {
  const long num_steps = 20;
  const std::vector<long> dims = {300, 300};
  const long k_count = 4;

  const auto build = [&](long per_step, uint64_t seed) {
    SparseCountSequence seq(num_steps, dims);
    Rng r(seed);
    std::vector<long> idx(2);
    for (long t = 1; t <= num_steps; ++t) {
      for (long e = 0; e < per_step; ++e) {
        idx[0] = static_cast<long>(r() % 300);
        idx[1] = static_cast<long>(r() % 300);
        seq.add(t, idx, 1 + e % 3);
      }
    }
    seq.finalize();
    return seq;
  };
  const SparseCountSequence small = build(10000, 11);
  const SparseCountSequence big = build(20000, 13);

  ModelHyper hy;
  hy.num_components = k_count;
  Rng rng(515);
  ModelState state = sample_prior(hy, dims, num_steps, rng);
  std::fill(state.lambda.begin(), state.lambda.end(), 1.0);
  for (size_t i = 0; i < state.theta.size(); ++i) state.theta.data()[i] = 1.0;

  Array2D<long> y_comp(num_steps, k_count);
  std::vector<Array2D<long>> y_mode;
  for (const auto& mat : state.phi) y_mode.emplace_back(mat.rows(), mat.cols());

  const auto time_alloc = [&](const SparseCountSequence& data, uint64_t key) {
    const auto t0 = std::chrono::steady_clock::now();
    allocate_y_sources(state, data, key, true, y_comp, y_mode, nullptr);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
  };
  // Warm-up, then five timed repetitions each.
  time_alloc(small, 1);
  time_alloc(big, 2);
  std::vector<double> t_small, t_big;
  for (int rep = 0; rep < 5; ++rep) {
    t_small.push_back(time_alloc(small, 100 + rep));
    t_big.push_back(time_alloc(big, 200 + rep));
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double ratio = median(t_big) / median(t_small);
  const bool ok = ratio >= 1.6 && ratio <= 2.5;
  note(log, "  nnz " + std::to_string(small.nnz()) + " -> " +
                std::to_string(big.nnz()) + ": median " + fmt(median(t_small), 3) +
                "s -> " + fmt(median(t_big), 3) + "s");
  std::ostringstream detail;
  detail << "allocation time ratio for 2x non-zeros (" << small.nnz() << " -> "
         << big.nnz() << "): " << fmt(ratio, 3) << " (need in [1.6, 2.5])";
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 9. Information-rate metric vs a high-precision oracle.

long double oracle_rate(const PosteriorSampleSet& samples,
                        const SparseCountSequence& data, const HoldoutMask& mask,
                        HeldoutSubset subset) {
  std::vector<long> steps;
  if (subset != HeldoutSubset::kForecasting) {
    steps.insert(steps.end(), mask.smoothing.begin(), mask.smoothing.end());
  }
  if (subset != HeldoutSubset::kSmoothing) {
    steps.insert(steps.end(), mask.forecasting.begin(), mask.forecasting.end());
  }
  std::sort(steps.begin(), steps.end());
  const long m_count = data.num_modes();
  const size_t n_samples = samples.samples.size();
  long double total = 0.0L;
  long cells = 0;
  for (long t : steps) {
    std::map<std::vector<long>, long> counts;
    for (long e = 0; e < data.nnz(t); ++e) {
      const auto idx = data.index(t, e);
      counts[std::vector<long>(idx.begin(), idx.end())] = data.count(t, e);
    }
    std::vector<long> idx(static_cast<size_t>(m_count), 0);
    while (true) {
      const auto it = counts.find(idx);
      const long y = it == counts.end() ? 0 : it->second;
      std::vector<long double> lp(n_samples);
      for (size_t si = 0; si < n_samples; ++si) {
        const ModelState& s = samples.samples[si].state;
        long double mu = 0.0L;
        for (long k = 0; k < s.num_components(); ++k) {
          long double term = static_cast<long double>(s.lambda[static_cast<size_t>(k)]) *
                             static_cast<long double>(s.theta(t - 1, k));
          for (long m = 0; m < m_count; ++m) {
            term *= static_cast<long double>(
                s.phi[static_cast<size_t>(m)](k, idx[static_cast<size_t>(m)]));
          }
          mu += term;
        }
        mu *= static_cast<long double>(s.rho[static_cast<size_t>(t - 1)]);
        lp[si] = mu <= 0.0L ? (y == 0 ? 0.0L : kNegInf)
                            : y * std::log(mu) - mu -
                                  std::lgamma(static_cast<long double>(y) + 1.0L);
      }
      const long double max_lp = *std::max_element(lp.begin(), lp.end());
      long double acc = 0.0L;
      for (long double v : lp) acc += std::exp(v - max_lp);
      total -= max_lp + std::log(acc / static_cast<long double>(n_samples));
      ++cells;
      long m = m_count - 1;
      for (; m >= 0; --m) {
        if (++idx[static_cast<size_t>(m)] < data.dims()[static_cast<size_t>(m)]) break;
        idx[static_cast<size_t>(m)] = 0;
      }
      if (m < 0) break;
    }
  }
  return total / static_cast<long double>(cells);
}

CheckResult check_metric_oracle(std::ostream* log) {
  bool ok = true;
  double worst_rel = 0.0;
  Rng rng(906090);
  int n_checked = 0;
  for (int c = 0; c < 100; ++c) {
    const long m_count = 1 + static_cast<long>(rng() % 3);
    std::vector<long> dims(static_cast<size_t>(m_count));
    for (auto& d : dims) d = 2 + static_cast<long>(rng() % 3);
    const long num_steps = 5 + static_cast<long>(rng() % 4);
    const long k_count = 1 + static_cast<long>(rng() % 4);
    const long n_smoothing = static_cast<long>(rng() % (num_steps - 3));
    const HoldoutMask mask = make_holdout_mask(num_steps, n_smoothing, rng);

    SparseCountSequence data(num_steps, dims);
    std::vector<long> idx(static_cast<size_t>(m_count));
    for (long t = 1; t <= num_steps; ++t) {
      const long n_entries = 1 + static_cast<long>(rng() % 6);
      for (long e = 0; e < n_entries; ++e) {
        for (long m = 0; m < m_count; ++m) {
          idx[static_cast<size_t>(m)] =
              static_cast<long>(rng() % static_cast<uint64_t>(dims[static_cast<size_t>(m)]));
        }
        data.add(t, idx, 1 + static_cast<long>(rng() % 4));
      }
    }
    data.finalize();

    ModelHyper hy;
    hy.num_components = k_count;
    PosteriorSampleSet set;
    set.model_name = "oracle-case";
    set.dataset = "synthetic";
    const long n_samples = 1 + static_cast<long>(rng() % 5);
    for (long s = 0; s < n_samples; ++s) {
      PosteriorSample ps;
      ps.chain = 0;
      ps.iteration = s;
      ps.state = make_empty_state(hy, dims, num_steps);
      for (auto& v : ps.state.lambda) v = 0.1 + sample_uniform(rng);
      for (size_t i = 0; i < ps.state.theta.size(); ++i) {
        ps.state.theta.data()[i] = 0.05 + sample_uniform(rng);
      }
      for (auto& v : ps.state.rho) v = 0.2 + sample_uniform(rng);
      for (auto& mat : ps.state.phi) {
        for (long k = 0; k < k_count; ++k) {
          double row_sum = 0.0;
          for (long d = 0; d < mat.cols(); ++d) {
            mat(k, d) = 0.1 + sample_uniform(rng);
            row_sum += mat(k, d);
          }
          for (long d = 0; d < mat.cols(); ++d) mat(k, d) /= row_sum;
        }
      }
      set.samples.push_back(std::move(ps));
    }

    for (HeldoutSubset subset : {HeldoutSubset::kSmoothing,
                                 HeldoutSubset::kForecasting, HeldoutSubset::kAll}) {
      if (subset == HeldoutSubset::kSmoothing && mask.smoothing.empty()) continue;
      const double got = information_rate(set, data, mask, subset);
      const double want = static_cast<double>(oracle_rate(set, data, mask, subset));
      const double rel = std::fabs(got - want) / std::max(1.0, std::fabs(want));
      worst_rel = std::max(worst_rel, rel);
      if (!(rel <= 1e-10)) ok = false;
      ++n_checked;
    }
  }
  note(log, "  " + std::to_string(n_checked) + " random rate evaluations checked");

  // Hand values on a one-cell held-out step: a unit-mean unit-count cell
  // costs exactly one nat, and -log(e^-2 2^2/2!) evaluates to 2 - log 2.
  double hand_err = 0.0;
  for (int which = 0; which < 2; ++which) {
    ModelHyper hy;
    hy.num_components = 1;
    PosteriorSampleSet set;
    set.model_name = "hand";
    PosteriorSample ps;
    ps.state = make_empty_state(hy, {1}, 5);
    ps.state.lambda = {1.0};
    for (size_t i = 0; i < ps.state.theta.size(); ++i) ps.state.theta.data()[i] = 1.0;
    for (auto& v : ps.state.rho) v = 1.0;
    ps.state.phi[0](0, 0) = 1.0;
    const long y = which == 0 ? 1 : 2;
    if (which == 1) ps.state.theta(2, 0) = 2.0;
    set.samples.push_back(ps);
    SparseCountSequence data(5, {1});
    const long held_idx[1] = {0};
    data.add(3, held_idx, y);
    data.finalize();
    const HoldoutMask mask{5, {3}, {4, 5}};
    const double got = information_rate(set, data, mask, HeldoutSubset::kSmoothing);
    const double want = which == 0 ? 1.0 : 2.0 - std::log(2.0);
    hand_err = std::max(hand_err, std::fabs(got - want));
  }
  if (!(hand_err <= 1e-12)) ok = false;

  std::ostringstream detail;
  detail << n_checked << " random cases vs long-double oracle, worst rel err "
         << fmt(worst_rel, 2) << " (need <=1e-10); hand values 1 and 2-log(2) off by "
         << fmt(hand_err, 2) << " (need <=1e-12)";
  return {ok, detail.str()};
}

}  // namespace

CheckResult acceptance_criterion(int n, std::ostream* log) {
  switch (n) {
    case 1: return check_sampler_gof(log);
    case 2: return check_increment_posterior(log);
    case 3: return check_compound_marginal(log);
    case 4: return check_moment_identities(log);
    case 5: return check_geweke_suite(log);
    case 6: return check_recovery(log);
    case 7: return check_sparse_semantics(log);
    case 8: return check_allocation_scaling(log);
    case 9: return check_metric_oracle(log);
    default:
      throw DataError("acceptance_criterion: n must be in 1.." +
                      std::to_string(kNumAcceptanceCriteria));
  }
}

bool run_suite(const std::string& name, std::ostream& out) {
  std::vector<int> criteria;
  if (name == "distributions") {
    criteria = {1, 2, 3, 4};
  } else if (name == "geweke") {
    criteria = {5};
  } else if (name == "scaling") {
    criteria = {8};
  } else {
    throw DataError("unknown selftest suite '" + name +
                    "' (want distributions, geweke, or scaling)");
  }
  bool all = true;
  for (int n : criteria) {
    const CheckResult r = acceptance_criterion(n, &out);
    out << "criterion " << n << ": " << (r.pass ? "PASS" : "FAIL") << " - "
        << r.detail << '\n';
    all = all && r.pass;
  }
  return all;
}

}  // namespace prgds
