// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/special.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "prgds/errors.hpp"
#include "prgds/rng.hpp"

using namespace prgds;

namespace {

// Total-variation distance between an empirical histogram over [lo, hi] and a
// pmf evaluated pointwise; tail mass outside the window counts in full.
template <class LogPmf>
double tv_against_pmf(const std::map<long, long>& hist, long n_draws, long lo,
                      long hi, LogPmf log_pmf) {
  double tv = 0.0;
  double model_mass = 0.0;
  long counted = 0;
  for (long n = lo; n <= hi; ++n) {
    const double p = std::exp(log_pmf(n));
    model_mass += p;
    const auto it = hist.find(n);
    const long c = it == hist.end() ? 0 : it->second;
    counted += c;
    tv += std::abs(static_cast<double>(c) / static_cast<double>(n_draws) - p);
  }
  tv += (1.0 - model_mass) + static_cast<double>(n_draws - counted) / n_draws;
  return 0.5 * tv;
}

template <class Sampler>
std::map<long, long> histogram(Sampler&& draw, long n_draws, Rng& rng) {
  std::map<long, long> hist;
  for (long i = 0; i < n_draws; ++i) ++hist[draw(rng)];
  return hist;
}

double mean_of(const std::map<long, long>& hist, long n_draws) {
  double s = 0.0;
  for (const auto& [v, c] : hist) s += static_cast<double>(v) * c;
  return s / static_cast<double>(n_draws);
}

}  // namespace

// ---------------------------------------------------------------------------
// log_bessel_i

TEST_CASE("log_bessel_i matches reference library values") {
  for (double v : {0.0, 0.5, 1.0, 2.0, 7.5, -0.5, -0.99}) {
    for (double x : {1e-3, 0.1, 1.0, 2.0, 10.0, 60.0, 300.0}) {
      const double expect = std::log(boost::math::cyl_bessel_i(v, x));
      CHECK(log_bessel_i(v, x) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("log_bessel_i frozen spot values") {
  CHECK(log_bessel_i(0.0, 2.0) ==
        doctest::Approx(std::log(2.2795853023360673)).epsilon(1e-13));
  CHECK(log_bessel_i(1.0, 2.0) ==
        doctest::Approx(std::log(1.590636854637329)).epsilon(1e-13));
}

TEST_CASE("log_bessel_i large-argument asymptotics") {
  // I_v(x) ~ e^x / sqrt(2 pi x) * (1 - (mu-1)/(8x) + (mu-1)(mu-9)/(2(8x)^2) - ...),
  // mu = 4 v^2. Independent of the ascending series used internally.
  for (double v : {0.0, 1.0, 3.0}) {
    const double x = 700.0;
    const double mu = 4.0 * v * v;
    const double t1 = -(mu - 1.0) / (8.0 * x);
    const double t2 = (mu - 1.0) * (mu - 9.0) / (2.0 * std::pow(8.0 * x, 2));
    const double t3 =
        -(mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * std::pow(8.0 * x, 3));
    const double expect =
        x - 0.5 * std::log(2.0 * M_PI * x) + std::log1p(t1 + t2 + t3);
    CHECK(log_bessel_i(v, x) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("log_bessel_i edge and error cases") {
  CHECK(log_bessel_i(0.0, 0.0) == 0.0);
  CHECK(log_bessel_i(2.0, 0.0) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(log_bessel_i(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(-2.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(0.0, -1.0), std::domain_error);
}

// ---------------------------------------------------------------------------
// log_hyp1f1

TEST_CASE("log_hyp1f1 matches reference library values") {
  for (double a : {0.5, 1.0, 3.0, 11.0}) {
    for (double b : {0.7, 2.0, 5.0}) {
      for (double z : {0.01, 0.5, 2.0, 30.0}) {
        const double expect = std::log(boost::math::hypergeometric_1F1(a, b, z));
        CHECK(log_hyp1f1(a, b, z) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
  CHECK(log_hyp1f1(3.0, 2.0, 0.5) ==
        doctest::Approx(std::log(2.0609015883751605)).epsilon(1e-13));
  CHECK(log_hyp1f1(1.0, 1.0, 0.0) == 0.0);
  CHECK_THROWS_AS(log_hyp1f1(0.0, 2.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_hyp1f1(1.0, 2.0, -1.0), std::domain_error);
}

// ---------------------------------------------------------------------------
// Bessel distribution

TEST_CASE("bessel pmf normalizes and matches direct normalization") {
  for (double v : {0.0, 0.3, 1.0, 4.0, -0.5}) {
    for (double a : {0.1, 1.0, 2.0, 8.0, 30.0}) {
      const BesselParams p{v, a};
      // Direct normalization in extended precision, no Bessel function.
      long double z = 0.0L;
      std::vector<long double> w(400);
      for (long n = 0; n < 400; ++n) {
        const long double lw = (2.0L * n + v) * std::log(0.5L * a) -
                               std::lgamma(static_cast<double>(n) + 1.0) -
                               std::lgamma(static_cast<double>(n) + v + 1.0);
        w[n] = std::exp(lw);
        z += w[n];
      }
      double total = 0.0;
      for (long n = 0; n < 400; ++n) {
        const double expect = static_cast<double>(w[n] / z);
        const double got = std::exp(bessel_log_pmf(p, n));
        total += got;
        if (expect > 1e-300) {
          CHECK(got == doctest::Approx(expect).epsilon(1e-10));
        }
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("bessel frozen spot values") {
  const BesselParams p{0.0, 2.0};
  CHECK(std::exp(bessel_log_pmf(p, 0)) ==
        doctest::Approx(0.43867627983704877).epsilon(1e-12));
  CHECK(std::exp(bessel_log_pmf(p, 1)) ==
        doctest::Approx(0.43867627983704877).epsilon(1e-12));
  double mean = 0.0;
  for (long n = 0; n < 80; ++n) mean += n * std::exp(bessel_log_pmf(p, n));
  CHECK(mean == doctest::Approx(0.697774657964008).epsilon(1e-12));
  // The mean also satisfies (a/2) I_{v+1}(a) / I_v(a).
  CHECK(mean == doctest::Approx(std::exp(std::log(1.0) +
                                         log_bessel_i(1.0, 2.0) -
                                         log_bessel_i(0.0, 2.0)))
                    .epsilon(1e-12));
}

TEST_CASE("bessel mode attains the brute-force maximum") {
  for (double v : {0.0, 0.5, 1.0, 3.0, -0.5}) {
    for (double a : {0.05, 0.5, 2.0, 9.0, 50.0, 500.0}) {
      const BesselParams p{v, a};
      double best_lp = -std::numeric_limits<double>::infinity();
      for (long n = 0; n < 2000; ++n) {
        best_lp = std::max(best_lp, bessel_log_pmf(p, n));
      }
      // Exact ties (and their floating images) may legitimately resolve to
      // either neighbor, so compare masses rather than indices.
      CHECK(bessel_log_pmf(p, bessel_mode(p)) >= best_lp - 1e-9);
    }
  }
  CHECK(bessel_mode(BesselParams{0.0, 0.0}) == 0);
  // An exact tie prefers the smaller point: scale 2, order 0 has P(0) = P(1).
  CHECK(bessel_mode(BesselParams{0.0, 2.0}) == 0);
}

TEST_CASE("bessel sampler matches pmf in total variation") {
  Rng rng(20260823);
  for (auto [v, a] : std::vector<std::pair<double, double>>{
           {0.0, 2.0}, {1.0, 0.5}, {0.0, 20.0}, {-0.5, 3.0}}) {
    const BesselSampler sampler(BesselParams{v, a});
    const long n_draws = 400000;
    const auto hist = histogram(sampler, n_draws, rng);
    const double tv = tv_against_pmf(hist, n_draws, 0, 200, [&](long n) {
      return bessel_log_pmf(BesselParams{v, a}, n);
    });
    CHECK(tv < 0.01);
  }
}

TEST_CASE("bessel scale zero degenerates to zero") {
  Rng rng(7);
  CHECK(bessel_sample(BesselParams{0.5, 0.0}, rng) == 0);
  CHECK(bessel_log_pmf(BesselParams{0.5, 0.0}, 0) == 0.0);
  CHECK(bessel_log_pmf(BesselParams{0.5, 0.0}, 1) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("bessel parameter validation") {
  CHECK_THROWS_AS(validate(BesselParams{-1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(validate(BesselParams{0.0, -0.1}), std::domain_error);
  CHECK_THROWS_AS(validate(BesselParams{0.0, std::nan("")}), std::domain_error);
}

// ---------------------------------------------------------------------------
// SCH distribution

TEST_CASE("sch pmf normalizes and matches direct normalization") {
  for (long m : {1L, 2L, 7L, 40L}) {
    for (double zeta : {0.05, 0.5, 1.0, 4.0}) {
      const SchParams p{m, zeta};
      long double z = 0.0L;
      std::vector<long double> w(600);
      for (long h = 1; h < 600; ++h) {
        const long double lw =
            h * std::log(static_cast<long double>(zeta)) +
            std::lgamma(static_cast<double>(m + h)) -
            std::lgamma(static_cast<double>(h) + 1.0) -
            std::lgamma(static_cast<double>(h));
        w[h] = std::exp(lw);
        z += w[h];
      }
      double total = 0.0;
      for (long h = 1; h < 600; ++h) {
        const double expect = static_cast<double>(w[h] / z);
        const double got = std::exp(sch_log_pmf(p, h));
        total += got;
        if (expect > 1e-290) {
          CHECK(got == doctest::Approx(expect).epsilon(1e-10));
        }
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(std::exp(sch_log_pmf(p, 0)) == 0.0);
    }
  }
}

TEST_CASE("sch frozen spot values") {
  CHECK(std::exp(sch_log_pmf(SchParams{2, 0.5}, 1)) ==
        doctest::Approx(0.48522452777010666).epsilon(1e-12));
  auto mean = [](long m, double zeta) {
    double s = 0.0;
    for (long h = 1; h < 400; ++h) {
      s += h * std::exp(sch_log_pmf(SchParams{m, zeta}, h));
    }
    return s;
  };
  CHECK(mean(10, 0.1) == doctest::Approx(1.4838043429681347).epsilon(1e-12));
  CHECK(mean(3, 2.0) == doctest::Approx(3.9090909090909096).epsilon(1e-12));
}

TEST_CASE("sch mode attains the brute-force maximum") {
  for (long m : {1L, 2L, 10L, 100L}) {
    for (double zeta : {0.01, 0.3, 1.0, 2.0, 9.0}) {
      const SchParams p{m, zeta};
      double best_lp = -std::numeric_limits<double>::infinity();
      for (long h = 1; h < 3000; ++h) {
        best_lp = std::max(best_lp, sch_log_pmf(p, h));
      }
      CHECK(sch_log_pmf(p, sch_mode(p)) >= best_lp - 1e-9);
    }
  }
  CHECK(sch_mode(SchParams{5, 0.0}) == 1);
  // Exact tie at the support edge prefers the smaller point.
  CHECK(sch_mode(SchParams{1, 1.0}) == 1);
}

TEST_CASE("sch sampler matches pmf in total variation") {
  Rng rng(31415);
  for (auto [m, zeta] : std::vector<std::pair<long, double>>{
           {1, 0.5}, {3, 2.0}, {25, 0.4}, {2, 6.0}}) {
    const SchSampler sampler(SchParams{m, zeta});
    const long n_draws = 400000;
    const auto hist = histogram(sampler, n_draws, rng);
    const double tv = tv_against_pmf(hist, n_draws, 1, 300, [&](long h) {
      return sch_log_pmf(SchParams{m, zeta}, h);
    });
    CHECK(tv < 0.01);
  }
}

TEST_CASE("sch zeta zero degenerates to one") {
  Rng rng(7);
  CHECK(sch_sample(SchParams{4, 0.0}, rng) == 1);
  CHECK(sch_log_pmf(SchParams{4, 0.0}, 1) == 0.0);
  CHECK(sch_log_pmf(SchParams{4, 0.0}, 2) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("sch parameter validation") {
  CHECK_THROWS_AS(validate(SchParams{0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(validate(SchParams{2, -0.5}), std::domain_error);
}

// ---------------------------------------------------------------------------
// Randomized gamma (first type)

TEST_CASE("rg1 density matches the mixture oracle and sample moments") {
  for (auto [e, lam, beta] : std::vector<std::array<double, 3>>{
           {1.0, 2.0, 1.0}, {0.5, 0.3, 2.0}, {3.0, 10.0, 0.7}}) {
    const Rg1Params p{e, lam, beta};
    const double mean = (e + lam) / beta;
    const double sd = std::sqrt((e + lam) / (beta * beta) + lam / (beta * beta));

    // Pointwise oracle: sum the Poisson-weighted gamma densities directly.
    auto mixture = [&](double x) {
      long double acc = 0.0L;
      for (long h = 0; h < 300; ++h) {
        const double sh = e + static_cast<double>(h);
        const long double lw = -lam + h * std::log(lam) -
                               std::lgamma(static_cast<double>(h) + 1.0) +
                               sh * std::log(beta) + (sh - 1.0) * std::log(x) -
                               beta * x - std::lgamma(sh);
        acc += std::exp(lw);
      }
      return static_cast<double>(acc);
    };
    for (double x : {0.03, 0.4, 1.0, mean, mean + 3 * sd}) {
      CHECK(std::exp(rg1_log_pdf(p, x)) ==
            doctest::Approx(mixture(x)).epsilon(1e-10));
    }

    // Simpson quadrature; skipped below shape 1 where the density has an
    // integrable singularity at zero.
    if (e >= 1.0) {
      const double hi = mean + 14.0 * sd;
      const long n_panels = 40000;
      const double dx = hi / n_panels;
      double integral = 0.0, first_moment = 0.0;
      for (long i = 0; i <= n_panels; ++i) {
        const double x = std::max(1e-12, i * dx);
        const double f = std::exp(rg1_log_pdf(p, x));
        const double wgt = (i == 0 || i == n_panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        integral += wgt * f;
        first_moment += wgt * f * x;
      }
      integral *= dx / 3.0;
      first_moment *= dx / 3.0;
      CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(first_moment == doctest::Approx(mean).epsilon(1e-5));
    }

    Rng rng(99 + static_cast<unsigned>(e * 10));
    const long n_draws = 200000;
    double acc = 0.0, acc2 = 0.0;
    for (long i = 0; i < n_draws; ++i) {
      const double x = rg1_sample(p, rng);
      acc += x;
      acc2 += x * x;
    }
    const double sample_mean = acc / n_draws;
    const double sample_var = acc2 / n_draws - sample_mean * sample_mean;
    const double se_mean = sd / std::sqrt(static_cast<double>(n_draws));
    CHECK(std::abs(sample_mean - mean) < 4.0 * se_mean);
    const double var = (e + lam) / (beta * beta) + lam / (beta * beta);
    CHECK(sample_var == doctest::Approx(var).epsilon(0.05));
  }
}

TEST_CASE("rg1 with zero intensity is plain gamma") {
  const Rg1Params p{2.5, 0.0, 1.5};
  for (double x : {0.1, 1.0, 3.0}) {
    const double expect = 2.5 * std::log(1.5) + 1.5 * std::log(x) - 1.5 * x -
                          std::lgamma(2.5);
    CHECK(rg1_log_pdf(p, x) == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("rg1 zero shape offset places an atom at zero") {
  const Rg1Params p{0.0, 1.3, 2.0};
  Rng rng(123);
  const long n_draws = 200000;
  long zeros = 0;
  for (long i = 0; i < n_draws; ++i) {
    if (rg1_sample(p, rng) == 0.0) ++zeros;
  }
  const double p0 = std::exp(-1.3);
  const double se = std::sqrt(p0 * (1 - p0) / n_draws);
  CHECK(std::abs(static_cast<double>(zeros) / n_draws - p0) < 4.0 * se);
  CHECK_THROWS_AS(rg1_log_pdf(p, 1.0), std::domain_error);
}

TEST_CASE("rg1 parameter validation") {
  CHECK_THROWS_AS(validate(Rg1Params{-0.1, 1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(validate(Rg1Params{1.0, -1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(validate(Rg1Params{1.0, 1.0, 0.0}), std::domain_error);
}

// ---------------------------------------------------------------------------
// PmfTable on a known distribution

TEST_CASE("pmf table reproduces a geometric distribution") {
  const double r = 0.5;
  const PmfTable table(0, 0, [r](long) { return r; });
  Rng rng(555);
  const long n_draws = 300000;
  std::map<long, long> hist;
  for (long i = 0; i < n_draws; ++i) ++hist[table.draw(rng)];
  const double tv = tv_against_pmf(hist, n_draws, 0, 120, [r](long n) {
    return std::log1p(-r) + n * std::log(r);
  });
  CHECK(tv < 0.01);
  CHECK(mean_of(hist, n_draws) == doctest::Approx(r / (1 - r)).epsilon(0.02));
  CHECK(table.support_lo() == 0);
}

// ---------------------------------------------------------------------------
// Posterior of the Poisson shape increment

TEST_CASE("shape increment posterior matches forward simulation when marginalized") {
  // Chain: h ~ Pois(c1), theta ~ Gam(h, c2) with zero-shape-is-zero, then
  // m ~ Pois(theta c3). Conditioning on the observed m by rejection gives an
  // oracle for the marginalized posterior of h.
  const double c1 = 2.0, c2 = 3.0, c3 = 1.0;
  Rng rng(2024);
  const long n_forward = 1200000;
  std::map<long, std::map<long, long>> cond;  // m -> histogram of h
  std::map<long, long> m_count;
  for (long i = 0; i < n_forward; ++i) {
    const long h = sample_poisson(c1, rng);
    const double theta = sample_gamma(static_cast<double>(h), c2, rng);
    const long m = sample_poisson(theta * c3, rng);
    ++cond[m][h];
    ++m_count[m];
  }
  for (long m0 : {1L, 2L, 4L}) {
    const long n_cond = m_count[m0];
    REQUIRE(n_cond > 10000);
    std::map<long, long> direct;
    for (long i = 0; i < n_cond; ++i) {
      ++direct[pgp_posterior_h(m0, true, 0.0, 0.0, c1, c2, c3, rng)];
    }
    const double zeta = c1 * c2 / (c3 + c2);
    double tv = 0.0;
    for (long h = 0; h <= 60; ++h) {
      const auto f = cond[m0].find(h);
      const auto g = direct.find(h);
      const double pf = f == cond[m0].end()
                            ? 0.0
                            : static_cast<double>(f->second) / n_cond;
      const double pg =
          g == direct.end() ? 0.0 : static_cast<double>(g->second) / n_cond;
      tv += std::abs(pf - pg);
      // The conditional law is SCH(m0, zeta); check against the pmf too.
      if (pf > 0.02) {
        CHECK(pf == doctest::Approx(std::exp(sch_log_pmf(SchParams{m0, zeta}, h)))
                        .epsilon(0.1));
      }
    }
    CHECK(0.5 * tv < 0.03);
  }
  // m == 0: the posterior is Poisson with the thinned intensity.
  const long n0 = m_count[0];
  double acc = 0.0;
  for (long i = 0; i < n0; ++i) {
    acc += static_cast<double>(pgp_posterior_h(0, true, 0.0, 0.0, c1, c2, c3, rng));
  }
  const double zeta = c1 * c2 / (c3 + c2);
  CHECK(acc / n0 == doctest::Approx(mean_of(cond[0], n0)).epsilon(0.03));
  CHECK(acc / n0 == doctest::Approx(zeta).epsilon(0.03));
}

TEST_CASE("shape increment posterior is invariant for the conjugate pair") {
  // Joint: h ~ Pois(c1), theta ~ Gam(eps + h, c2). Alternating the exact
  // conditionals h | theta (this module) and theta | h (gamma) must keep the
  // marginals: h ~ Pois(c1), E[theta] = (eps + c1) / c2.
  const double eps = 1.0, c1 = 1.7, c2 = 2.3;
  Rng rng(4242);
  double theta = 1.0;
  long h = 1;
  const long burn = 2000, keep = 300000;
  double h_acc = 0.0, h_acc2 = 0.0, t_acc = 0.0;
  for (long i = 0; i < burn + keep; ++i) {
    h = pgp_posterior_h(0, false, eps, theta, c1, c2, 0.0, rng);
    theta = sample_gamma(eps + static_cast<double>(h), c2, rng);
    if (i >= burn) {
      h_acc += static_cast<double>(h);
      h_acc2 += static_cast<double>(h) * static_cast<double>(h);
      t_acc += theta;
    }
  }
  const double h_mean = h_acc / keep;
  const double h_var = h_acc2 / keep - h_mean * h_mean;
  // Autocorrelated chain: allow a few times the iid standard error.
  CHECK(h_mean == doctest::Approx(c1).epsilon(0.03));
  CHECK(h_var == doctest::Approx(c1).epsilon(0.06));
  CHECK(t_acc / keep == doctest::Approx((eps + c1) / c2).epsilon(0.03));
}

TEST_CASE("shape increment posterior rejects mismatched regimes") {
  Rng rng(1);
  CHECK_THROWS_AS(pgp_posterior_h(1, false, 0.0, 1.0, 1.0, 1.0, 0.0, rng),
                  std::domain_error);
  CHECK_THROWS_AS(pgp_posterior_h(1, true, 0.5, 0.0, 1.0, 1.0, 1.0, rng),
                  std::domain_error);
  CHECK_THROWS_AS(pgp_posterior_h(-2, true, 0.0, 0.0, 1.0, 1.0, 1.0, rng),
                  std::domain_error);
  CHECK_THROWS_AS(pgp_posterior_h(1, false, 1.0, -1.0, 1.0, 1.0, 0.0, rng),
                  std::domain_error);
}
