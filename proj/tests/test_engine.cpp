// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/engine.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "prgds/checkpoint.hpp"
#include "prgds/errors.hpp"
#include "prgds/model.hpp"
#include "prgds/tensor.hpp"

using namespace prgds;

namespace {

// Simulates a small live dataset so fits have something to chew on.
SparseCountSequence make_live_data(long num_steps, std::vector<long> dims,
                                   long k_count, unsigned seed) {
  ModelHyper hy;
  hy.num_components = k_count;
  Rng rng(seed);
  ModelState s = sample_prior(hy, dims, num_steps, rng);
  for (auto& v : s.lambda) v = sample_gamma(4.0, 1.0, rng);
  for (size_t i = 0; i < s.theta.size(); ++i) {
    s.theta.data()[i] = sample_gamma(2.0, 1.0, rng);
  }
  for (auto& v : s.rho) v = 1.0;
  return simulate_data(s, rng);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& leaf) const {
    return (path / leaf).string();
  }
};

}  // namespace

TEST_CASE("saved-sample count follows the schedule formula") {
  McmcConfig config;
  CHECK(num_saved_samples(config) == 120);
  config.n_iterations = 61;
  config.burn_in = 20;
  config.thin = 10;
  config.n_chains = 3;
  CHECK(num_saved_samples(config) == 12);
  validate(config);
}

TEST_CASE("inconsistent schedules are rejected") {
  McmcConfig config;
  config.n_iterations = 0;
  CHECK_THROWS_AS(validate(config), DataError);
  config = McmcConfig{};
  config.burn_in = config.n_iterations;
  CHECK_THROWS_AS(validate(config), DataError);
  config = McmcConfig{};
  config.thin = 0;
  CHECK_THROWS_AS(validate(config), DataError);
  config = McmcConfig{};
  config.n_chains = 0;
  CHECK_THROWS_AS(validate(config), DataError);
  SparseCountSequence data(3, {2});
  data.finalize();
  ModelHyper hy;
  hy.num_components = 2;
  config = McmcConfig{};
  CHECK_THROWS_AS(fit(data, HoldoutMask::none(5), hy, config), DataError);
}

TEST_CASE("fitting an empty sequence runs and keeps states valid") {
  SparseCountSequence data(5, {3, 2});
  data.finalize();
  McmcConfig config;
  config.n_iterations = 40;
  config.burn_in = 10;
  config.thin = 5;
  config.n_chains = 2;
  config.seed = 11;
  for (double eps : {0.0, 1.0}) {
    ModelHyper hy;
    hy.eps_theta = eps;
    hy.num_components = 3;
    const auto set = fit(data, HoldoutMask::none(5), hy, config);
    CHECK(static_cast<long>(set.samples.size()) == num_saved_samples(config));
    CHECK(set.model_name == "prgds");
    for (const auto& sample : set.samples) {
      check_invariants(sample.state);
      CHECK(sample.iteration > config.burn_in);
    }
  }
}

TEST_CASE("fits are deterministic in the seed and leave the data untouched") {
  const auto data = make_live_data(6, {4, 3}, 3, 2024);
  REQUIRE(data.nnz() > 0);
  const auto pristine = data;
  Rng mask_rng(7);
  const auto mask = make_holdout_mask(6, 1, mask_rng);
  McmcConfig config;
  config.n_iterations = 30;
  config.burn_in = 10;
  config.thin = 4;
  config.n_chains = 2;
  config.seed = 99;
  ModelHyper hy;
  hy.num_components = 3;
  const auto a = fit(data, mask, hy, config);
  const auto b = fit(data, mask, hy, config);
  CHECK(a == b);
  CHECK(data == pristine);
  config.seed = 100;
  const auto c = fit(data, mask, hy, config);
  CHECK_FALSE(a == c);
}

TEST_CASE("imputation draws match a known uniform rate") {
  ModelHyper hy;
  hy.num_components = 1;
  ModelState s = make_empty_state(hy, {100, 1000}, 3);
  s.pi(0, 0) = 1.0;
  for (long d = 0; d < 100; ++d) s.phi[0](0, d) = 1.0 / 100.0;
  for (long d = 0; d < 1000; ++d) s.phi[1](0, d) = 1.0 / 1000.0;
  s.lambda[0] = 2.0e5;
  for (long t = 1; t <= 3; ++t) s.theta(t - 1, t == 2 ? 0 : 0) = t == 2 ? 1.0 : 1.0;
  for (auto& v : s.rho) v = 1.0;

  HoldoutMask mask;
  mask.num_steps = 3;
  mask.smoothing = {2};
  Rng rng(8);
  const auto imputed = impute_heldout(s, mask, rng);
  CHECK(imputed.nnz(1) == 0);
  CHECK(imputed.nnz(3) == 0);
  const double cells = 1e5;
  const double per_cell = static_cast<double>(imputed.step_total(2)) / cells;
  CHECK(std::abs(per_cell - 2.0) < 3.0 * std::sqrt(2.0 / cells));

  Rng r1(5), r2(5);
  CHECK(impute_heldout(s, mask, r1) == impute_heldout(s, mask, r2));

  s.theta.fill(0.0);
  Rng r3(5);
  CHECK(impute_heldout(s, mask, r3).nnz() == 0);

  HoldoutMask bad;
  bad.num_steps = 4;
  Rng r4(5);
  CHECK_THROWS_AS(impute_heldout(s, bad, r4), DataError);
}

TEST_CASE("non-finite states are reported with chain and iteration") {
  ModelHyper hy;
  hy.num_components = 2;
  Rng rng(3);
  auto s = sample_prior(hy, {2}, 2, rng);
  throw_if_non_finite(s, 0, 5);
  s.theta(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    throw_if_non_finite(s, 3, 17);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("chain 3") != std::string::npos);
    CHECK(msg.find("iteration 17") != std::string::npos);
    CHECK(msg.find("theta") != std::string::npos);
  }
}

TEST_CASE("state blocks and archives round-trip bit-exactly") {
  ModelHyper hy;
  hy.eps_theta = 0.0;
  hy.num_components = 3;
  hy.stationary_rho = true;
  Rng rng(771);
  const auto s = sample_prior(hy, {3, 4}, 5, rng);

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  write_state(buf, s);
  const ModelState back = read_state(buf);
  CHECK(back == s);

  std::stringstream rbuf(std::ios::in | std::ios::out | std::ios::binary);
  write_rng(rbuf, rng);
  Rng restored = read_rng(rbuf);
  Rng expect = rng;
  for (int i = 0; i < 100; ++i) CHECK(restored() == expect());

  TempDir dir("prgds_engine_archive");
  PosteriorSampleSet set;
  set.model_name = "prgds";
  set.dataset = "synthetic";
  set.mask_seed = 42;
  set.invocation = "unit-test";
  set.samples.push_back(PosteriorSample{0, 10, s});
  set.samples.push_back(PosteriorSample{1, 20, s});
  const std::string path = dir.file("samples.bin");
  save_samples(path, set);
  const auto loaded = load_samples(path);
  CHECK(loaded == set);

  std::ofstream(dir.file("junk.bin"), std::ios::binary) << "not an archive";
  CHECK_THROWS_AS(load_samples(dir.file("junk.bin")), DataError);
  CHECK_THROWS_AS(load_samples(dir.file("missing.bin")), DataError);
}

TEST_CASE("interrupted runs resume to the identical sample set") {
  const auto data = make_live_data(5, {3, 3}, 2, 515);
  REQUIRE(data.nnz() > 0);
  Rng mask_rng(2);
  const auto mask = make_holdout_mask(5, 1, mask_rng);
  ModelHyper hy;
  hy.num_components = 2;
  McmcConfig config;
  config.n_iterations = 40;
  config.burn_in = 8;
  config.thin = 4;
  config.n_chains = 2;
  config.seed = 321;

  const auto full = fit(data, mask, hy, config);

  TempDir dir("prgds_engine_resume");
  FitOptions options;
  options.checkpoint_prefix = dir.file("run");
  options.checkpoint_every = 10;
  options.stop_after = 17;
  const auto partial = fit(data, mask, hy, config, options);
  CHECK(static_cast<long>(partial.samples.size()) <
        num_saved_samples(config));

  options.stop_after = 0;
  const auto resumed = fit(data, mask, hy, config, options);
  CHECK(resumed == full);

  // A second invocation after completion replays the stored result.
  const auto replay = fit(data, mask, hy, config, options);
  CHECK(replay == full);

  // A different schedule must refuse the stale checkpoint.
  McmcConfig other = config;
  other.n_iterations = 50;
  CHECK_THROWS_AS(fit(data, mask, hy, other, options), DataError);
}

TEST_CASE("checkpointed and plain runs agree") {
  const auto data = make_live_data(4, {3, 2}, 2, 99);
  ModelHyper hy;
  hy.num_components = 2;
  McmcConfig config;
  config.n_iterations = 20;
  config.burn_in = 5;
  config.thin = 5;
  config.n_chains = 1;
  config.seed = 7;
  const auto plain = fit(data, HoldoutMask::none(4), hy, config);

  TempDir dir("prgds_engine_ckpt");
  FitOptions options;
  options.checkpoint_prefix = dir.file("run");
  options.checkpoint_every = 7;
  const auto checkpointed =
      fit(data, HoldoutMask::none(4), hy, config, options);
  CHECK(checkpointed == plain);
}

TEST_CASE("progress lines follow the chain-iter-phase-seconds shape") {
  const auto data = make_live_data(4, {2, 2}, 2, 5);
  ModelHyper hy;
  hy.num_components = 2;
  McmcConfig config;
  config.n_iterations = 10;
  config.burn_in = 2;
  config.thin = 2;
  config.n_chains = 1;
  config.seed = 3;
  std::ostringstream log;
  FitOptions options;
  options.progress = &log;
  options.progress_every = 5;
  fit(data, HoldoutMask::none(4), hy, config, options);
  std::istringstream lines(log.str());
  std::string line;
  long n_lines = 0;
  while (std::getline(lines, line)) {
    ++n_lines;
    std::istringstream fields(line);
    long chain = -1, iter = -1;
    std::string phase;
    double seconds = -1.0;
    fields >> chain >> iter >> phase >> seconds;
    CHECK(chain == 0);
    CHECK(iter >= 0);
    CHECK((phase == "init" || phase == "sweep" || phase == "done"));
    CHECK(seconds >= 0.0);
  }
  CHECK(n_lines == 4);  // init, sweeps at 5 and 10, done
}
