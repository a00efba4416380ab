// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/engine.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "prgds/checkpoint.hpp"
#include "prgds/errors.hpp"

namespace prgds {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void log_progress(std::ostream* os, long chain, long iter, const char* phase,
                  double seconds) {
  if (!os) return;
#pragma omp critical(prgds_progress)
  { *os << chain << ' ' << iter << ' ' << phase << ' ' << seconds << '\n'; }
}

std::vector<long> held_steps(const HoldoutMask& mask) {
  std::vector<long> steps;
  for (long t = 1; t <= mask.num_steps; ++t) {
    if (mask.holds(t)) steps.push_back(t);
  }
  return steps;
}

// Observed steps come from data, held-out steps from the imputed draw.
SparseCountSequence merge_working_data(const SparseCountSequence& data,
                                       const SparseCountSequence& imputed,
                                       const HoldoutMask& mask) {
  SparseCountSequence merged(data.num_steps(), data.dims());
  for (long t = 1; t <= data.num_steps(); ++t) {
    const SparseCountSequence& src = mask.holds(t) ? imputed : data;
    for (long e = 0; e < src.nnz(t); ++e) {
      merged.add(t, src.index(t, e), src.count(t, e));
    }
  }
  merged.finalize();
  return merged;
}

std::string chain_checkpoint_path(const std::string& prefix, long chain) {
  return prefix + ".chain" + std::to_string(chain) + ".ckpt";
}

struct ChainResult {
  std::vector<PosteriorSample> samples;
};

ChainResult run_one_chain(long chain, const SparseCountSequence& data,
                          const HoldoutMask& mask, const ModelHyper& hyper,
                          const McmcConfig& config, const FitOptions& options,
                          const InitFn& init, const SweepFn& sweep) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint32_t seed_lo = static_cast<std::uint32_t>(config.seed);
  const std::uint32_t seed_hi = static_cast<std::uint32_t>(config.seed >> 32);
  std::seed_seq seq{seed_lo, seed_hi, static_cast<std::uint32_t>(chain)};
  Rng rng(seq);

  ModelState state = init(hyper, data.dims(), data.num_steps(), rng);
  long completed = 0;
  std::vector<PosteriorSample> samples;

  const bool checkpointing = !options.checkpoint_prefix.empty();
  const std::string ckpt_path =
      checkpointing ? chain_checkpoint_path(options.checkpoint_prefix, chain)
                    : std::string();
  if (checkpointing) {
    ChainCheckpoint ck;
    if (load_chain_checkpoint(ckpt_path, ck)) {
      if (!(ck.config == config) || ck.chain != chain) {
        throw DataError(ckpt_path + ": checkpoint does not match this run");
      }
      state = std::move(ck.state);
      rng = [&] {
        std::istringstream text(ck.rng_text);
        Rng restored;
        text >> restored;
        if (text.fail()) throw DataError(ckpt_path + ": bad rng state");
        return restored;
      }();
      completed = ck.completed_iterations;
      samples = std::move(ck.samples);
    }
  }
  const long entry_completed = completed;
  log_progress(options.progress, chain, completed, "init",
               seconds_since(start));

  auto write_ckpt = [&] {
    if (!checkpointing) return;
    ChainCheckpoint ck;
    ck.config = config;
    ck.chain = chain;
    ck.completed_iterations = completed;
    ck.state = state;
    std::ostringstream text;
    text << rng;
    ck.rng_text = text.str();
    ck.samples = samples;
    save_chain_checkpoint(ckpt_path, ck);
  };

  const std::vector<long> held = held_steps(mask);
  for (long iter = completed + 1; iter <= config.n_iterations; ++iter) {
    try {
      const SparseCountSequence* working = &data;
      std::optional<SparseCountSequence> merged;
      if (!held.empty()) {
        const SparseCountSequence imputed = simulate_data(state, held, rng);
        merged.emplace(merge_working_data(data, imputed, mask));
        working = &*merged;
      }
      sweep(state, *working, rng);
      throw_if_non_finite(state, chain, iter);
    } catch (const NumericError&) {
      // Leave a state dump behind for post-mortem inspection, then abort.
      if (checkpointing) {
        std::ofstream dump(
            options.checkpoint_prefix + ".chain" + std::to_string(chain) +
                ".dump",
            std::ios::binary | std::ios::trunc);
        if (dump) write_state(dump, state);
      }
      throw;
    }
    completed = iter;
    if (iter > config.burn_in && (iter - config.burn_in) % config.thin == 0) {
      samples.push_back(PosteriorSample{chain, iter, state});
    }
    if (options.progress_every > 0 && iter % options.progress_every == 0) {
      log_progress(options.progress, chain, iter, "sweep",
                   seconds_since(start));
    }
    const bool budget_hit = options.stop_after > 0 &&
                            iter - entry_completed >= options.stop_after;
    if ((options.checkpoint_every > 0 && checkpointing &&
         iter % options.checkpoint_every == 0) ||
        (budget_hit && checkpointing)) {
      write_ckpt();
    }
    if (budget_hit) break;
  }
  log_progress(options.progress, chain, completed, "done",
               seconds_since(start));
  return ChainResult{std::move(samples)};
}

}  // namespace

void validate(const McmcConfig& config) {
  if (config.n_iterations < 1) {
    throw DataError("mcmc config: n_iterations must be positive");
  }
  if (config.burn_in < 0 || config.burn_in >= config.n_iterations) {
    throw DataError("mcmc config: burn_in must lie in [0, n_iterations)");
  }
  if (config.thin < 1) throw DataError("mcmc config: thin must be positive");
  if (config.n_chains < 1) {
    throw DataError("mcmc config: n_chains must be positive");
  }
}

long num_saved_samples(const McmcConfig& config) {
  return config.n_chains * ((config.n_iterations - config.burn_in) / config.thin);
}

SparseCountSequence impute_heldout(const ModelState& state,
                                   const HoldoutMask& mask, Rng& rng) {
  if (mask.num_steps != state.num_steps) {
    throw DataError("impute_heldout: mask and state step counts differ");
  }
  return simulate_data(state, held_steps(mask), rng);
}

void throw_if_non_finite(const ModelState& state, long chain, long iteration) {
  const auto fail = [&](const char* field) {
    throw NumericError("chain " + std::to_string(chain) + " iteration " +
                       std::to_string(iteration) + ": non-finite " + field);
  };
  if (!std::isfinite(state.tau)) fail("tau");
  if (!std::isfinite(state.beta)) fail("beta");
  if (!std::isfinite(state.gamma)) fail("gamma");
  for (double v : state.lambda) {
    if (!std::isfinite(v)) fail("lambda");
  }
  for (double v : state.rho) {
    if (!std::isfinite(v)) fail("rho");
  }
  for (size_t i = 0; i < state.theta.size(); ++i) {
    if (!std::isfinite(state.theta.data()[i])) fail("theta");
  }
  for (size_t i = 0; i < state.pi.size(); ++i) {
    if (!std::isfinite(state.pi.data()[i])) fail("pi");
  }
  for (const auto& mat : state.phi) {
    for (size_t i = 0; i < mat.size(); ++i) {
      if (!std::isfinite(mat.data()[i])) fail("phi");
    }
  }
}

PosteriorSampleSet run_mcmc(const SparseCountSequence& data,
                            const HoldoutMask& mask, const ModelHyper& hyper,
                            const McmcConfig& config, const FitOptions& options,
                            const InitFn& init, const SweepFn& sweep,
                            const std::string& model_name) {
  validate(hyper);
  validate(config);
  if (mask.num_steps != data.num_steps()) {
    throw DataError("fit: mask and data step counts differ");
  }

  std::vector<ChainResult> results(static_cast<size_t>(config.n_chains));
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic, 1) if (config.n_chains > 1)
  for (long chain = 0; chain < config.n_chains; ++chain) {
    try {
      results[static_cast<size_t>(chain)] = run_one_chain(
          chain, data, mask, hyper, config, options, init, sweep);
    } catch (...) {
#pragma omp critical(prgds_chain_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  PosteriorSampleSet set;
  set.model_name = model_name;
  set.mask_seed = 0;
  for (auto& r : results) {
    for (auto& sample : r.samples) set.samples.push_back(std::move(sample));
  }
  std::sort(set.samples.begin(), set.samples.end(),
            [](const PosteriorSample& a, const PosteriorSample& b) {
              return a.chain != b.chain ? a.chain < b.chain
                                        : a.iteration < b.iteration;
            });
  return set;
}

PosteriorSampleSet fit(const SparseCountSequence& data, const HoldoutMask& mask,
                       const ModelHyper& hyper, const McmcConfig& config,
                       const FitOptions& options) {
  const InitFn init = [](const ModelHyper& hy, const std::vector<long>& dims,
                         long num_steps, Rng& rng) {
    ModelState s = sample_prior(hy, dims, num_steps, rng);
    // Revive dead weights and activations so the first allocation pass can
    // place any observed count; subsequent sweeps re-kill unsupported ones.
    for (auto& v : s.lambda) {
      if (v == 0.0) v = sample_gamma(1.0, s.beta, rng);
    }
    for (size_t i = 0; i < s.theta.size(); ++i) {
      if (s.theta.data()[i] == 0.0) {
        s.theta.data()[i] = sample_gamma(1.0, s.tau, rng);
      }
    }
    return s;
  };
  const SweepFn sweep = [](ModelState& s, const SparseCountSequence& d,
                           Rng& rng) { gibbs_sweep(s, d, rng); };
  return run_mcmc(data, mask, hyper, config, options, init, sweep, "prgds");
}

}  // namespace prgds
