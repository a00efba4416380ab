// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "prgds/model.hpp"
#include "prgds/rng.hpp"
#include "prgds/tensor.hpp"

namespace prgds {

struct McmcConfig {
  long n_iterations = 4000;
  long burn_in = 1000;
  long thin = 50;
  long n_chains = 2;
  std::uint64_t seed = 0;

  bool operator==(const McmcConfig&) const = default;
};

// Throws DataError when the schedule is inconsistent.
void validate(const McmcConfig& config);

// n_chains * floor((n_iterations - burn_in) / thin).
long num_saved_samples(const McmcConfig& config);

struct PosteriorSample {
  long chain = 0;
  long iteration = 0;
  ModelState state;

  bool operator==(const PosteriorSample&) const = default;
};

struct PosteriorSampleSet {
  std::vector<PosteriorSample> samples;
  // Provenance carried into result files.
  std::string model_name;
  std::string dataset;
  std::uint64_t mask_seed = 0;
  std::string invocation;

  bool operator==(const PosteriorSampleSet&) const = default;
};

struct FitOptions {
  std::ostream* progress = nullptr;  // "chain iter phase seconds" lines
  long progress_every = 500;
  std::string checkpoint_prefix;  // empty disables checkpoint/resume
  long checkpoint_every = 500;    // iterations between checkpoints
  long stop_after = 0;            // per-chain iteration budget for this call;
                                  // 0 runs to completion
};

// Draws the held-out steps of a fresh sequence from the current rates; all
// other steps stay empty. Only live components generate events, so the cost
// is linear in the number of drawn counts.
SparseCountSequence impute_heldout(const ModelState& state,
                                   const HoldoutMask& mask, Rng& rng);

// Throws NumericError naming the chain and iteration if any continuous field
// is non-finite.
void throw_if_non_finite(const ModelState& state, long chain, long iteration);

// Generic multi-chain driver: init builds a chain's starting state, sweep
// advances it by one full update pass. Held-out steps are re-imputed before
// every sweep. Deterministic given config.seed.
using InitFn = std::function<ModelState(const ModelHyper&,
                                        const std::vector<long>&, long, Rng&)>;
using SweepFn =
    std::function<void(ModelState&, const SparseCountSequence&, Rng&)>;

PosteriorSampleSet run_mcmc(const SparseCountSequence& data,
                            const HoldoutMask& mask, const ModelHyper& hyper,
                            const McmcConfig& config, const FitOptions& options,
                            const InitFn& init, const SweepFn& sweep,
                            const std::string& model_name);

// Full dynamic-model fit: prior initialization (with dead weights and
// activations revived so any observed count can be allocated) and gibbs_sweep.
PosteriorSampleSet fit(const SparseCountSequence& data, const HoldoutMask& mask,
                       const ModelHyper& hyper, const McmcConfig& config,
                       const FitOptions& options = {});

}  // namespace prgds
