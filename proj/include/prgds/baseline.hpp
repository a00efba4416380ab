// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <vector>

#include "prgds/engine.hpp"
#include "prgds/model.hpp"
#include "prgds/tensor.hpp"

namespace prgds {

// Time-invariant factorization baseline: every step shares the same rates
// mu_i = sum_k lambda_k * prod_m phi^m(k, i_m). Encoded as a ModelState with
// theta and rho pinned to one, the transition pinned to identity, and no
// shape-increment chain; cp_rate then yields mu_i unchanged.

// Prior draw for the static model (weights, factors, and their scales only).
ModelState make_static_state(const ModelHyper& hyper,
                             const std::vector<long>& dims, long num_steps,
                             Rng& rng);

// One Gibbs pass over lambda, g, gamma, beta, and the factor rows.
void static_sweep(ModelState& state, const SparseCountSequence& data, Rng& rng);

// Same protocol as fit(), with the static sweep and init.
PosteriorSampleSet fit_static_cp(const SparseCountSequence& data,
                                 const HoldoutMask& mask,
                                 const ModelHyper& hyper,
                                 const McmcConfig& config,
                                 const FitOptions& options = {});

// Exact per-cell conjugate posterior for single-mode data: each cell v has an
// independent gamma posterior over its Poisson rate.
struct GammaPosterior {
  std::vector<double> shapes;
  double rate = 0.0;
};

GammaPosterior fit_static_univariate(const SparseCountSequence& data,
                                     const HoldoutMask& mask, double a0,
                                     double b0);

}  // namespace prgds
