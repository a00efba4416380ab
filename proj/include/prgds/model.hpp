// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prgds/array2d.hpp"
#include "prgds/rng.hpp"
#include "prgds/tensor.hpp"

namespace prgds {

// Hyperparameters of the dynamical count model. eps_theta 0 selects the
// sparse variant in which per-step component activations can be exactly
// zero; eps_theta 1 keeps them dense. stationary_rho pools the per-step
// scaling factors into one shared value.
struct ModelHyper {
  double eps_theta = 1.0;
  double eps_lambda = 1.0;
  double alpha0 = 10.0;
  double a0 = 0.01;
  double b0 = 0.01;
  long num_components = 10;
  bool stationary_rho = false;

  bool operator==(const ModelHyper&) const = default;
};

void validate(const ModelHyper& hyper);

// Full latent state of one chain. Time steps are 1-based; step 0 is the
// initial condition, which is identified with lambda. theta/h row t-1 holds
// step t. pi is column-stochastic (columns sum to 1); each phi factor matrix
// is row-stochastic. h_src[t-1] splits h row totals by source component:
// row k of h_src[t-1] sums to h(t-1, k). y_comp and y_mode hold the
// component / per-mode-index aggregates of the latest data allocation.
struct ModelState {
  ModelHyper hyper;
  long num_steps = 0;
  std::vector<long> dims;

  Array2D<double> theta;             // T x K
  Array2D<long> h;                   // T x K
  std::vector<Array2D<long>> h_src;  // T matrices, K x K
  Array2D<double> pi;                // K x K
  std::vector<Array2D<double>> phi;  // per mode, K x D_m
  std::vector<double> lambda;        // K
  std::vector<long> g;               // K
  std::vector<double> rho;           // T (all equal when stationary)
  double tau = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  Array2D<long> y_comp;              // T x K
  std::vector<Array2D<long>> y_mode; // per mode, K x D_m

  long num_components() const { return hyper.num_components; }
  long num_modes() const { return static_cast<long>(dims.size()); }

  // Step t-1 activations, with step 0 identified with lambda.
  std::span<const double> theta_prev(long t) const {
    return t <= 1 ? std::span<const double>(lambda) : theta.row(t - 2);
  }

  bool operator==(const ModelState&) const = default;
};

ModelState make_empty_state(const ModelHyper& hyper, const std::vector<long>& dims,
                            long num_steps);

// Draws every variable top-down in dependency order.
ModelState sample_prior(const ModelHyper& hyper, const std::vector<long>& dims,
                        long num_steps, Rng& rng);

// Exact forward draw of the observation tensor sequence given the state.
// Event-based: per (t, k) component totals are Poisson, then each event
// lands in a cell by per-mode categorical draws, so cost is O(events), not
// O(cells). Throws NumericError if any component rate exceeds 1e9.
SparseCountSequence simulate_data(const ModelState& state, Rng& rng);

// Simulates only the listed steps (ascending); other steps stay empty.
SparseCountSequence simulate_data(const ModelState& state,
                                  std::span<const long> steps, Rng& rng);

// --- Complete-conditional update phases (each a valid transition) ---------

// Allocates every non-zero observed count across components; refreshes
// y_comp / y_mode. Cost O(S K).
void update_y_sources(ModelState& state, const SparseCountSequence& data, Rng& rng);

// Re-allocates every h row total across source components.
void update_h_sources(ModelState& state, Rng& rng);

// Backward pass t = T..1: per component, resample the shape increment and
// then the activation, re-allocating that step's h sources before moving to
// the previous step. Handles both the dense and the sparse variant.
void update_h_theta(ModelState& state, Rng& rng);

// Standalone activation resample given current shape increments and
// allocation aggregates.
void update_theta(ModelState& state, Rng& rng);

// Standalone shape-increment resample given activations. Only valid for
// eps_theta > 0; the sparse variant must use the joint pass in update_h_theta
// (its zero state is absorbing under the given-activation conditional).
void update_h(ModelState& state, Rng& rng);

// Component weights and their shape counts, jointly.
void update_lambda_g(ModelState& state, Rng& rng);

// Transition matrix columns, factor rows, and the scalar scale variables.
void update_conjugates(ModelState& state, const SparseCountSequence& data, Rng& rng);

// One full sweep over all phases in a fixed order.
void gibbs_sweep(ModelState& state, const SparseCountSequence& data, Rng& rng);

// Throws on violated structural invariants (simplex sums, source totals,
// exact-zero pairing in the sparse variant, non-finite values).
void check_invariants(const ModelState& state, double tol = 1e-12);

}  // namespace prgds
