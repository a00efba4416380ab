// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <vector>

#include "prgds/array2d.hpp"
#include "prgds/model.hpp"
#include "prgds/tensor.hpp"

namespace prgds {

// Allocation kernels behind update_y_sources / update_h_sources. Every entry
// (or row) draws from its own counter-based stream keyed by (phase_key,
// entry index), so the serial reference and the OpenMP version produce
// bit-identical results at any thread count. phase_key should be drawn from
// the chain RNG once per phase.

// Allocates observed counts across components into the aggregate matrices.
// y_comp must be T x K and y_mode must mirror phi's shapes; both are
// overwritten. If per_entry is given (nnz x K), it receives each entry's
// allocation vector (test instrumentation).
void allocate_y_sources(const ModelState& state, const SparseCountSequence& data,
                        uint64_t phase_key, bool parallel, Array2D<long>& y_comp,
                        std::vector<Array2D<long>>& y_mode,
                        Array2D<long>* per_entry = nullptr);

// Re-draws every row of every per-step source matrix from its conditional.
void allocate_h_sources(ModelState& state, uint64_t phase_key, bool parallel);

// Re-draws row k of the step-t source matrix: a multinomial split of the row
// total h(t,k) with weights pi(k, k2) * theta_prev(t)[k2].
template <class G>
void sample_h_row_sources(ModelState& state, long t, long k, G& rng) {
  const long k_count = state.num_components();
  const auto prev = state.theta_prev(t);
  std::vector<double> w(static_cast<size_t>(k_count));
  std::vector<long> out(static_cast<size_t>(k_count));
  for (long k2 = 0; k2 < k_count; ++k2) {
    w[k2] = state.pi(k, k2) * prev[k2];
  }
  sample_multinomial(state.h(t - 1, k), w, out, rng);
  auto row = state.h_src[t - 1].row(k);
  for (long k2 = 0; k2 < k_count; ++k2) row[k2] = out[k2];
}

}  // namespace prgds
