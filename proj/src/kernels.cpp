// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/kernels.hpp"

#include <omp.h>

#include <exception>
#include <vector>

#include "prgds/errors.hpp"
#include "prgds/rng.hpp"

namespace prgds {

namespace {

// Allocates one observed entry across components into local aggregates.
void allocate_one_entry(const ModelState& state, long t, std::span<const long> idx,
                        long count, SplitMix64& stream, std::span<double> w,
                        std::span<long> out, Array2D<long>& y_comp_acc,
                        std::vector<Array2D<long>>& y_mode_acc) {
  const long k_count = state.num_components();
  const long m_count = state.num_modes();
  const auto theta_t = state.theta.row(t - 1);
  for (long k = 0; k < k_count; ++k) {
    double v = state.lambda[k] * theta_t[k];
    for (long m = 0; m < m_count; ++m) v *= state.phi[m](k, idx[m]);
    w[k] = v;
  }
  sample_multinomial(count, w, out, stream);
  for (long k = 0; k < k_count; ++k) {
    const long c = out[k];
    if (c == 0) continue;
    y_comp_acc(t - 1, k) += c;
    for (long m = 0; m < m_count; ++m) y_mode_acc[m](k, idx[m]) += c;
  }
}

}  // namespace

void allocate_y_sources(const ModelState& state, const SparseCountSequence& data,
                        uint64_t phase_key, bool parallel, Array2D<long>& y_comp,
                        std::vector<Array2D<long>>& y_mode,
                        Array2D<long>* per_entry) {
  const long k_count = state.num_components();
  const long num_steps = state.num_steps;
  y_comp.fill(0);
  for (auto& m : y_mode) m.fill(0);

  // Flatten (t, e) into one global entry list so streams are stable.
  std::vector<std::pair<long, long>> entries;
  entries.reserve(static_cast<size_t>(data.nnz()));
  for (long t = 1; t <= num_steps; ++t) {
    for (long e = 0; e < data.nnz(t); ++e) entries.emplace_back(t, e);
  }
  const long n = static_cast<long>(entries.size());
  if (per_entry) {
    *per_entry = Array2D<long>(n, static_cast<int>(k_count));
  }

  // Exceptions must not escape the parallel region; capture and rethrow.
  std::exception_ptr err = nullptr;
#pragma omp parallel if (parallel)
  {
    Array2D<long> local_comp(y_comp.rows(), y_comp.cols());
    std::vector<Array2D<long>> local_mode;
    for (const auto& m : y_mode) local_mode.emplace_back(m.rows(), m.cols());
    std::vector<double> w(static_cast<size_t>(k_count));
    std::vector<long> out(static_cast<size_t>(k_count));

#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) {
      try {
        const auto [t, e] = entries[i];
        SplitMix64 stream = entry_stream(phase_key, static_cast<uint64_t>(i));
        allocate_one_entry(state, t, data.index(t, e), data.count(t, e), stream,
                           w, out, local_comp, local_mode);
        if (per_entry) {
          auto row = per_entry->row(i);
          for (long k = 0; k < k_count; ++k) row[k] = out[k];
        }
      } catch (...) {
#pragma omp critical(prgds_alloc_err)
        if (!err) err = std::current_exception();
      }
    }

#pragma omp critical(prgds_alloc_merge)
    {
      for (size_t i = 0; i < y_comp.size(); ++i) {
        y_comp.data()[i] += local_comp.data()[i];
      }
      for (size_t m = 0; m < y_mode.size(); ++m) {
        for (size_t i = 0; i < y_mode[m].size(); ++i) {
          y_mode[m].data()[i] += local_mode[m].data()[i];
        }
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

void allocate_h_sources(ModelState& state, uint64_t phase_key, bool parallel) {
  const long k_count = state.num_components();
  const long num_steps = state.num_steps;
  const long n = num_steps * k_count;
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < n; ++i) {
    try {
      const long t = i / k_count + 1;
      const long k = i % k_count;
      SplitMix64 stream = entry_stream(phase_key, static_cast<uint64_t>(i));
      sample_h_row_sources(state, t, k, stream);
    } catch (...) {
#pragma omp critical(prgds_alloc_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace prgds
