// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <span>
#include <string>
#include <vector>

#include "prgds/array2d.hpp"
#include "prgds/errors.hpp"
#include "prgds/rng.hpp"

namespace prgds {

// A sequence of T sparse count tensors sharing mode dimensions (D1, ..., DM),
// stored as per-step coordinate lists of strictly positive entries. Time
// steps are 1-based throughout (t = 0 is reserved for the latent initial
// condition and never carries data). Immutable once finalized; finalized
// instances are safe for shared concurrent reads.
class SparseCountSequence {
 public:
  SparseCountSequence(long num_steps, std::vector<long> dims);

  // Accumulates a (possibly duplicate) coordinate; only before finalize().
  void add(long t, std::span<const long> idx, long count);
  // Sorts entries, merges duplicates, drops zeros; idempotent afterwards.
  void finalize();
  bool finalized() const { return finalized_; }

  long num_steps() const { return num_steps_; }
  long num_modes() const { return static_cast<long>(dims_.size()); }
  const std::vector<long>& dims() const { return dims_; }

  long nnz() const;
  long nnz(long t) const { return static_cast<long>(step(t).counts.size()); }
  long count(long t, long e) const { return step(t).counts[e]; }
  std::span<const long> index(long t, long e) const {
    const auto& s = step(t);
    return {s.flat.data() + e * num_modes(), static_cast<size_t>(num_modes())};
  }
  long long step_total(long t) const;
  long long total() const;

  bool operator==(const SparseCountSequence&) const = default;

 private:
  struct StepData {
    std::vector<long> flat;    // nnz x M mode indices, row-major
    std::vector<long> counts;  // nnz positive counts
    bool operator==(const StepData&) const = default;
  };
  const StepData& step(long t) const;
  StepData& step(long t);

  long num_steps_;
  std::vector<long> dims_;
  std::vector<StepData> steps_;
  bool finalized_ = false;
};

// Coordinate text format: a header line "T D1 ... DM", then one entry per
// line as "t i1 ... iM y" with 1-based t and 0-based mode indices. Lines
// beginning with '#' and blank lines are ignored. Duplicate coordinates sum;
// zero counts are dropped. Files ending in ".gz" are compressed.
SparseCountSequence load_coordinate_file(const std::string& path);
void write_coordinate_file(const SparseCountSequence& seq, const std::string& path,
                           std::span<const std::string> comments = {});

// Per-cell rate of the weighted CP decomposition:
//   mu = rho * sum_k lambda[k] theta_t[k] prod_m phi[m](k, idx[m]).
double cp_rate(double rho, std::span<const double> lambda,
               std::span<const double> theta_t,
               const std::vector<Array2D<double>>& phi,
               std::span<const long> idx);

// Held-out time steps (1-based): the last two steps form the forecasting
// set; any further held-out steps are interior smoothing steps in [2, T-2].
struct HoldoutMask {
  long num_steps = 0;
  std::vector<long> smoothing;    // sorted
  std::vector<long> forecasting;  // {T-1, T} or empty

  bool is_smoothing(long t) const;
  bool is_forecasting(long t) const;
  bool holds(long t) const { return is_smoothing(t) || is_forecasting(t); }

  static HoldoutMask none(long num_steps) { return HoldoutMask{num_steps, {}, {}}; }

  bool operator==(const HoldoutMask&) const = default;
};

// Requires T >= 5 and n_smoothing <= T - 4; smoothing steps are drawn
// uniformly without replacement from [2, T-2].
HoldoutMask make_holdout_mask(long num_steps, long n_smoothing, Rng& rng);

// Mask text format: a header line with the step count, then one line per
// held-out step, "t smoothing" or "t forecasting". '#' comments and blank
// lines are ignored. Loading enforces the HoldoutMask shape: smoothing
// steps lie in [2, T-2] and the forecasting set is empty or {T-1, T}.
HoldoutMask load_mask_file(const std::string& path);
void write_mask_file(const HoldoutMask& mask, const std::string& path,
                     std::span<const std::string> comments = {});

}  // namespace prgds
