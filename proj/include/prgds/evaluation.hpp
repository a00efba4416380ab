// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "prgds/engine.hpp"
#include "prgds/tensor.hpp"

namespace prgds {

enum class HeldoutSubset { kSmoothing, kForecasting, kAll };

const char* subset_name(HeldoutSubset subset);

// Mean negative log predictive density, in nats per cell, over every cell of
// the selected held-out steps (zero cells included). The predictive density
// averages the Poisson likelihood across posterior samples; the result is
// invariant to sample order.
double information_rate(const PosteriorSampleSet& samples,
                        const SparseCountSequence& data,
                        const HoldoutMask& mask, HeldoutSubset subset);

// Positive when the model carries more information than the baseline.
double information_gain(double baseline_rate, double model_rate);

struct EvalRow {
  std::string model;
  std::string dataset;
  std::uint64_t mask_seed = 0;
  std::string subset;
  double rate = 0.0;
  double gain = 0.0;
};

// Flat CSV with header model,dataset,mask-seed,subset,rate,gain.
void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows);

}  // namespace prgds
