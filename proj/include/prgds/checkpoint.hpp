// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "prgds/engine.hpp"
#include "prgds/model.hpp"

namespace prgds {

// Binary, versioned, little-endian state block; round-trips bit-exactly.
void write_state(std::ostream& os, const ModelState& state);
ModelState read_state(std::istream& is);

// Engine RNG round-trip (text encoding of the generator state).
void write_rng(std::ostream& os, const Rng& rng);
Rng read_rng(std::istream& is);

// Posterior sample archive with provenance metadata.
void save_samples(const std::string& path, const PosteriorSampleSet& set);
PosteriorSampleSet load_samples(const std::string& path);

// Per-chain mid-run snapshot used for resumable fitting.
struct ChainCheckpoint {
  McmcConfig config;
  long chain = 0;
  long completed_iterations = 0;
  ModelState state;
  std::string rng_text;
  std::vector<PosteriorSample> samples;
};

void save_chain_checkpoint(const std::string& path, const ChainCheckpoint& ck);

// Returns false when the file does not exist; throws DataError on corruption.
bool load_chain_checkpoint(const std::string& path, ChainCheckpoint& ck);

}  // namespace prgds
