// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "prgds/errors.hpp"

namespace prgds {

namespace {

constexpr std::uint32_t kStateVersion = 1;
constexpr char kStateMagic[8] = {'P', 'R', 'G', 'S', 'T', 'A', 'T', '1'};
constexpr char kArchiveMagic[8] = {'P', 'R', 'G', 'S', 'A', 'M', 'P', '1'};
constexpr char kCkptMagic[8] = {'P', 'R', 'G', 'C', 'K', 'P', 'T', '1'};

void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    throw DataError("checkpoint: truncated stream");
  }
}

void put_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, &v, 4); }
void put_i64(std::ostream& os, long long v) { put_bytes(os, &v, 8); }
void put_f64(std::ostream& os, double v) { put_bytes(os, &v, 8); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v;
  get_bytes(is, &v, 4);
  return v;
}

long long get_i64(std::istream& is) {
  long long v;
  get_bytes(is, &v, 8);
  return v;
}

double get_f64(std::istream& is) {
  double v;
  get_bytes(is, &v, 8);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_i64(os, static_cast<long long>(s.size()));
  put_bytes(os, s.data(), s.size());
}

std::string get_string(std::istream& is) {
  const long long n = get_i64(is);
  if (n < 0 || n > (1LL << 30)) throw DataError("checkpoint: bad string size");
  std::string s(static_cast<size_t>(n), '\0');
  if (n > 0) get_bytes(is, s.data(), static_cast<size_t>(n));
  return s;
}

void put_f64_array(std::ostream& os, const Array2D<double>& a) {
  put_bytes(os, a.data(), a.size() * sizeof(double));
}

void get_f64_array(std::istream& is, Array2D<double>& a) {
  get_bytes(is, a.data(), a.size() * sizeof(double));
}

void put_i64_array(std::ostream& os, const Array2D<long>& a) {
  for (size_t i = 0; i < a.size(); ++i) put_i64(os, a.data()[i]);
}

void get_i64_array(std::istream& is, Array2D<long>& a) {
  for (size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = static_cast<long>(get_i64(is));
  }
}

void check_magic(std::istream& is, const char (&magic)[8], const char* what) {
  char buf[8];
  get_bytes(is, buf, 8);
  if (std::memcmp(buf, magic, 8) != 0) {
    throw DataError(std::string(what) + ": bad file magic");
  }
}

void write_config(std::ostream& os, const McmcConfig& c) {
  put_i64(os, c.n_iterations);
  put_i64(os, c.burn_in);
  put_i64(os, c.thin);
  put_i64(os, c.n_chains);
  put_i64(os, static_cast<long long>(c.seed));
}

McmcConfig read_config(std::istream& is) {
  McmcConfig c;
  c.n_iterations = static_cast<long>(get_i64(is));
  c.burn_in = static_cast<long>(get_i64(is));
  c.thin = static_cast<long>(get_i64(is));
  c.n_chains = static_cast<long>(get_i64(is));
  c.seed = static_cast<std::uint64_t>(get_i64(is));
  return c;
}

}  // namespace

void write_state(std::ostream& os, const ModelState& s) {
  put_bytes(os, kStateMagic, 8);
  put_u32(os, kStateVersion);
  put_f64(os, s.hyper.eps_theta);
  put_f64(os, s.hyper.eps_lambda);
  put_f64(os, s.hyper.alpha0);
  put_f64(os, s.hyper.a0);
  put_f64(os, s.hyper.b0);
  put_i64(os, s.hyper.num_components);
  put_u32(os, s.hyper.stationary_rho ? 1 : 0);

  put_i64(os, s.num_steps);
  put_i64(os, static_cast<long long>(s.dims.size()));
  for (long d : s.dims) put_i64(os, d);

  put_f64_array(os, s.theta);
  put_i64_array(os, s.h);
  for (const auto& src : s.h_src) put_i64_array(os, src);
  put_f64_array(os, s.pi);
  for (const auto& mat : s.phi) put_f64_array(os, mat);
  put_bytes(os, s.lambda.data(), s.lambda.size() * sizeof(double));
  for (long v : s.g) put_i64(os, v);
  put_bytes(os, s.rho.data(), s.rho.size() * sizeof(double));
  put_f64(os, s.tau);
  put_f64(os, s.beta);
  put_f64(os, s.gamma);
  put_i64_array(os, s.y_comp);
  for (const auto& mat : s.y_mode) put_i64_array(os, mat);
  if (!os) throw DataError("checkpoint: write failed");
}

ModelState read_state(std::istream& is) {
  check_magic(is, kStateMagic, "state block");
  const std::uint32_t version = get_u32(is);
  if (version != kStateVersion) {
    throw DataError("state block: unsupported version");
  }
  ModelHyper hy;
  hy.eps_theta = get_f64(is);
  hy.eps_lambda = get_f64(is);
  hy.alpha0 = get_f64(is);
  hy.a0 = get_f64(is);
  hy.b0 = get_f64(is);
  hy.num_components = static_cast<long>(get_i64(is));
  hy.stationary_rho = get_u32(is) != 0;

  const long num_steps = static_cast<long>(get_i64(is));
  const long num_modes = static_cast<long>(get_i64(is));
  if (num_steps < 0 || num_modes < 1 || num_modes > 64) {
    throw DataError("state block: bad shape");
  }
  std::vector<long> dims(static_cast<size_t>(num_modes));
  for (auto& d : dims) d = static_cast<long>(get_i64(is));

  ModelState s = make_empty_state(hy, dims, num_steps);
  get_f64_array(is, s.theta);
  get_i64_array(is, s.h);
  for (auto& src : s.h_src) get_i64_array(is, src);
  get_f64_array(is, s.pi);
  for (auto& mat : s.phi) get_f64_array(is, mat);
  get_bytes(is, s.lambda.data(), s.lambda.size() * sizeof(double));
  for (auto& v : s.g) v = static_cast<long>(get_i64(is));
  get_bytes(is, s.rho.data(), s.rho.size() * sizeof(double));
  s.tau = get_f64(is);
  s.beta = get_f64(is);
  s.gamma = get_f64(is);
  get_i64_array(is, s.y_comp);
  for (auto& mat : s.y_mode) get_i64_array(is, mat);
  return s;
}

void write_rng(std::ostream& os, const Rng& rng) {
  std::ostringstream text;
  text << rng;
  put_string(os, text.str());
}

Rng read_rng(std::istream& is) {
  std::istringstream text(get_string(is));
  Rng rng;
  text >> rng;
  if (text.fail()) throw DataError("checkpoint: bad rng state");
  return rng;
}

void save_samples(const std::string& path, const PosteriorSampleSet& set) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  put_bytes(os, kArchiveMagic, 8);
  put_u32(os, kStateVersion);
  put_string(os, set.model_name);
  put_string(os, set.dataset);
  put_i64(os, static_cast<long long>(set.mask_seed));
  put_string(os, set.invocation);
  put_i64(os, static_cast<long long>(set.samples.size()));
  for (const auto& sample : set.samples) {
    put_i64(os, sample.chain);
    put_i64(os, sample.iteration);
    write_state(os, sample.state);
  }
  if (!os) throw DataError("write failed: " + path);
}

PosteriorSampleSet load_samples(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  check_magic(is, kArchiveMagic, path.c_str());
  if (get_u32(is) != kStateVersion) {
    throw DataError(path + ": unsupported version");
  }
  PosteriorSampleSet set;
  set.model_name = get_string(is);
  set.dataset = get_string(is);
  set.mask_seed = static_cast<std::uint64_t>(get_i64(is));
  set.invocation = get_string(is);
  const long long count = get_i64(is);
  if (count < 0 || count > (1LL << 24)) {
    throw DataError(path + ": bad sample count");
  }
  set.samples.reserve(static_cast<size_t>(count));
  for (long long i = 0; i < count; ++i) {
    PosteriorSample sample;
    sample.chain = static_cast<long>(get_i64(is));
    sample.iteration = static_cast<long>(get_i64(is));
    sample.state = read_state(is);
    set.samples.push_back(std::move(sample));
  }
  return set;
}

void save_chain_checkpoint(const std::string& path, const ChainCheckpoint& ck) {
  // Write-then-rename so an interrupted write never corrupts a prior
  // checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + tmp);
    put_bytes(os, kCkptMagic, 8);
    put_u32(os, kStateVersion);
    write_config(os, ck.config);
    put_i64(os, ck.chain);
    put_i64(os, ck.completed_iterations);
    write_state(os, ck.state);
    put_string(os, ck.rng_text);
    put_i64(os, static_cast<long long>(ck.samples.size()));
    for (const auto& sample : ck.samples) {
      put_i64(os, sample.chain);
      put_i64(os, sample.iteration);
      write_state(os, sample.state);
    }
    if (!os) throw DataError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

bool load_chain_checkpoint(const std::string& path, ChainCheckpoint& ck) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  check_magic(is, kCkptMagic, path.c_str());
  if (get_u32(is) != kStateVersion) {
    throw DataError(path + ": unsupported version");
  }
  ck.config = read_config(is);
  ck.chain = static_cast<long>(get_i64(is));
  ck.completed_iterations = static_cast<long>(get_i64(is));
  ck.state = read_state(is);
  ck.rng_text = get_string(is);
  const long long count = get_i64(is);
  if (count < 0 || count > (1LL << 24)) {
    throw DataError(path + ": bad sample count");
  }
  ck.samples.clear();
  for (long long i = 0; i < count; ++i) {
    PosteriorSample sample;
    sample.chain = static_cast<long>(get_i64(is));
    sample.iteration = static_cast<long>(get_i64(is));
    sample.state = read_state(is);
    ck.samples.push_back(std::move(sample));
  }
  return true;
}

}  // namespace prgds
