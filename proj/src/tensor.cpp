// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/tensor.hpp"

#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace prgds {

// ---------------------------------------------------------------------------
// SparseCountSequence

SparseCountSequence::SparseCountSequence(long num_steps, std::vector<long> dims)
    : num_steps_(num_steps), dims_(std::move(dims)) {
  if (num_steps_ < 1) throw DataError("sequence needs at least one time step");
  if (dims_.empty()) throw DataError("sequence needs at least one mode");
  for (long d : dims_) {
    if (d < 1) throw DataError("mode dimensions must be positive");
  }
  steps_.resize(static_cast<size_t>(num_steps_));
}

const SparseCountSequence::StepData& SparseCountSequence::step(long t) const {
  if (t < 1 || t > num_steps_) throw DataError("time step out of range");
  return steps_[static_cast<size_t>(t - 1)];
}

SparseCountSequence::StepData& SparseCountSequence::step(long t) {
  if (t < 1 || t > num_steps_) throw DataError("time step out of range");
  return steps_[static_cast<size_t>(t - 1)];
}

void SparseCountSequence::add(long t, std::span<const long> idx, long count) {
  if (finalized_) throw DataError("cannot add to a finalized sequence");
  if (idx.size() != dims_.size()) throw DataError("entry arity mismatch");
  for (size_t m = 0; m < dims_.size(); ++m) {
    if (idx[m] < 0 || idx[m] >= dims_[m]) {
      throw DataError("mode index out of declared bounds");
    }
  }
  if (count < 0) throw DataError("counts must be nonnegative");
  if (count == 0) return;
  auto& s = step(t);
  s.flat.insert(s.flat.end(), idx.begin(), idx.end());
  s.counts.push_back(count);
}

void SparseCountSequence::finalize() {
  if (finalized_) return;
  const long m_count = num_modes();
  for (auto& s : steps_) {
    const long n = static_cast<long>(s.counts.size());
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    auto key = [&](long e) {
      return std::span<const long>(s.flat.data() + e * m_count,
                                   static_cast<size_t>(m_count));
    };
    std::sort(order.begin(), order.end(), [&](long a, long b) {
      const auto ka = key(a), kb = key(b);
      return std::lexicographical_compare(ka.begin(), ka.end(), kb.begin(),
                                          kb.end());
    });
    StepData merged;
    merged.flat.reserve(s.flat.size());
    merged.counts.reserve(s.counts.size());
    for (long r = 0; r < n; ++r) {
      const auto k = key(order[r]);
      const long c = s.counts[order[r]];
      const long out = static_cast<long>(merged.counts.size());
      if (out > 0 &&
          std::equal(k.begin(), k.end(),
                     merged.flat.begin() + (out - 1) * m_count)) {
        merged.counts[out - 1] += c;
      } else {
        merged.flat.insert(merged.flat.end(), k.begin(), k.end());
        merged.counts.push_back(c);
      }
    }
    // Drop any zero-total entries to keep storage strictly positive.
    StepData clean;
    for (size_t e = 0; e < merged.counts.size(); ++e) {
      if (merged.counts[e] == 0) continue;
      clean.flat.insert(clean.flat.end(), merged.flat.begin() + e * m_count,
                        merged.flat.begin() + (e + 1) * m_count);
      clean.counts.push_back(merged.counts[e]);
    }
    s = std::move(clean);
  }
  finalized_ = true;
}

long SparseCountSequence::nnz() const {
  long s = 0;
  for (const auto& st : steps_) s += static_cast<long>(st.counts.size());
  return s;
}

long long SparseCountSequence::step_total(long t) const {
  const auto& s = step(t);
  long long acc = 0;
  for (long c : s.counts) acc += c;
  return acc;
}

long long SparseCountSequence::total() const {
  long long acc = 0;
  for (long t = 1; t <= num_steps_; ++t) acc += step_total(t);
  return acc;
}

// ---------------------------------------------------------------------------
// Coordinate file IO

namespace {

bool has_gz_suffix(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

// Reads whole lines from either a plain or a gzip stream.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path) {
    if (has_gz_suffix(path)) {
      gz_ = gzopen(path.c_str(), "rb");
      if (!gz_) throw DataError("cannot open " + path);
    } else {
      plain_.open(path);
      if (!plain_) throw DataError("cannot open " + path);
    }
  }
  ~LineReader() {
    if (gz_) gzclose(gz_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    ++line_no_;
    if (gz_) {
      line.clear();
      char buf[4096];
      bool got = false;
      while (gzgets(gz_, buf, sizeof(buf)) != nullptr) {
        got = true;
        line += buf;
        if (!line.empty() && line.back() == '\n') {
          line.pop_back();
          break;
        }
      }
      if (!got) {
        int err = 0;
        gzerror(gz_, &err);
        if (err != Z_OK && err != Z_STREAM_END) {
          throw DataError(path_ + ": gzip read error");
        }
      }
      return got;
    }
    return static_cast<bool>(std::getline(plain_, line));
  }

  long line_no() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream plain_;
  gzFile gz_ = nullptr;
  long line_no_ = 0;
};

std::vector<long> parse_longs(const LineReader& reader, const std::string& line) {
  std::vector<long> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p >= end) break;
    long v = 0;
    const auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() ||
        (next < end && *next != ' ' && *next != '\t' && *next != '\r')) {
      throw DataError(reader.path() + ":" + std::to_string(reader.line_no()) +
                      ": malformed integer field");
    }
    out.push_back(v);
    p = next;
  }
  return out;
}

bool skippable(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;  // blank
}

}  // namespace

SparseCountSequence load_coordinate_file(const std::string& path) {
  LineReader reader(path);
  std::string line;

  std::vector<long> header;
  while (reader.next(line)) {
    if (skippable(line)) continue;
    header = parse_longs(reader, line);
    break;
  }
  if (header.size() < 2) {
    throw DataError(path + ": missing or short header (want: T D1 ... DM)");
  }
  const long num_steps = header[0];
  std::vector<long> dims(header.begin() + 1, header.end());
  SparseCountSequence seq(num_steps, std::move(dims));
  const long m_count = seq.num_modes();

  auto fail = [&](const std::string& why) -> DataError {
    return DataError(path + ":" + std::to_string(reader.line_no()) + ": " + why);
  };
  while (reader.next(line)) {
    if (skippable(line)) continue;
    const std::vector<long> f = parse_longs(reader, line);
    if (static_cast<long>(f.size()) != m_count + 2) {
      throw fail("expected " + std::to_string(m_count + 2) + " fields, got " +
                 std::to_string(f.size()));
    }
    const long t = f[0];
    if (t < 1 || t > num_steps) throw fail("time step out of range");
    for (long m = 0; m < m_count; ++m) {
      if (f[m + 1] < 0 || f[m + 1] >= seq.dims()[m]) {
        throw fail("mode index out of declared bounds");
      }
    }
    const long y = f[m_count + 1];
    if (y < 0) throw fail("negative count");
    if (y == 0) continue;
    seq.add(t, std::span<const long>(f.data() + 1, static_cast<size_t>(m_count)),
            y);
  }
  seq.finalize();
  return seq;
}

void write_coordinate_file(const SparseCountSequence& seq, const std::string& path,
                           std::span<const std::string> comments) {
  if (!seq.finalized()) throw DataError("write requires a finalized sequence");
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << seq.num_steps();
  for (long d : seq.dims()) out << ' ' << d;
  out << '\n';
  for (long t = 1; t <= seq.num_steps(); ++t) {
    for (long e = 0; e < seq.nnz(t); ++e) {
      out << t;
      for (long v : seq.index(t, e)) out << ' ' << v;
      out << ' ' << seq.count(t, e) << '\n';
    }
  }
  const std::string body = out.str();
  if (has_gz_suffix(path)) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (!gz) throw DataError("cannot open " + path + " for writing");
    const int n = gzwrite(gz, body.data(), static_cast<unsigned>(body.size()));
    const int rc = gzclose(gz);
    if (n != static_cast<int>(body.size()) || rc != Z_OK) {
      throw DataError("gzip write failed for " + path);
    }
  } else {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << body;
    if (!f) throw DataError("write failed for " + path);
  }
}

// ---------------------------------------------------------------------------
// CP rate

double cp_rate(double rho, std::span<const double> lambda,
               std::span<const double> theta_t,
               const std::vector<Array2D<double>>& phi,
               std::span<const long> idx) {
  const size_t k_count = lambda.size();
  if (theta_t.size() != k_count || phi.size() != idx.size()) {
    throw DataError("cp_rate: dimension mismatch");
  }
  for (size_t m = 0; m < phi.size(); ++m) {
    if (phi[m].rows() != static_cast<long>(k_count) || idx[m] < 0 ||
        idx[m] >= static_cast<long>(phi[m].cols())) {
      throw DataError("cp_rate: dimension mismatch");
    }
  }
  double acc = 0.0;
  for (size_t k = 0; k < k_count; ++k) {
    double term = lambda[k] * theta_t[k];
    for (size_t m = 0; m < phi.size(); ++m) {
      term *= phi[m](k, static_cast<size_t>(idx[m]));
    }
    acc += term;
  }
  return rho * acc;
}

// ---------------------------------------------------------------------------
// Holdout masks

bool HoldoutMask::is_smoothing(long t) const {
  return std::binary_search(smoothing.begin(), smoothing.end(), t);
}

bool HoldoutMask::is_forecasting(long t) const {
  return std::find(forecasting.begin(), forecasting.end(), t) !=
         forecasting.end();
}

HoldoutMask make_holdout_mask(long num_steps, long n_smoothing, Rng& rng) {
  if (num_steps < 5) {
    throw DataError("holdout mask requires at least five time steps");
  }
  if (n_smoothing < 0 || n_smoothing > num_steps - 4) {
    throw DataError("too many smoothing steps for this sequence length");
  }
  HoldoutMask mask;
  mask.num_steps = num_steps;
  mask.forecasting = {num_steps - 1, num_steps};
  // Interior candidates [2, T-2], sampled without replacement.
  std::vector<long> pool(static_cast<size_t>(num_steps - 3));
  std::iota(pool.begin(), pool.end(), 2L);
  for (long i = 0; i < n_smoothing; ++i) {
    const auto j =
        i + static_cast<long>(sample_uniform(rng) * static_cast<double>(pool.size() - i));
    std::swap(pool[i], pool[std::min<long>(j, static_cast<long>(pool.size()) - 1)]);
  }
  mask.smoothing.assign(pool.begin(), pool.begin() + n_smoothing);
  std::sort(mask.smoothing.begin(), mask.smoothing.end());
  return mask;
}

HoldoutMask load_mask_file(const std::string& path) {
  LineReader reader(path);
  std::string line;
  auto fail = [&](const std::string& why) -> DataError {
    return DataError(path + ":" + std::to_string(reader.line_no()) + ": " + why);
  };

  long num_steps = -1;
  while (reader.next(line)) {
    if (skippable(line)) continue;
    const std::vector<long> header = parse_longs(reader, line);
    if (header.size() != 1 || header[0] < 1) {
      throw fail("expected a single positive step count");
    }
    num_steps = header[0];
    break;
  }
  if (num_steps < 0) throw DataError(path + ": missing step-count header");

  HoldoutMask mask;
  mask.num_steps = num_steps;
  while (reader.next(line)) {
    if (skippable(line)) continue;
    std::istringstream fields(line);
    long t = 0;
    std::string kind, extra;
    if (!(fields >> t >> kind) || (fields >> extra)) {
      throw fail("expected 't smoothing' or 't forecasting'");
    }
    if (t < 1 || t > num_steps) throw fail("held-out step out of range");
    if (kind == "smoothing") {
      if (t < 2 || t > num_steps - 2) {
        throw fail("smoothing step outside the interior range");
      }
      mask.smoothing.push_back(t);
    } else if (kind == "forecasting") {
      mask.forecasting.push_back(t);
    } else {
      throw fail("unknown subset '" + kind + "'");
    }
  }
  std::sort(mask.smoothing.begin(), mask.smoothing.end());
  if (std::adjacent_find(mask.smoothing.begin(), mask.smoothing.end()) !=
      mask.smoothing.end()) {
    throw DataError(path + ": repeated smoothing step");
  }
  std::sort(mask.forecasting.begin(), mask.forecasting.end());
  if (!mask.forecasting.empty() &&
      mask.forecasting != std::vector<long>{num_steps - 1, num_steps}) {
    throw DataError(path + ": forecasting set must be the last two steps");
  }
  return mask;
}

void write_mask_file(const HoldoutMask& mask, const std::string& path,
                     std::span<const std::string> comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << mask.num_steps << "\n";
  for (long t : mask.smoothing) out << t << " smoothing\n";
  for (long t : mask.forecasting) out << t << " forecasting\n";
  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << out.str();
  if (!f) throw DataError("write failed for " + path);
}

}  // namespace prgds
