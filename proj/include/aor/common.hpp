#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace aor {

/// Bad input data: malformed files, broken invariants, dimension mismatches.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failures (missing file, unwritable directory).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Deterministic random stream. Wraps mt19937_64 with portable derived
/// distributions so that seeded runs are bit-identical across platforms
/// (std::uniform_real_distribution et al. are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::int64_t uniform_int(std::int64_t n);

  /// Standard normal via Box-Muller.
  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derive an independent child seed from (seed, stream). splitmix64 mix.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// FNV-1a over a byte range; used for input provenance hashes.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 14695981039346656037ULL);

/// Shortest decimal form that round-trips the double exactly ("%.17g" with
/// a trim pass). Used everywhere a float is written to disk so that reruns
/// are byte-identical.
std::string format_double(double v);

}  // namespace aor
