#pragma once

#include <cstdint>
#include <vector>

namespace survkit {

/// Seeded xoshiro256++ generator with hand-rolled distributions.
///
/// std:: distributions are implementation-defined, which would break the
/// byte-identical-rerun contract across compilers; everything random in the
/// toolkit goes through this class instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);

  /// Standard normal (Marsaglia polar, with spare caching).
  double normal();

  /// Gamma(shape, 1), shape > 0 (Marsaglia-Tsang).
  double gamma(double shape);

  /// Fisher-Yates shuffle.
  void shuffle(std::vector<int>& v);

  /// k distinct values from {0,...,n-1}, in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

  /// Independent child stream; deterministic in (parent seed, stream id).
  Rng spawn(std::uint64_t stream_id) const;

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace survkit
