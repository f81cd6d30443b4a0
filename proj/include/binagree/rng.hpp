#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace binagree {

/// Philox4x64-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3"). Bit-compatible with numpy.random.Philox
/// blocks.
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// A reproducible stream identified by (seed, stream, substream). Streams with
/// different identifiers never share counter space, so replicate i of a
/// campaign draws the same numbers no matter which worker runs it.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via Box-Muller (cosine branch only).
  double normal();
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  Philox4x64::Key key_;
  Philox4x64::Counter counter_;
  Philox4x64::Counter buffer_{};
  int buffer_pos_ = 4;
};

}  // namespace binagree
