#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace fedsim {

/// Deterministic splitmix64-based generator. We roll our own distributions
/// because the std:: ones are implementation-defined, and the simulator's
/// contract is bit-identical logs across platforms and reruns.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double next_double();

  /// Uniform integer in [lo, hi] inclusive, unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (two uniforms per call, no caching).
  double next_normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double next_gamma(double shape);

  /// Fisher-Yates in-place shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Derives a child seed from (master, domain, a, b). Every module draws its
/// randomness from a stream keyed this way, so adding an instrumentation
/// consumer never perturbs another module's stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view domain,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace fedsim
