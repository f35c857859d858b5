#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace gensc {

struct SeedSpec {
  std::uint64_t master_seed = 0;
};

/// Counter-based random stream.
///
/// Output i is `mix64(key + i * golden_gamma)`, i.e. SplitMix64 evaluated at
/// counter i. The sequence depends only on the key, so results are identical
/// across platforms and independent of scheduling order. Satisfies
/// UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }
  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

/// Substream key for (master_seed, sample_id, stage). Each string is hashed
/// separately with FNV-1a and folded into the seed through mix64, so the
/// triple boundaries are unambiguous.
std::uint64_t stream_key(const SeedSpec& seed, std::string_view sample_id, std::string_view stage) noexcept;

RandomStream derive_stream(const SeedSpec& seed, std::string_view sample_id, std::string_view stage) noexcept;

}  // namespace gensc
