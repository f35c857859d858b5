#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gensc/tensor.hpp"

namespace gensc {

enum class RangeMode { per_tensor, fixed };

struct QuantizerConfig {
  int bits = 8;
  RangeMode range_mode = RangeMode::per_tensor;
  double lo = 0.0;  // fixed mode only
  double hi = 1.0;  // fixed mode only

  std::uint32_t levels() const noexcept { return std::uint32_t{1} << bits; }
  void validate() const;
};

struct QuantizedTensor {
  std::vector<std::uint32_t> codes;
  std::vector<std::size_t> shape;
  double lo = 0.0;
  double hi = 0.0;
  int bits = 8;

  std::uint32_t levels() const noexcept { return std::uint32_t{1} << bits; }
  double step() const noexcept { return (hi - lo) / static_cast<double>(levels() - 1); }
};

/// Uniform scalar quantizer: code = round((x - lo) / (hi - lo) * (L - 1)),
/// rounding half away from zero and clamping to [0, L-1]. A constant tensor
/// in per-tensor mode quantizes to all-zero codes with lo == hi.
QuantizedTensor quantize(const FeatureTensor& t, const QuantizerConfig& cfg);

/// x = lo + code / (L - 1) * (hi - lo); returns an f64 tensor.
FeatureTensor dequantize(const QuantizedTensor& q);

/// Canonical-Huffman compressed symbol sequence.
///
/// On disk: magic "GSCZ" | u32 alphabet | alphabet x u8 code length |
/// u64 symbol count | u64 original_byte_size | payload (MSB-first bits).
/// All integers little-endian. A code length of 0 marks an unused symbol.
struct CompressedBlob {
  std::vector<std::uint8_t> code_lengths;
  std::uint64_t symbol_count = 0;
  std::uint64_t original_byte_size = 0;
  std::vector<std::uint8_t> payload;

  std::uint32_t alphabet() const noexcept { return static_cast<std::uint32_t>(code_lengths.size()); }
  std::size_t serialized_size() const noexcept;

  std::vector<std::uint8_t> serialize() const;
  static CompressedBlob parse(std::span<const std::uint8_t> bytes);
};

/// Longest code the decoder accepts.
inline constexpr int kMaxCodeLength = 63;

/// Huffman code lengths for a frequency table. Ties are broken on
/// (frequency, node creation order), so results are deterministic. A
/// single used symbol gets length 1.
std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> frequencies);

/// Canonical code words for a length table (0 for unused symbols).
std::vector<std::uint64_t> canonical_codes(std::span<const std::uint8_t> lengths);

/// Kraft sum scaled by 2^kMaxCodeLength; throws corrupt_table on overflow
/// or over-long codes.
std::uint64_t kraft_sum_scaled(std::span<const std::uint8_t> lengths);

/// `original_byte_size` defaults to the symbol count times the smallest
/// whole number of bytes that can hold one symbol.
CompressedBlob entropy_encode(std::span<const std::uint32_t> symbols, std::uint32_t alphabet,
                              std::optional<std::uint64_t> original_byte_size = std::nullopt);

std::vector<std::uint32_t> entropy_decode(const CompressedBlob& blob);

/// Shannon entropy of the empirical histogram, in bits per symbol.
double empirical_entropy(std::span<const std::uint32_t> symbols, std::uint32_t alphabet);

/// 1 - compressed / original, as a fraction.
double compression_rate(std::uint64_t original_bytes, std::uint64_t compressed_bytes);

/// Percentage with `decimals` digits, e.g. "99.993%".
std::string format_rate(double rate, int decimals = 3);

}  // namespace gensc
