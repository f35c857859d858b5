#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gensc/codec.hpp"
#include "gensc/rng.hpp"
#include "gensc/tensor.hpp"

namespace gensc {

using cplx = std::complex<double>;

enum class Constellation { bpsk, qpsk, qam16, qam64 };
enum class ChannelMode { digital, analog_jscc };

std::string to_string(Constellation c);
std::string to_string(ChannelMode m);
Constellation parse_constellation(const std::string& name);
ChannelMode parse_channel_mode(const std::string& name);

int bits_per_symbol(Constellation c) noexcept;

/// snr_db at or above this value (including +inf) means a noiseless channel.
inline constexpr double kNoiselessSnrDb = 1000.0;
bool is_noiseless(double snr_db) noexcept;

struct OfdmConfig {
  std::size_t n_subcarriers = 64;
  std::size_t cyclic_prefix_len = 16;

  std::size_t block_len() const noexcept { return n_subcarriers + cyclic_prefix_len; }
  void validate() const;
};

struct ChannelConfig {
  double snr_db = 10.0;
  ChannelMode mode = ChannelMode::analog_jscc;
  Constellation constellation = Constellation::qpsk;
  std::optional<OfdmConfig> ofdm;

  void validate() const;
};

struct SymbolStream {
  std::vector<cplx> symbols;

  std::size_t size() const noexcept { return symbols.size(); }
  double average_power() const noexcept;
};

/// Gray-mapped, unit-average-power constellation point for a symbol index
/// (the index is the bit label read MSB first). BPSK maps 0 -> +1, 1 -> -1;
/// square QAM applies the same antipodal Gray rule per axis, with the first
/// half of the label on I and the second half on Q.
cplx constellation_point(Constellation c, std::uint32_t index);
std::vector<cplx> constellation_points(Constellation c);

/// Bits are 0/1 bytes. The tail is zero-padded to a whole symbol.
SymbolStream map_bits(std::span<const std::uint8_t> bits, Constellation c);

/// Minimum-Euclidean-distance hard decision; ties go to the lowest symbol index.
std::vector<std::uint8_t> demap_symbols(const SymbolStream& rx, Constellation c);

/// Adds circular complex Gaussian noise of total variance `noise_variance`
/// (variance/2 per component).
void add_complex_noise(std::span<cplx> symbols, double noise_variance, RandomStream& stream);

/// AWGN referenced to the measured input power: sigma^2 = P / 10^(snr_db/10).
SymbolStream awgn(const SymbolStream& s, double snr_db, RandomStream& stream);
FeatureTensor awgn(const FeatureTensor& t, double snr_db, RandomStream& stream);

/// AWGN against an explicit reference power instead of the measured one.
FeatureTensor awgn_with_reference(const FeatureTensor& t, double snr_db, double reference_power,
                                  RandomStream& stream);

/// In-place radix-2 DFT with orthonormal (1/sqrt(N)) scaling. N must be a
/// power of two. Reentrant.
void fft(std::span<cplx> data, bool inverse);

/// Zero-pads to whole blocks, then per block: inverse DFT and cyclic prefix.
SymbolStream ofdm_modulate(const SymbolStream& s, const OfdmConfig& cfg);

/// Strips each prefix and applies the forward DFT. The result keeps any
/// padding added by ofdm_modulate.
SymbolStream ofdm_demodulate(const SymbolStream& s, const OfdmConfig& cfg);

/// Scales the stream to unit mean power and returns the applied gain.
double normalize_power(SymbolStream& s);

/// Analog JSCC: consecutive feature pairs become (re, im) symbols, power
/// normalized to 1, optionally OFDM framed, then sent through AWGN.
FeatureTensor jscc_transmit(const FeatureTensor& t, const ChannelConfig& cfg, RandomStream& stream);

struct DigitalTransmitResult {
  FeatureTensor output;
  std::uint64_t bits_sent = 0;    // over the channel, including any fallback frame
  std::uint64_t bit_errors = 0;
  std::uint64_t blob_bytes = 0;   // serialized entropy-coded size
  std::uint64_t original_bytes = 0;
  bool fallback_used = false;

  double ber() const noexcept {
    return bits_sent == 0 ? 0.0 : static_cast<double>(bit_errors) / static_cast<double>(bits_sent);
  }
};

/// quantize -> entropy_encode -> map_bits -> (OFDM) -> AWGN -> (OFDM^-1) ->
/// demap -> entropy_decode -> dequantize.
///
/// Quantizer range and tensor shape travel as side information. When the
/// received blob does not decode to the right number of symbols, the codes
/// are sent again as an uncoded fixed-length frame (bits per code) and that
/// frame is used instead.
DigitalTransmitResult digital_transmit_detailed(const FeatureTensor& t, const QuantizerConfig& qcfg,
                                                const ChannelConfig& cfg, RandomStream& stream);

FeatureTensor digital_transmit(const FeatureTensor& t, const QuantizerConfig& qcfg, const ChannelConfig& cfg,
                               RandomStream& stream);

/// Sends raw bits through map -> (OFDM) -> AWGN -> (OFDM^-1) -> demap and
/// returns the received bits (same length as the input).
std::vector<std::uint8_t> transmit_bits(std::span<const std::uint8_t> bits, const ChannelConfig& cfg,
                                        RandomStream& stream);

std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits);

/// Gaussian tail probability Q(x).
double q_function(double x) noexcept;

}  // namespace gensc
