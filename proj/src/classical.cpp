#include "gensc/classical.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gensc/error.hpp"

namespace gensc {

std::string to_string(Constellation c) {
  switch (c) {
    case Constellation::bpsk: return "BPSK";
    case Constellation::qpsk: return "QPSK";
    case Constellation::qam16: return "16QAM";
    case Constellation::qam64: return "64QAM";
  }
  return "?";
}

std::string to_string(ChannelMode m) { return m == ChannelMode::digital ? "digital" : "analog-jscc"; }

Constellation parse_constellation(const std::string& name) {
  if (name == "BPSK" || name == "bpsk") return Constellation::bpsk;
  if (name == "QPSK" || name == "qpsk") return Constellation::qpsk;
  if (name == "16QAM" || name == "qam16") return Constellation::qam16;
  if (name == "64QAM" || name == "qam64") return Constellation::qam64;
  throw Error(Errc::config_invalid, "unknown constellation '" + name + "'");
}

ChannelMode parse_channel_mode(const std::string& name) {
  if (name == "digital") return ChannelMode::digital;
  if (name == "analog-jscc") return ChannelMode::analog_jscc;
  throw Error(Errc::config_invalid, "unknown channel mode '" + name + "'");
}

int bits_per_symbol(Constellation c) noexcept {
  switch (c) {
    case Constellation::bpsk: return 1;
    case Constellation::qpsk: return 2;
    case Constellation::qam16: return 4;
    case Constellation::qam64: return 6;
  }
  return 1;
}

bool is_noiseless(double snr_db) noexcept { return snr_db >= kNoiselessSnrDb; }

void OfdmConfig::validate() const {
  if (n_subcarriers < 8 || !std::has_single_bit(n_subcarriers))
    throw Error(Errc::config_invalid, "n_subcarriers must be a power of two >= 8");
  if (cyclic_prefix_len >= n_subcarriers)
    throw Error(Errc::config_invalid, "cyclic_prefix_len must be smaller than n_subcarriers");
}

void ChannelConfig::validate() const {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw Error(Errc::config_invalid, "snr_db must be finite (or the noiseless sentinel)");
  if (ofdm) ofdm->validate();
}

double SymbolStream::average_power() const noexcept {
  if (symbols.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : symbols) acc += std::norm(s);
  return acc / static_cast<double>(symbols.size());
}

// ---------------------------------------------------------------------------
// Constellations

namespace {

std::uint32_t gray_to_binary(std::uint32_t g) noexcept {
  std::uint32_t b = g;
  while (g >>= 1) b ^= g;
  return b;
}

// Amplitude for a Gray-labelled PAM axis with `levels` points: label 0 sits at
// +(levels-1) and each step along the axis changes exactly one label bit.
double pam_level(std::uint32_t label, std::uint32_t levels) noexcept {
  const auto position = gray_to_binary(label);
  return static_cast<double>(levels - 1) - 2.0 * static_cast<double>(position);
}

}  // namespace

cplx constellation_point(Constellation c, std::uint32_t index) {
  const int bps = bits_per_symbol(c);
  if (index >= (1U << bps)) throw Error(Errc::out_of_range, "symbol index outside constellation");
  if (c == Constellation::bpsk) return {index == 0 ? 1.0 : -1.0, 0.0};
  const int half = bps / 2;
  const std::uint32_t levels = 1U << half;
  const std::uint32_t i_label = index >> half;
  const std::uint32_t q_label = index & (levels - 1);
  // Average power of a square M-QAM grid with odd-integer levels is 2(M-1)/3.
  const double m = static_cast<double>(1U << bps);
  const double scale = 1.0 / std::sqrt(2.0 * (m - 1.0) / 3.0);
  return {pam_level(i_label, levels) * scale, pam_level(q_label, levels) * scale};
}

std::vector<cplx> constellation_points(Constellation c) {
  std::vector<cplx> pts(std::size_t{1} << bits_per_symbol(c));
  for (std::uint32_t i = 0; i < pts.size(); ++i) pts[i] = constellation_point(c, i);
  return pts;
}

SymbolStream map_bits(std::span<const std::uint8_t> bits, Constellation c) {
  const int bps = bits_per_symbol(c);
  const auto table = constellation_points(c);
  const std::size_t n_sym = (bits.size() + bps - 1) / bps;
  SymbolStream out;
  out.symbols.resize(n_sym);
  for (std::size_t k = 0; k < n_sym; ++k) {
    std::uint32_t index = 0;
    for (int b = 0; b < bps; ++b) {
      const std::size_t pos = k * bps + b;
      const std::uint32_t bit = pos < bits.size() ? (bits[pos] & 1U) : 0U;
      index = (index << 1) | bit;
    }
    out.symbols[k] = table[index];
  }
  return out;
}

std::vector<std::uint8_t> demap_symbols(const SymbolStream& rx, Constellation c) {
  const int bps = bits_per_symbol(c);
  const auto table = constellation_points(c);
  std::vector<std::uint8_t> bits(rx.size() * bps);
  for (std::size_t k = 0; k < rx.size(); ++k) {
    std::uint32_t best = 0;
    double best_d = std::norm(rx.symbols[k] - table[0]);
    for (std::uint32_t i = 1; i < table.size(); ++i) {
      const double d = std::norm(rx.symbols[k] - table[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    for (int b = 0; b < bps; ++b) bits[k * bps + b] = static_cast<std::uint8_t>((best >> (bps - 1 - b)) & 1U);
  }
  return bits;
}

// ---------------------------------------------------------------------------
// AWGN

void add_complex_noise(std::span<cplx> symbols, double noise_variance, RandomStream& stream) {
  if (noise_variance <= 0.0) return;
  const double sigma = std::sqrt(noise_variance / 2.0);
  for (auto& s : symbols) {
    const double re = stream.normal();
    const double im = stream.normal();
    s += cplx(sigma * re, sigma * im);
  }
}

namespace {

double snr_linear(double snr_db) noexcept { return std::pow(10.0, snr_db / 10.0); }

double mean_power(std::span<const double> x) noexcept {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

DType noisy_dtype(DType in) noexcept { return in == DType::u8 ? DType::f64 : in; }

}  // namespace

SymbolStream awgn(const SymbolStream& s, double snr_db, RandomStream& stream) {
  const double p = s.average_power();
  if (!(p > 0.0)) throw Error(Errc::zero_power, "cannot reference AWGN to a zero-power stream");
  SymbolStream out = s;
  if (is_noiseless(snr_db)) return out;
  add_complex_noise(out.symbols, p / snr_linear(snr_db), stream);
  return out;
}

FeatureTensor awgn_with_reference(const FeatureTensor& t, double snr_db, double reference_power,
                                  RandomStream& stream) {
  if (!(reference_power > 0.0)) throw Error(Errc::zero_power, "AWGN reference power must be positive");
  std::vector<double> out(t.data().begin(), t.data().end());
  if (!is_noiseless(snr_db)) {
    const double sigma = std::sqrt(reference_power / snr_linear(snr_db));
    for (auto& x : out) x += sigma * stream.normal();
  }
  return t.with_data(std::move(out), noisy_dtype(t.dtype()));
}

FeatureTensor awgn(const FeatureTensor& t, double snr_db, RandomStream& stream) {
  const double p = mean_power(t.data());
  if (!(p > 0.0)) throw Error(Errc::zero_power, "cannot reference AWGN to a zero-power tensor");
  return awgn_with_reference(t, snr_db, p, stream);
}

// ---------------------------------------------------------------------------
// DFT / OFDM

void fft(std::span<cplx> data, bool inverse) {
  const std::size_t n = data.size();
  if (n == 0 || !std::has_single_bit(n)) throw Error(Errc::invalid_argument, "FFT size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const cplx w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const cplx u = data[start + k];
        const cplx v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& x : data) x *= scale;
}

SymbolStream ofdm_modulate(const SymbolStream& s, const OfdmConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_subcarriers;
  const std::size_t cp = cfg.cyclic_prefix_len;
  const std::size_t blocks = (s.size() + n - 1) / n;
  SymbolStream out;
  out.symbols.resize(blocks * cfg.block_len());
  std::vector<cplx> block(n);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::fill(block.begin(), block.end(), cplx{});
    const std::size_t begin = b * n;
    const std::size_t count = std::min(n, s.size() - begin);
    std::copy_n(s.symbols.begin() + static_cast<std::ptrdiff_t>(begin), count, block.begin());
    fft(block, /*inverse=*/true);
    auto dst = out.symbols.begin() + static_cast<std::ptrdiff_t>(b * cfg.block_len());
    std::copy(block.end() - static_cast<std::ptrdiff_t>(cp), block.end(), dst);
    std::copy(block.begin(), block.end(), dst + static_cast<std::ptrdiff_t>(cp));
  }
  return out;
}

SymbolStream ofdm_demodulate(const SymbolStream& s, const OfdmConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_subcarriers;
  const std::size_t len = cfg.block_len();
  if (s.size() % len != 0)
    throw Error(Errc::invalid_argument, "OFDM stream length is not a multiple of the block length");
  const std::size_t blocks = s.size() / len;
  SymbolStream out;
  out.symbols.resize(blocks * n);
  for (std::size_t b = 0; b < blocks; ++b) {
    auto src = s.symbols.begin() + static_cast<std::ptrdiff_t>(b * len + cfg.cyclic_prefix_len);
    std::span<cplx> block(out.symbols.data() + b * n, n);
    std::copy_n(src, n, block.begin());
    fft(block, /*inverse=*/false);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transmission chains

double normalize_power(SymbolStream& s) {
  const double p = s.average_power();
  if (!(p > 0.0)) throw Error(Errc::zero_power, "cannot normalize a zero-power stream");
  const double gain = 1.0 / std::sqrt(p);
  for (auto& x : s.symbols) x *= gain;
  return gain;
}

namespace {

// Shared channel section: noise is referenced to the power of the data
// symbols, so OFDM framing does not change the per-subcarrier SNR.
SymbolStream pass_channel(const SymbolStream& tx, const ChannelConfig& cfg, RandomStream& stream) {
  if (!cfg.ofdm) return awgn(tx, cfg.snr_db, stream);
  const double p = tx.average_power();
  if (!(p > 0.0)) throw Error(Errc::zero_power, "cannot reference AWGN to a zero-power stream");
  auto time = ofdm_modulate(tx, *cfg.ofdm);
  if (!is_noiseless(cfg.snr_db)) add_complex_noise(time.symbols, p / snr_linear(cfg.snr_db), stream);
  auto rx = ofdm_demodulate(time, *cfg.ofdm);
  rx.symbols.resize(tx.size());
  return rx;
}

}  // namespace

FeatureTensor jscc_transmit(const FeatureTensor& t, const ChannelConfig& cfg, RandomStream& stream) {
  cfg.validate();
  if (cfg.mode != ChannelMode::analog_jscc)
    throw Error(Errc::config_invalid, "jscc_transmit requires mode analog-jscc");
  const auto x = t.data();
  SymbolStream tx;
  tx.symbols.resize((x.size() + 1) / 2);
  for (std::size_t k = 0; k < tx.size(); ++k) {
    const double re = x[2 * k];
    const double im = 2 * k + 1 < x.size() ? x[2 * k + 1] : 0.0;
    tx.symbols[k] = {re, im};
  }
  const double gain = normalize_power(tx);
  const auto rx = pass_channel(tx, cfg, stream);

  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < rx.size(); ++k) {
    const cplx v = rx.symbols[k] / gain;
    out[2 * k] = v.real();
    if (2 * k + 1 < out.size()) out[2 * k + 1] = v.imag();
  }
  return t.with_data(std::move(out), noisy_dtype(t.dtype()));
}

std::vector<std::uint8_t> transmit_bits(std::span<const std::uint8_t> bits, const ChannelConfig& cfg,
                                        RandomStream& stream) {
  if (bits.empty()) return {};
  const auto tx = map_bits(bits, cfg.constellation);
  const auto rx = pass_channel(tx, cfg, stream);
  auto out = demap_symbols(rx, cfg.constellation);
  out.resize(bits.size());
  return out;
}

std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> bits(bytes.size() * 8);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    for (int b = 0; b < 8; ++b) bits[8 * i + b] = static_cast<std::uint8_t>((bytes[i] >> (7 - b)) & 1U);
  return bits;
}

std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] & 1U) bytes[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  return bytes;
}

namespace {

std::uint64_t count_bit_errors(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::uint64_t errors = 0;
  for (std::size_t i = 0; i < a.size(); ++i) errors += (a[i] & 1U) != (b[i] & 1U);
  return errors;
}

}  // namespace

DigitalTransmitResult digital_transmit_detailed(const FeatureTensor& t, const QuantizerConfig& qcfg,
                                                const ChannelConfig& cfg, RandomStream& stream) {
  cfg.validate();
  if (cfg.mode != ChannelMode::digital) throw Error(Errc::config_invalid, "digital_transmit requires mode digital");
  const auto q = quantize(t, qcfg);
  const auto blob = entropy_encode(q.codes, q.levels(), t.byte_size());
  const auto tx_bytes = blob.serialize();
  const auto tx_bits = bytes_to_bits(tx_bytes);
  const auto rx_bits = transmit_bits(tx_bits, cfg, stream);

  DigitalTransmitResult result{.output = FeatureTensor::vector({0.0})};
  result.bits_sent = tx_bits.size();
  result.bit_errors = count_bit_errors(tx_bits, rx_bits);
  result.blob_bytes = tx_bytes.size();
  result.original_bytes = t.byte_size();

  QuantizedTensor rxq{.codes = {}, .shape = q.shape, .lo = q.lo, .hi = q.hi, .bits = q.bits};
  try {
    const auto rx_blob = CompressedBlob::parse(bits_to_bytes(rx_bits));
    auto codes = entropy_decode(rx_blob);
    const bool valid = codes.size() == q.codes.size() &&
                       std::all_of(codes.begin(), codes.end(), [&](std::uint32_t c) { return c < q.levels(); });
    if (valid) rxq.codes = std::move(codes);
  } catch (const Error&) {
    // Undecodable blob; handled by the fixed-length fallback below.
  }

  if (rxq.codes.empty()) {
    result.fallback_used = true;
    std::vector<std::uint8_t> frame(q.codes.size() * static_cast<std::size_t>(q.bits));
    for (std::size_t i = 0; i < q.codes.size(); ++i)
      for (int b = 0; b < q.bits; ++b)
        frame[i * q.bits + b] = static_cast<std::uint8_t>((q.codes[i] >> (q.bits - 1 - b)) & 1U);
    const auto rx_frame = transmit_bits(frame, cfg, stream);
    result.bits_sent += frame.size();
    result.bit_errors += count_bit_errors(frame, rx_frame);
    rxq.codes.resize(q.codes.size());
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
      std::uint32_t c = 0;
      for (int b = 0; b < q.bits; ++b) c = (c << 1) | (rx_frame[i * q.bits + b] & 1U);
      rxq.codes[i] = c;
    }
  }
  result.output = dequantize(rxq);
  return result;
}

FeatureTensor digital_transmit(const FeatureTensor& t, const QuantizerConfig& qcfg, const ChannelConfig& cfg,
                               RandomStream& stream) {
  return digital_transmit_detailed(t, qcfg, cfg, stream).output;
}

double q_function(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

}  // namespace gensc
