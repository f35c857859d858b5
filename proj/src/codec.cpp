#include "gensc/codec.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <queue>
#include <tuple>

#include "gensc/error.hpp"

namespace gensc {

void QuantizerConfig::validate() const {
  if (bits < 1 || bits > 16) throw Error(Errc::invalid_argument, "quantizer bits must be in [1, 16]");
  if (range_mode == RangeMode::fixed) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw Error(Errc::invalid_argument, "fixed range must be finite");
    if (!(lo < hi)) throw Error(Errc::invalid_argument, "fixed range requires lo < hi");
  }
}

QuantizedTensor quantize(const FeatureTensor& t, const QuantizerConfig& cfg) {
  cfg.validate();
  if (t.size() == 0) throw Error(Errc::empty_input, "cannot quantize an empty tensor");

  QuantizedTensor q;
  q.bits = cfg.bits;
  q.shape = t.shape();
  if (cfg.range_mode == RangeMode::per_tensor) {
    const auto [mn, mx] = std::minmax_element(t.data().begin(), t.data().end());
    q.lo = *mn;
    q.hi = *mx;
  } else {
    q.lo = cfg.lo;
    q.hi = cfg.hi;
  }

  q.codes.resize(t.size(), 0);
  if (q.hi == q.lo) return q;  // constant tensor

  const double top = static_cast<double>(q.levels() - 1);
  const double scale = top / (q.hi - q.lo);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = std::round((t[i] - q.lo) * scale);  // half away from zero
    q.codes[i] = static_cast<std::uint32_t>(std::clamp(r, 0.0, top));
  }
  return q;
}

FeatureTensor dequantize(const QuantizedTensor& q) {
  if (q.bits < 1 || q.bits > 16) throw Error(Errc::invalid_argument, "quantizer bits must be in [1, 16]");
  if (q.hi < q.lo) throw Error(Errc::invalid_argument, "reconstruction range has hi < lo");
  const std::uint32_t top = q.levels() - 1;
  std::vector<double> out(q.codes.size());
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    if (q.codes[i] > top) throw Error(Errc::out_of_range, "code exceeds quantizer alphabet");
    const double frac = static_cast<double>(q.codes[i]) / static_cast<double>(top);
    // Convex combination hits lo and hi exactly at the extreme codes.
    out[i] = std::clamp((1.0 - frac) * q.lo + frac * q.hi, q.lo, q.hi);
  }
  return FeatureTensor(DType::f64, q.shape, std::move(out));
}

// ---------------------------------------------------------------------------
// Canonical Huffman

namespace {

constexpr char kBlobMagic[4] = {'G', 'S', 'C', 'Z'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) throw Error(Errc::truncated, "compressed blob header truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return v;
}

class BitWriter {
 public:
  void put(std::uint64_t code, int len) {
    for (int b = len - 1; b >= 0; --b) {
      if (fill_ == 0) bytes_.push_back(0);
      if ((code >> b) & 1U) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> fill_);
      fill_ = (fill_ + 1) & 7;
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;
};

}  // namespace

std::size_t CompressedBlob::serialized_size() const noexcept {
  return 4 + 4 + code_lengths.size() + 8 + 8 + payload.size();
}

std::vector<std::uint8_t> CompressedBlob::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size());
  out.insert(out.end(), std::begin(kBlobMagic), std::end(kBlobMagic));
  put_le<std::uint32_t>(out, alphabet());
  out.insert(out.end(), code_lengths.begin(), code_lengths.end());
  put_le<std::uint64_t>(out, symbol_count);
  put_le<std::uint64_t>(out, original_byte_size);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

CompressedBlob CompressedBlob::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kBlobMagic, 4) != 0)
    throw Error(Errc::bad_magic, "missing GSCZ header");
  std::size_t pos = 4;
  const auto alphabet = get_le<std::uint32_t>(bytes, pos);
  if (alphabet == 0) throw Error(Errc::corrupt_table, "empty alphabet");
  if (bytes.size() - pos < alphabet) throw Error(Errc::truncated, "code length table truncated");
  CompressedBlob blob;
  blob.code_lengths.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos + alphabet));
  pos += alphabet;
  blob.symbol_count = get_le<std::uint64_t>(bytes, pos);
  blob.original_byte_size = get_le<std::uint64_t>(bytes, pos);
  blob.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return blob;
}

std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> frequencies) {
  std::vector<std::uint8_t> lengths(frequencies.size(), 0);
  std::vector<std::size_t> used;
  for (std::size_t s = 0; s < frequencies.size(); ++s)
    if (frequencies[s] > 0) used.push_back(s);
  if (used.empty()) throw Error(Errc::empty_input, "no symbols to code");
  if (used.size() == 1) {
    lengths[used[0]] = 1;
    return lengths;
  }

  // Node i < used.size() is a leaf; internal nodes are appended in creation order.
  using Item = std::tuple<std::uint64_t, std::size_t>;  // (weight, node id)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::vector<std::size_t> parent(2 * used.size() - 1, 0);
  for (std::size_t i = 0; i < used.size(); ++i) heap.emplace(frequencies[used[i]], i);
  std::size_t next = used.size();
  while (heap.size() > 1) {
    const auto [wa, a] = heap.top();
    heap.pop();
    const auto [wb, b] = heap.top();
    heap.pop();
    parent[a] = parent[b] = next;
    heap.emplace(wa + wb, next);
    ++next;
  }
  const std::size_t root = next - 1;
  // Parents always have larger ids, so a reverse sweep yields depths.
  std::vector<int> depth(next, 0);
  for (std::size_t n = root; n-- > 0;) depth[n] = depth[parent[n]] + 1;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (depth[i] > kMaxCodeLength) throw Error(Errc::out_of_range, "Huffman code exceeds 63 bits");
    lengths[used[i]] = static_cast<std::uint8_t>(depth[i]);
  }
  return lengths;
}

std::vector<std::uint64_t> canonical_codes(std::span<const std::uint8_t> lengths) {
  std::vector<std::uint32_t> order;
  for (std::uint32_t s = 0; s < lengths.size(); ++s)
    if (lengths[s] > 0) order.push_back(s);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::uint64_t> codes(lengths.size(), 0);
  std::uint64_t code = 0;
  int prev = order.empty() ? 0 : lengths[order.front()];
  for (auto s : order) {
    code <<= (lengths[s] - prev);
    codes[s] = code++;
    prev = lengths[s];
  }
  return codes;
}

std::uint64_t kraft_sum_scaled(std::span<const std::uint8_t> lengths) {
  constexpr std::uint64_t kOne = std::uint64_t{1} << kMaxCodeLength;
  std::uint64_t sum = 0;
  for (auto len : lengths) {
    if (len == 0) continue;
    if (len > kMaxCodeLength) throw Error(Errc::corrupt_table, "code length " + std::to_string(len) + " exceeds 63");
    sum += std::uint64_t{1} << (kMaxCodeLength - len);
    if (sum > kOne) throw Error(Errc::corrupt_table, "code lengths violate the Kraft inequality");
  }
  return sum;
}

CompressedBlob entropy_encode(std::span<const std::uint32_t> symbols, std::uint32_t alphabet,
                              std::optional<std::uint64_t> original_byte_size) {
  if (alphabet == 0) throw Error(Errc::invalid_argument, "alphabet must be non-empty");
  if (symbols.empty()) throw Error(Errc::empty_input, "cannot entropy-code an empty sequence");
  std::vector<std::uint64_t> freq(alphabet, 0);
  for (auto s : symbols) {
    if (s >= alphabet) throw Error(Errc::out_of_range, "symbol " + std::to_string(s) + " outside alphabet");
    ++freq[s];
  }

  CompressedBlob blob;
  blob.code_lengths = huffman_code_lengths(freq);
  blob.symbol_count = symbols.size();
  if (original_byte_size) {
    blob.original_byte_size = *original_byte_size;
  } else {
    const int symbol_bits = std::max(1, static_cast<int>(std::bit_width(alphabet - 1)));
    blob.original_byte_size = symbols.size() * static_cast<std::uint64_t>((symbol_bits + 7) / 8);
  }

  const auto codes = canonical_codes(blob.code_lengths);
  BitWriter w;
  for (auto s : symbols) w.put(codes[s], blob.code_lengths[s]);
  blob.payload = w.take();
  return blob;
}

std::vector<std::uint32_t> entropy_decode(const CompressedBlob& blob) {
  const auto& lengths = blob.code_lengths;
  if (lengths.empty()) throw Error(Errc::corrupt_table, "empty alphabet");
  (void)kraft_sum_scaled(lengths);

  // Canonical decoding tables: per length, the first code and its offset
  // into the (length, symbol)-sorted symbol list.
  std::array<std::uint64_t, kMaxCodeLength + 2> count{};
  int max_len = 0;
  for (auto len : lengths) {
    if (len == 0) continue;
    ++count[len];
    max_len = std::max<int>(max_len, len);
  }
  if (max_len == 0) {
    if (blob.symbol_count == 0) return {};
    throw Error(Errc::corrupt_table, "no symbol has a code");
  }
  std::vector<std::uint32_t> sorted;
  for (int len = 1; len <= max_len; ++len)
    for (std::uint32_t s = 0; s < lengths.size(); ++s)
      if (lengths[s] == len) sorted.push_back(s);
  std::array<std::uint64_t, kMaxCodeLength + 2> first{};
  std::array<std::uint64_t, kMaxCodeLength + 2> offset{};
  std::uint64_t code = 0;
  std::uint64_t index = 0;
  for (int len = 1; len <= max_len; ++len) {
    code = (code + count[len - 1]) << 1;
    first[len] = code;
    offset[len] = index;
    index += count[len];
  }

  const std::uint64_t total_bits = static_cast<std::uint64_t>(blob.payload.size()) * 8;
  if (blob.symbol_count > total_bits) throw Error(Errc::truncated, "payload shorter than symbol count");
  std::vector<std::uint32_t> out;
  out.reserve(blob.symbol_count);
  std::uint64_t bitpos = 0;
  while (out.size() < blob.symbol_count) {
    std::uint64_t c = 0;
    int len = 0;
    for (;;) {
      if (bitpos >= total_bits) throw Error(Errc::truncated, "payload ended mid-symbol");
      const unsigned bit = (blob.payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1U;
      ++bitpos;
      c = (c << 1) | bit;
      ++len;
      if (count[len] > 0 && c >= first[len] && c - first[len] < count[len]) {
        out.push_back(sorted[offset[len] + (c - first[len])]);
        break;
      }
      if (len >= max_len) throw Error(Errc::corrupt_table, "payload contains an unassigned code word");
    }
  }
  if ((bitpos + 7) / 8 != blob.payload.size())
    throw Error(Errc::trailing_bytes, "payload has bytes beyond the last symbol");
  return out;
}

double empirical_entropy(std::span<const std::uint32_t> symbols, std::uint32_t alphabet) {
  if (symbols.empty()) return 0.0;
  std::vector<std::uint64_t> freq(alphabet, 0);
  for (auto s : symbols) {
    if (s >= alphabet) throw Error(Errc::out_of_range, "symbol outside alphabet");
    ++freq[s];
  }
  const double n = static_cast<double>(symbols.size());
  double h = 0.0;
  for (auto f : freq) {
    if (f == 0) continue;
    const double p = static_cast<double>(f) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double compression_rate(std::uint64_t original_bytes, std::uint64_t compressed_bytes) {
  if (original_bytes == 0) throw Error(Errc::invalid_argument, "original size must be positive");
  return 1.0 - static_cast<double>(compressed_bytes) / static_cast<double>(original_bytes);
}

std::string format_rate(double rate, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f%%", decimals, rate * 100.0);
  return buf;
}

}  // namespace gensc
