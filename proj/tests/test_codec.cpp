#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gensc/codec.hpp"
#include "gensc/rng.hpp"
#include "test_util.hpp"

using namespace gensc;
using testutil::error_of;

TEST_CASE("quantizer error is at most half a step") {
  const int n = 100000;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = -3.0 + 7.5 * i / (n - 1);
  const auto t = FeatureTensor::vector(x);
  for (int bits : {1, 4, 8, 12}) {
    QuantizerConfig cfg;
    cfg.bits = bits;
    const auto q = quantize(t, cfg);
    CHECK(q.lo == -3.0);
    CHECK(q.hi == 4.5);
    const auto y = dequantize(q);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
    CHECK(worst <= q.step() / 2 * (1 + 1e-12));
  }
}

TEST_CASE("quantizer edge cases") {
  QuantizerConfig cfg;
  cfg.bits = 2;
  // 4 levels over [0, 3]: 0.5 rounds half away from zero to code 1.
  const auto q = quantize(FeatureTensor::vector({0.0, 0.5, 1.49, 3.0}), cfg);
  CHECK(q.codes == std::vector<std::uint32_t>{0, 1, 1, 3});

  const auto flat = quantize(FeatureTensor::vector({2.0, 2.0}), cfg);
  CHECK(flat.codes == std::vector<std::uint32_t>{0, 0});
  CHECK(dequantize(flat)[1] == 2.0);

  QuantizerConfig fixed;
  fixed.bits = 3;
  fixed.range_mode = RangeMode::fixed;
  fixed.lo = 0.0;
  fixed.hi = 7.0;
  const auto c = quantize(FeatureTensor::vector({-5.0, 9.0, 3.2}), fixed);
  CHECK(c.codes == std::vector<std::uint32_t>{0, 7, 3});

  cfg.bits = 0;
  CHECK(error_of([&] { quantize(FeatureTensor::vector({1.0}), cfg); }) == Errc::invalid_argument);
  fixed.hi = fixed.lo;
  CHECK(error_of([&] { quantize(FeatureTensor::vector({1.0}), fixed); }) == Errc::invalid_argument);
}

TEST_CASE("Huffman lengths and canonical codes for a textbook table") {
  const std::vector<std::uint64_t> freq = {5, 9, 12, 13, 16, 45};
  const auto len = huffman_code_lengths(freq);
  CHECK(len == std::vector<std::uint8_t>{4, 4, 3, 3, 3, 1});
  const auto codes = canonical_codes(len);
  CHECK(codes == std::vector<std::uint64_t>{0b1110, 0b1111, 0b100, 0b101, 0b110, 0b0});
  CHECK(kraft_sum_scaled(len) == (std::uint64_t{1} << 63));

  CHECK(huffman_code_lengths(std::vector<std::uint64_t>{0, 7, 0}) == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(error_of([] { kraft_sum_scaled(std::vector<std::uint8_t>{1, 1, 1}); }) == Errc::corrupt_table);
}

TEST_CASE("Huffman roundtrip on fuzzed sequences") {
  auto rng = derive_stream(SeedSpec{5}, "fuzz", "codec");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t alphabet = 1 + static_cast<std::uint32_t>(rng.next_u64() % 300);
    const std::size_t n = 1 + rng.next_u64() % 400;
    const double skew = rng.uniform() * 3.0;
    std::vector<std::uint32_t> s(n);
    for (auto& v : s) v = static_cast<std::uint32_t>(std::pow(rng.uniform(), 1.0 + skew) * alphabet) % alphabet;
    const auto blob = entropy_encode(s, alphabet);
    const auto bytes = blob.serialize();
    REQUIRE(bytes.size() == blob.serialized_size());
    REQUIRE(entropy_decode(CompressedBlob::parse(bytes)) == s);
  }
}

namespace {

// Payload bits against the n * (H + 1) bound.
void check_bound(const std::vector<std::uint32_t>& s, std::uint32_t alphabet) {
  const auto blob = entropy_encode(s, alphabet);
  const double n = static_cast<double>(s.size());
  const double h = empirical_entropy(s, alphabet);
  const double table = static_cast<double>(blob.serialized_size() - blob.payload.size());
  CHECK(table == 4 + 4 + alphabet + 8 + 8);
  CHECK(static_cast<double>(blob.payload.size()) * 8 <= n * (h + 1) + 7);
  CHECK(entropy_decode(blob) == s);
}

}  // namespace

TEST_CASE("compressed size bound on geometric, uniform and constant sources") {
  auto rng = derive_stream(SeedSpec{11}, "bound", "codec");
  const std::size_t n = 100000;
  std::vector<std::uint32_t> geo(n), uni(n), con(n, 3);
  for (auto& v : geo) v = std::min<std::uint32_t>(255, static_cast<std::uint32_t>(std::floor(std::log(1.0 - rng.uniform()) / std::log(0.7))));
  for (auto& v : uni) v = static_cast<std::uint32_t>(rng.next_u64() % 256);
  check_bound(geo, 256);
  check_bound(uni, 256);
  check_bound(con, 256);

  // Uniform bytes barely compress: within 2% of 8 bits per symbol.
  const auto blob = entropy_encode(uni, 256);
  const double bits = static_cast<double>(blob.payload.size()) * 8;
  CHECK(std::abs(bits - 8.0 * n) / (8.0 * n) < 0.02);
  // Constant input costs one bit per symbol.
  CHECK(entropy_encode(con, 256).payload.size() == n / 8);
}

TEST_CASE("corrupted blobs are rejected") {
  const std::vector<std::uint32_t> s = {0, 1, 2, 2, 2, 3, 1, 0, 2};
  const auto bytes = entropy_encode(s, 4).serialize();

  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  CHECK(error_of([&] { CompressedBlob::parse(bad_magic); }) == Errc::bad_magic);
  CHECK(error_of([&] { CompressedBlob::parse(std::span(bytes).first(10)); }) == Errc::truncated);

  auto blob = CompressedBlob::parse(bytes);
  blob.payload.pop_back();
  CHECK(error_of([&] { entropy_decode(blob); }) == Errc::truncated);
  blob = CompressedBlob::parse(bytes);
  blob.payload.push_back(0);
  CHECK(error_of([&] { entropy_decode(blob); }) == Errc::trailing_bytes);
  blob = CompressedBlob::parse(bytes);
  blob.code_lengths.assign(4, 1);
  CHECK(error_of([&] { entropy_decode(blob); }) == Errc::corrupt_table);
}

TEST_CASE("compression rate arithmetic") {
  CHECK(format_rate(compression_rate(100000, 7)) == "99.993%");
  CHECK(compression_rate(8, 8) == 0.0);
  CHECK(compression_rate(4, 8) == -1.0);
  CHECK(error_of([] { compression_rate(0, 1); }) == Errc::invalid_argument);
  // 1000 u8 symbols default to 1 byte each.
  std::vector<std::uint32_t> s(1000, 7);
  CHECK(entropy_encode(s, 256).original_byte_size == 1000);
  CHECK(entropy_encode(s, 257).original_byte_size == 2000);
}
