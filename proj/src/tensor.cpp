#include "gensc/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

#include "gensc/error.hpp"

namespace gensc {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::bad_magic: return "bad magic";
    case Errc::bad_version: return "unsupported version";
    case Errc::truncated: return "truncated buffer";
    case Errc::trailing_bytes: return "trailing bytes";
    case Errc::unknown_dtype: return "unknown dtype";
    case Errc::non_finite: return "non-finite element";
    case Errc::io: return "i/o failure";
    case Errc::schema: return "schema violation";
    case Errc::dangling_path: return "dangling path";
    case Errc::duplicate_id: return "duplicate id";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::empty_input: return "empty input";
    case Errc::out_of_range: return "out of range";
    case Errc::corrupt_table: return "corrupt code table";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::zero_power: return "zero power";
    case Errc::capacity: return "capacity exceeded";
    case Errc::mode_mismatch: return "mode mismatch";
    case Errc::config_invalid: return "invalid configuration";
    case Errc::conflict: return "conflict";
  }
  return "unknown error";
}

std::string_view to_string(DType dtype) noexcept {
  switch (dtype) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::u8: return "u8";
  }
  return "?";
}

std::size_t element_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
  }
  return 0;
}

std::size_t shape_product(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

namespace {

double convert_element(double x, DType dtype) {
  if (!std::isfinite(x)) throw Error(Errc::non_finite, "tensor element is NaN or infinite");
  switch (dtype) {
    case DType::f32: {
      if (std::abs(x) > std::numeric_limits<float>::max())
        throw Error(Errc::non_finite, "element overflows f32");
      return static_cast<double>(static_cast<float>(x));
    }
    case DType::f64:
      return x;
    case DType::u8:
      if (x < 0.0 || x > 255.0 || x != std::floor(x))
        throw Error(Errc::invalid_argument, "u8 element must be an integer in [0, 255]");
      return x;
  }
  throw Error(Errc::unknown_dtype, "unknown dtype");
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (remaining() < sizeof(T)) throw Error(Errc::truncated, "unexpected end of tensor data");
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(raw), std::end(raw));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'G', 'S', 'C', '6'};

}  // namespace

FeatureTensor::FeatureTensor(DType dtype, std::vector<std::size_t> shape, std::vector<double> data)
    : dtype_(dtype), shape_(std::move(shape)), data_(std::move(data)) {
  if (element_size(dtype_) == 0) throw Error(Errc::unknown_dtype, "unknown dtype");
  if (shape_.empty()) throw Error(Errc::shape_mismatch, "tensor shape must be non-empty");
  if (shape_.size() > 255) throw Error(Errc::shape_mismatch, "tensor rank exceeds 255");
  for (auto d : shape_) {
    if (d == 0) throw Error(Errc::shape_mismatch, "tensor dimensions must be >= 1");
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw Error(Errc::shape_mismatch, "tensor dimension exceeds u32");
  }
  if (shape_product(shape_) != data_.size())
    throw Error(Errc::shape_mismatch, "data length " + std::to_string(data_.size()) +
                                          " does not match shape product " +
                                          std::to_string(shape_product(shape_)));
  for (auto& x : data_) x = convert_element(x, dtype_);
}

FeatureTensor FeatureTensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return FeatureTensor(DType::f64, {n}, std::move(data));
}

FeatureTensor FeatureTensor::with_data(std::vector<double> data, DType dtype) const {
  return FeatureTensor(dtype, shape_, std::move(data));
}

std::vector<std::uint8_t> encode_tensor(const FeatureTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(10 + 4 * t.shape().size() + t.byte_size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.shape().size()));
  for (auto d : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double x : t.data()) {
    switch (t.dtype()) {
      case DType::f32: put_le<float>(out, static_cast<float>(x)); break;
      case DType::f64: put_le<double>(out, x); break;
      case DType::u8: out.push_back(static_cast<std::uint8_t>(x)); break;
    }
  }
  return out;
}

FeatureTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(Errc::bad_magic, "missing GSC6 header");
  Reader in(bytes.subspan(4));
  const auto version = in.get<std::uint32_t>();
  if (version != kTensorFormatVersion)
    throw Error(Errc::bad_version, "tensor format version " + std::to_string(version));
  const auto tag = in.get<std::uint8_t>();
  if (tag > 2) throw Error(Errc::unknown_dtype, "dtype tag " + std::to_string(tag));
  const auto dtype = static_cast<DType>(tag);
  const auto ndim = in.get<std::uint8_t>();
  if (ndim == 0) throw Error(Errc::shape_mismatch, "tensor rank 0");
  std::vector<std::size_t> shape(ndim);
  for (auto& d : shape) d = in.get<std::uint32_t>();

  const std::size_t n = shape_product(shape);
  const std::size_t esize = element_size(dtype);
  if (n > in.remaining() / esize || (n * esize) > in.remaining())
    throw Error(Errc::truncated, "payload holds " + std::to_string(in.remaining() / esize) +
                                     " elements, shape requires " + std::to_string(n));
  std::vector<double> data(n);
  for (auto& x : data) {
    switch (dtype) {
      case DType::f32: x = in.get<float>(); break;
      case DType::f64: x = in.get<double>(); break;
      case DType::u8: x = in.get<std::uint8_t>(); break;
    }
  }
  if (in.remaining() != 0)
    throw Error(Errc::trailing_bytes, std::to_string(in.remaining()) + " bytes after payload");
  return FeatureTensor(dtype, std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io, "read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

FeatureTensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_tensor(bytes);
}

void write_tensor(const FeatureTensor& t, const std::filesystem::path& path) {
  write_file_bytes(path, encode_tensor(t));
}

}  // namespace gensc
