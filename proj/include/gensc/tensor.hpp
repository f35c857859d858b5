#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace gensc {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

std::string_view to_string(DType dtype) noexcept;
std::size_t element_size(DType dtype) noexcept;

/// N-dimensional real-valued array with a dtype tag.
///
/// Elements are held as doubles at the precision of the declared dtype: f32
/// values are rounded to float on construction and u8 values must be
/// integers in [0, 255]. Every element is finite. Instances are immutable.
class FeatureTensor {
 public:
  FeatureTensor(DType dtype, std::vector<std::size_t> shape, std::vector<double> data);

  /// 1-D f64 tensor.
  static FeatureTensor vector(std::vector<double> data);

  DType dtype() const noexcept { return dtype_; }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Payload size in bytes at the declared dtype.
  std::size_t byte_size() const noexcept { return data_.size() * element_size(dtype_); }

  /// Same shape, new data, converted to `dtype`.
  FeatureTensor with_data(std::vector<double> data, DType dtype) const;
  FeatureTensor with_data(std::vector<double> data) const { return with_data(std::move(data), dtype_); }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

 private:
  DType dtype_;
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape) noexcept;

// Binary tensor format ("GSC6"):
//   magic "GSC6" | u32 version=1 | u8 dtype | u8 ndim | ndim x u32 dims | payload
// All integers and the row-major payload are little-endian.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const FeatureTensor& t);
FeatureTensor decode_tensor(std::span<const std::uint8_t> bytes);

FeatureTensor read_tensor(const std::filesystem::path& path);
void write_tensor(const FeatureTensor& t, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gensc
