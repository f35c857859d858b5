#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gensc {

/// Error classes surfaced by every module. Each failure mode named in a
/// module contract maps to exactly one value.
enum class Errc {
  bad_magic,
  bad_version,
  truncated,
  trailing_bytes,
  unknown_dtype,
  non_finite,
  io,
  schema,
  dangling_path,
  duplicate_id,
  invalid_argument,
  empty_input,
  out_of_range,
  corrupt_table,
  shape_mismatch,
  zero_power,
  capacity,
  mode_mismatch,
  config_invalid,
  conflict,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gensc
