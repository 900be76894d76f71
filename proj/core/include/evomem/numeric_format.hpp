#pragma once

#include <cstdint>
#include <string_view>

namespace evomem {

// Storage precisions understood by the tensor layer. F64 and F32 map onto the
// native IEEE types. BF16 and F16 are software-emulated grids: values live in
// a wide host real and are re-rounded (round-to-nearest, ties-to-even) after
// every primitive arithmetic result.
enum class NumericFormat { F64, F32, BF16, F16 };

struct FormatSpec {
  int mantissa_bits;  // explicit fraction bits
  int exponent_bits;
  int storage_bytes;  // bytes per element in the emulated layout
};

constexpr FormatSpec format_spec(NumericFormat f) {
  switch (f) {
    case NumericFormat::F64:
      return {52, 11, 8};
    case NumericFormat::F32:
      return {23, 8, 4};
    case NumericFormat::BF16:
      return {7, 8, 2};
    case NumericFormat::F16:
      return {10, 5, 2};
  }
  return {52, 11, 8};
}

constexpr int format_bytes(NumericFormat f) { return format_spec(f).storage_bytes; }

std::string_view format_name(NumericFormat f);
NumericFormat format_from_name(std::string_view name);  // throws ValidationError

// Largest finite value representable in the format.
double max_finite_value(NumericFormat f);

// The wider of `f` and F32. Gradient upcasting and saved row statistics use
// this: sub-F32 formats are widened, F32/F64 pass through.
constexpr NumericFormat widened_to_f32(NumericFormat f) {
  return f == NumericFormat::F64 ? NumericFormat::F64 : NumericFormat::F32;
}

struct RoundedValue {
  double value;
  bool overflow;  // finite input exceeded the format's largest finite value
};

namespace detail {
double round_emulated(double x, int mantissa_bits, int exponent_bits, bool* overflow);
}

// Round-to-nearest, ties-to-even onto the format grid. Idempotent. A finite
// value beyond the format's range saturates to signed infinity; use
// round_to_format_checked to observe the overflow flag.
inline double round_to_format(double x, NumericFormat f) {
  switch (f) {
    case NumericFormat::F64:
      return x;
    case NumericFormat::F32:
      return static_cast<double>(static_cast<float>(x));
    default: {
      const FormatSpec s = format_spec(f);
      return detail::round_emulated(x, s.mantissa_bits, s.exponent_bits, nullptr);
    }
  }
}

RoundedValue round_to_format_checked(double x, NumericFormat f);

// Per-op rounding functor for kernels emulating format arithmetic.
struct FormatRounder {
  NumericFormat fmt;
  double operator()(double x) const { return round_to_format(x, fmt); }
};

}  // namespace evomem
