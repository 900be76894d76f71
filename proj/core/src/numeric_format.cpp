#include "evomem/numeric_format.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "evomem/errors.hpp"

namespace evomem {

std::string_view format_name(NumericFormat f) {
  switch (f) {
    case NumericFormat::F64:
      return "f64";
    case NumericFormat::F32:
      return "f32";
    case NumericFormat::BF16:
      return "bf16";
    case NumericFormat::F16:
      return "f16";
  }
  return "f64";
}

NumericFormat format_from_name(std::string_view name) {
  if (name == "f64") return NumericFormat::F64;
  if (name == "f32") return NumericFormat::F32;
  if (name == "bf16") return NumericFormat::BF16;
  if (name == "f16") return NumericFormat::F16;
  throw ValidationError("unknown numeric format '" + std::string(name) +
                        "' (expected f64|f32|bf16|f16)");
}

double max_finite_value(NumericFormat f) {
  const FormatSpec s = format_spec(f);
  const int bias = (1 << (s.exponent_bits - 1)) - 1;
  return (2.0 - std::ldexp(1.0, -s.mantissa_bits)) * std::ldexp(1.0, bias);
}

namespace detail {

double round_emulated(double x, int mantissa_bits, int exponent_bits, bool* overflow) {
  if (x == 0.0 || !std::isfinite(x)) return x;

  const int bias = (1 << (exponent_bits - 1)) - 1;
  const int min_normal_exp = 1 - bias;

  int bin_exp = 0;
  std::frexp(x, &bin_exp);             // |x| = f * 2^bin_exp, f in [0.5, 1)
  const int unbiased = bin_exp - 1;    // |x| = s * 2^unbiased, s in [1, 2)

  // Exponent of the quantum: normals keep mantissa_bits fraction bits,
  // subnormals share the fixed quantum of the smallest normal exponent.
  const int lsb_exp = std::max(unbiased, min_normal_exp) - mantissa_bits;

  // |scaled| < 2^(mantissa_bits + 1), so the round is exact in double.
  const double scaled = std::ldexp(x, -lsb_exp);
  const double lower = std::floor(scaled);
  const double frac = scaled - lower;
  double rounded_int;
  if (frac > 0.5) {
    rounded_int = lower + 1.0;
  } else if (frac < 0.5) {
    rounded_int = lower;
  } else {
    rounded_int = (std::fmod(lower, 2.0) == 0.0) ? lower : lower + 1.0;
  }
  const double result = std::ldexp(rounded_int, lsb_exp);

  const double max_finite =
      (2.0 - std::ldexp(1.0, -mantissa_bits)) * std::ldexp(1.0, bias);
  if (std::abs(result) > max_finite) {
    if (overflow != nullptr) *overflow = true;
    return x > 0.0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  }
  return result;
}

}  // namespace detail

RoundedValue round_to_format_checked(double x, NumericFormat f) {
  if (!std::isfinite(x)) return {x, false};
  switch (f) {
    case NumericFormat::F64:
      return {x, false};
    case NumericFormat::F32: {
      const double v = static_cast<double>(static_cast<float>(x));
      return {v, std::isinf(v)};
    }
    default: {
      const FormatSpec s = format_spec(f);
      bool overflow = false;
      const double v = detail::round_emulated(x, s.mantissa_bits, s.exponent_bits, &overflow);
      return {v, overflow};
    }
  }
}

}  // namespace evomem
