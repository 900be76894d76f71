#include "evomem/positional.hpp"

#include <cmath>
#include <string>

#include "evomem/errors.hpp"

namespace evomem {

Tensor rope_apply(const Tensor& x, std::span<const std::int64_t> positions, double base) {
  if (x.rank() != 2) {
    throw ValidationError("rope_apply expects a rank-2 (L, D) tensor, got " + x.shape_str());
  }
  const std::int64_t L = x.extent(0);
  const std::int64_t D = x.extent(1);
  if (D % 2 != 0) {
    throw ValidationError("rope_apply requires an even feature dimension, got D=" +
                          std::to_string(D));
  }
  if (static_cast<std::int64_t>(positions.size()) != L) {
    throw ValidationError("rope_apply position list length " + std::to_string(positions.size()) +
                          " does not match L=" + std::to_string(L));
  }
  if (base <= 0.0) throw ValidationError("rope_apply base must be positive");

  const FormatRounder rnd{x.format()};
  Tensor out(x.shape(), x.format());
  for (std::int64_t m = 0; m < L; ++m) {
    const double pos = static_cast<double>(positions[static_cast<std::size_t>(m)]);
    for (std::int64_t t = 0; t < D / 2; ++t) {
      const double theta = std::pow(base, -2.0 * static_cast<double>(t) / static_cast<double>(D));
      const double angle = pos * theta;
      const double c = rnd(std::cos(angle));
      const double s = rnd(std::sin(angle));
      const double a = x.at(m * D + 2 * t);
      const double b = x.at(m * D + 2 * t + 1);
      out.set(m * D + 2 * t, rnd(rnd(a * c) - rnd(b * s)));
      out.set(m * D + 2 * t + 1, rnd(rnd(a * s) + rnd(b * c)));
    }
  }
  return out;
}

Tensor alibi_bias(std::int64_t heads, std::int64_t s, NumericFormat fmt) {
  if (heads < 1 || (heads & (heads - 1)) != 0) {
    throw ValidationError("alibi_bias requires a power-of-two head count, got " +
                          std::to_string(heads));
  }
  if (s < 1) throw ValidationError("alibi_bias requires s >= 1");

  Tensor bias({heads, s, s}, fmt);
  for (std::int64_t h = 0; h < heads; ++h) {
    const double slope =
        std::exp2(-8.0 * static_cast<double>(h + 1) / static_cast<double>(heads));
    for (std::int64_t i = 0; i < s; ++i) {
      // j > i stays 0; causal masking is handled separately.
      for (std::int64_t j = 0; j <= i; ++j) {
        bias.set((h * s + i) * s + j, -slope * static_cast<double>(i - j));
      }
    }
  }
  return bias;
}

}  // namespace evomem
