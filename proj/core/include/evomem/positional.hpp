#pragma once

#include <cstdint>
#include <span>

#include "evomem/tensor.hpp"

namespace evomem {

// Rotary position embedding: feature pairs (2t, 2t+1) of row m are rotated by
// angle positions[m] * theta_t with theta_t = base^(-2t/D). Position 0 is the
// identity and per-pair norms are preserved; the dot product of two rotated
// vectors depends on their positions only through the offset.
// Throws ValidationError for odd D or a position list of the wrong length.
Tensor rope_apply(const Tensor& x, std::span<const std::int64_t> positions, double base = 10000.0);

// Linear-bias attention table for H heads (H a power of two): bias[h,i,j] =
// -slope_h * (i - j) for j <= i and 0 above the diagonal (causal masking is
// handled separately), with slope_h = 2^(-8(h+1)/H). Generation at a longer s
// extends the table without changing existing entries, which is the length
// extrapolation property.
Tensor alibi_bias(std::int64_t heads, std::int64_t s, NumericFormat fmt = NumericFormat::F64);

}  // namespace evomem
