#pragma once

#include <cstdint>

#include "evomem/attention.hpp"
#include "evomem/attention_tiled.hpp"

namespace evomem {

// Dimensions of one attention execution for analytic accounting. Bytes are
// per element of the stored precision (2 for half formats, 4 for F32, ...).
struct AttentionDims {
  std::int64_t heads = 1;
  std::int64_t batch = 1;          // axis not attended over
  std::int64_t seq = 1;            // attended axis
  std::int64_t head_dim = 1;
  std::int64_t bytes_per_elem = 4;

  static AttentionDims of_problem(const AttentionProblem& p);
};

enum class AttentionMode { Naive, Tiled };
enum class AttentionPhase { Forward, Backward };

// Closed-form byte model of the attention-internal working set.
//
// Naive:   forward keeps the logits tensor S plus the saved probabilities P,
//          H*B*L^2*bytes each; backward adds one dS scratch of the same size.
// Tiled:   forward keeps, per concurrently active work unit, one logits tile
//          plus the output accumulator plus running max/denominator rows
//          (tile_q*tile_k + tile_q*D + 2*tile_q elements), and the (H, B, L)
//          row statistics; backward reuses the same transient bound and adds
//          the (B, L, H) delta term. Sub-F32 formats widen the stored
//          statistics in the implementation; the model keeps the uniform
//          bytes_per_elem of the contract.
//
// Q/K/V/O/dO are excluded and reported separately as baseline_io_bytes =
// 4*B*L*H*D*bytes so breakdowns keep the I/O-versus-intermediates structure.
struct AttentionMemoryModel {
  std::int64_t logits_bytes = 0;       // naive S
  std::int64_t saved_probs_bytes = 0;  // naive P
  std::int64_t grad_logits_bytes = 0;  // naive dS (backward)
  std::int64_t transient_bytes = 0;    // tiled per-unit tiles * workers
  std::int64_t stats_bytes = 0;        // tiled logsumexp
  std::int64_t delta_bytes = 0;        // tiled dO.O row term (backward)
  std::int64_t baseline_io_bytes = 0;  // Q/K/V/O class, excluded from total
  std::int64_t total_bytes = 0;        // mode/phase-relevant sum
};

// tc is required for tiled mode; workers models concurrently active work
// units (1 for sequential measurement runs). Throws ValidationError on
// non-positive extents.
AttentionMemoryModel analytic_attention_bytes(const AttentionDims& dims, AttentionMode mode,
                                              AttentionPhase phase, const TileConfig* tc = nullptr,
                                              std::int64_t workers = 1);

}  // namespace evomem
