#pragma once

#include <cstdint>

#include "evomem/attention.hpp"
#include "evomem/ledger.hpp"
#include "evomem/tensor.hpp"

namespace evomem {

// Tile extents for the fused attention path: (query, key, batch). The batch
// extent groups rows into one work unit; rows inside a unit are processed
// sequentially through the same tile buffers, so it does not change the
// transient footprint.
struct TileConfig {
  std::int64_t tile_q = 64;
  std::int64_t tile_k = 64;
  std::int64_t tile_b = 1;

  void validate() const;  // all extents >= 1
};

// Per-row softmax statistic saved instead of the probability tensor:
// logsumexp[h,b,i] = max_j S[h,b,i,j] + ln sum_j exp(S[h,b,i,j] - max_j S).
// Backward recomputes P tile-by-tile as exp(S_tile - logsumexp). Stored
// F32-or-wider.
struct RowStats {
  Tensor logsumexp;  // (H, B, L)
};

// How the bias gradient is reduced over the broadcast batch axis.
//   UpcastF32 (default): every contribution is added in F32-or-wider; the
//     emulated low-precision grid never touches the running sum.
//   NativeFormat: the accumulator re-rounds to the problem format after each
//     addition, exposing the round-off stall of low-precision accumulation.
// deterministic=true fixes the reduction order to ascending batch index and
// makes results bit-reproducible run to run; deterministic=false reduces in
// descending batch order, standing in for unordered atomic accumulation.
enum class AccumMode { UpcastF32, NativeFormat };

struct AccumPolicy {
  AccumMode mode = AccumMode::UpcastF32;
  bool deterministic = true;
};

// The scalar accumulator implementing AccumPolicy; the bias-gradient
// reduction in attn_backward_tiled has exactly these semantics, and the
// precision demo drives it directly with synthetic contributions.
class PolicyAccumulator {
 public:
  PolicyAccumulator(AccumPolicy policy, NumericFormat problem_format)
      : accum_format_(policy.mode == AccumMode::UpcastF32 ? widened_to_f32(problem_format)
                                                          : problem_format) {}

  void add(double contribution) {
    total_ = round_to_format(total_ + contribution, accum_format_);
  }

  double value() const { return total_; }
  NumericFormat accum_format() const { return accum_format_; }

 private:
  NumericFormat accum_format_;
  double total_ = 0.0;
};

// The (tile_q, tile_k) window of the shared bias at head `head` and tile
// origin (q_origin, k_origin). Independent of the batch index: the same tile
// serves every batch row. Edge tiles are clipped to the tensor boundary.
Tensor broadcast_bias_tile(const Tensor& bias, std::int64_t head, std::int64_t q_origin,
                           std::int64_t k_origin, const TileConfig& tc);

struct TiledForwardResult {
  Tensor output;   // (B, L, H, D), matches attn_forward_ref
  RowStats stats;  // saved for backward recomputation
};

// Online-softmax tiled forward. Never materializes any (H, B, L, L) array:
// each work unit (head x batch tile x query tile) owns one logits tile
// (tile_q x tile_k), one output accumulator (tile_q x D) and running max /
// denominator vectors (tile_q each), all recorded under the ledger scope
// "tiled/work". The bias is broadcast on the fly by indexing the shared
// (H, L, L) tensor directly; no per-batch copy exists. Row statistics are
// recorded as "tiled/stats".
TiledForwardResult attn_forward_tiled(const AttentionProblem& p, const TileConfig& tc,
                                      AllocationLedger& ledger);

// Backward by recomputation: steps 1-3 rerun per tile from the saved
// logsumexp, the softmax row term enters through delta[b,i,h] =
// sum_d dO[b,i,h,d]*O[b,i,h,d] ("tiled/delta"), and each work unit reuses a
// single (tile_q x tile_k) scratch tile ("tiled/work"). dQ/dK/dV accumulate
// in ascending index order; the bias gradient reduces over the batch axis
// under `policy`.
AttentionGrads attn_backward_tiled(const AttentionProblem& p, const Tensor& output,
                                   const RowStats& stats, const Tensor& grad_output,
                                   const TileConfig& tc, const AccumPolicy& policy,
                                   AllocationLedger& ledger);

}  // namespace evomem
