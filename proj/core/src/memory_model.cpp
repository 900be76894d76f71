#include "evomem/memory_model.hpp"

#include <string>

#include "evomem/errors.hpp"

namespace evomem {

AttentionDims AttentionDims::of_problem(const AttentionProblem& p) {
  return AttentionDims{p.heads(), p.batch(), p.seq(), p.head_dim(),
                       format_bytes(p.format())};
}

AttentionMemoryModel analytic_attention_bytes(const AttentionDims& dims, AttentionMode mode,
                                              AttentionPhase phase, const TileConfig* tc,
                                              std::int64_t workers) {
  if (dims.heads < 1 || dims.batch < 1 || dims.seq < 1 || dims.head_dim < 1 ||
      dims.bytes_per_elem < 1) {
    throw ValidationError("attention dims must be positive");
  }
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (mode == AttentionMode::Tiled) {
    if (tc == nullptr) throw ValidationError("tiled mode requires a tile config");
    tc->validate();
  }

  const std::int64_t H = dims.heads, B = dims.batch, L = dims.seq, D = dims.head_dim;
  const std::int64_t bytes = dims.bytes_per_elem;
  const std::int64_t logits_elems = H * B * L * L;

  AttentionMemoryModel m;
  m.baseline_io_bytes = 4 * B * L * H * D * bytes;

  if (mode == AttentionMode::Naive) {
    m.logits_bytes = logits_elems * bytes;
    m.saved_probs_bytes = logits_elems * bytes;
    if (phase == AttentionPhase::Backward) {
      m.grad_logits_bytes = logits_elems * bytes;
    }
    m.total_bytes = m.logits_bytes + m.saved_probs_bytes + m.grad_logits_bytes;
  } else {
    m.transient_bytes =
        workers * (tc->tile_q * tc->tile_k + tc->tile_q * D + 2 * tc->tile_q) * bytes;
    m.stats_bytes = H * B * L * bytes;
    if (phase == AttentionPhase::Backward) {
      m.delta_bytes = B * L * H * bytes;
    }
    m.total_bytes = m.transient_bytes + m.stats_bytes + m.delta_bytes;
  }
  return m;
}

}  // namespace evomem
