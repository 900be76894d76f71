#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace evomem {

// Analytic memory planner for very-long-sequence transformer training.
// Quantities are modelled bytes (real-valued; reports round to whole bytes).

struct ModelConfig {
  std::int64_t params = 1;     // total parameter count
  std::int64_t n_layer = 1;
  std::int64_t hidden = 1;     // hidden dimension d
  std::int64_t n_head = 1;
  double act_multiplier = 1.0; // dimensionless constant in the activation term
  std::string name;

  void validate() const;
};

struct ParallelConfig {
  std::int64_t tp = 1;  // tensor-parallel degree
  std::int64_t pp = 1;  // pipeline degree
  std::int64_t dp = 1;  // data-parallel degree
  bool sp_enabled = false;        // sequence parallelism over the TP group
  bool posemb_partitioned = false;  // requires sp_enabled
  bool flash_attention = false;
  int zero_stage = 0;  // 0..3
  bool offload = false;  // optimizer state to host
  std::int64_t batch = 1;  // micro-batch size

  std::int64_t total_devices() const { return tp * pp * dp; }
  void validate() const;
};

struct HardwareConfig {
  double gpu_mem_bytes = 0.0;       // per-device capacity
  std::int64_t num_gpus = 1;
  std::int64_t mask_threshold = 16384;  // sequence length above which the mask is CPU-staged
  double reserve_frac = 0.10;           // capacity held back

  double usable_bytes() const { return gpu_mem_bytes * (1.0 - reserve_frac); }
  void validate() const;
};

// Attention-mask placement. At or below the hardware threshold the mask is
// generated directly on the GPU, which transiently holds twice the tensor
// (generation pre-allocates 2x); above it the mask is built in host memory
// and only the final tensor is device resident.
enum class MaskPlacement { GpuDirect, CpuStaged };

struct MaskPlan {
  MaskPlacement placement = MaskPlacement::GpuDirect;
  double device_bytes = 0.0;
  double host_bytes = 0.0;
};

MaskPlan mask_plan(std::int64_t s, const HardwareConfig& hw, std::int64_t mask_bytes_per_elem = 4);

// Per-device bytes of the learned position-embedding state: copies * s * d *
// bytes replicated on every device, or that divided by the tensor-parallel
// group size when the weights are partitioned ([s/p, d] per device; requires
// sequence parallelism). The default three copies are weights, gradients and
// optimizer state.
double posemb_plan(std::int64_t s, std::int64_t hidden, const ParallelConfig& pc,
                   std::int64_t bytes_per_elem = 4, std::int64_t copies = 3);

struct PlannerOptions {
  std::int64_t score_bytes = 2;      // activation / attention-map element size
  std::int64_t mask_bytes = 4;       // mask element size
  std::int64_t posemb_bytes = 4;     // position-embedding element size
  std::int64_t posemb_copies = 3;
};

struct MemoryBreakdown {
  double model_state_bytes = 0.0;  // device-resident weights/grads/optimizer
  double activation_bytes = 0.0;
  double mask_device_bytes = 0.0;
  double mask_host_bytes = 0.0;   // host side of a CPU-staged mask
  double posemb_bytes = 0.0;
  double attn_map_bytes = 0.0;
  bool fits = false;

  double device_total() const {
    return model_state_bytes + activation_bytes + mask_device_bytes + posemb_bytes +
           attn_map_bytes;
  }
  // Name of the largest device-resident term.
  std::string_view largest_term() const;
};

// Per-device byte decomposition at sequence length s.
//
//   activation: act_multiplier * s * n_layer * hidden * batch * score_bytes,
//     divided by tp*pp; without sequence parallelism the non-tensor-parallel
//     regions are replicated across the TP group, modelled as a 2x penalty.
//   attention map: (n_head/tp) * s^2 * score_bytes, zero under flash
//     attention. The mask is likewise only materialized when flash attention
//     is off (a fused causal kernel never builds it).
//   model state: params * (2 + 2 + 12) bytes mixed-precision convention over
//     tp*pp, with ZeRO stages partitioning optimizer (>=1), gradients (>=2)
//     and parameters (>=3) over dp; offload moves optimizer bytes to host
//     (host capacity is not budgeted).
MemoryBreakdown memory_breakdown(const ModelConfig& mc, const ParallelConfig& pc,
                                 const HardwareConfig& hw, std::int64_t s,
                                 const PlannerOptions& opt = {});

struct PlanResult {
  std::int64_t max_seq = 0;          // largest fitting sequence length (0 if none)
  MemoryBreakdown breakdown_at_max;  // at max_seq, or at s=1 when max_seq == 0
  std::string limiting_term;         // largest term at the first failing length
};

// Search cap for max_seq.
inline constexpr std::int64_t kMaxSeqSearchCap = std::int64_t{1} << 24;

// Largest s in [1, 2^24] whose breakdown fits. Every term is non-decreasing
// in s except the mask, whose device bytes drop from 2*s^2*b to s^2*b when s
// crosses the staging threshold; the search therefore binary-searches the
// two monotone regions on either side of the threshold.
PlanResult max_seq(const ModelConfig& mc, const ParallelConfig& pc, const HardwareConfig& hw,
                   const PlannerOptions& opt = {});

// Shipped model profiles. The public GenSLM material does not pin layer
// counts or hidden sizes, so these carry documented placeholder values; use
// them for ratio and property studies, not absolute-GB claims.
ModelConfig genslm_25b();
ModelConfig genslm_33b();
ModelConfig model_profile(std::string_view name);  // throws ValidationError

HardwareConfig a100_40g(std::int64_t num_gpus);

// Framework profiles for sweeps: a device grid (tp up to 8, then pp up to 8,
// remainder dp) plus the feature set of the modelled framework.
//   "baseline":  every long-sequence optimization off; masks always
//                generated directly on the GPU.
//   "optimized": sequence parallelism, partitioned position embeddings,
//                flash attention, ZeRO stage 1 when dp > 1.
struct PlanProfile {
  std::string name;
  ParallelConfig parallel;
  std::optional<std::int64_t> mask_threshold_override;
};

PlanProfile plan_profile(std::string_view name, std::int64_t num_gpus);

}  // namespace evomem
