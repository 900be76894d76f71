#include "evomem/seqplan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "evomem/errors.hpp"

namespace evomem {

void ModelConfig::validate() const {
  if (params < 1 || n_layer < 1 || hidden < 1 || n_head < 1) {
    throw ValidationError("model counts must be positive");
  }
  if (!(act_multiplier > 0.0)) {
    throw ValidationError("act_multiplier must be > 0");
  }
}

void ParallelConfig::validate() const {
  if (tp < 1 || pp < 1 || dp < 1) {
    throw ValidationError("parallel degrees must be >= 1");
  }
  if (zero_stage < 0 || zero_stage > 3) {
    throw ValidationError("zero_stage must be in [0, 3]");
  }
  if (batch < 1) throw ValidationError("batch must be >= 1");
  if (posemb_partitioned && !sp_enabled) {
    throw ValidationError(
        "posemb_partitioned requires sp_enabled (weights split over the sequence-parallel group)");
  }
}

void HardwareConfig::validate() const {
  if (!(gpu_mem_bytes > 0.0)) throw ValidationError("gpu_mem_bytes must be positive");
  if (num_gpus < 1) throw ValidationError("num_gpus must be >= 1");
  if (mask_threshold < 1) throw ValidationError("mask_threshold must be >= 1");
  if (reserve_frac < 0.0 || reserve_frac >= 1.0) {
    throw ValidationError("reserve_frac must be in [0, 1)");
  }
}

MaskPlan mask_plan(std::int64_t s, const HardwareConfig& hw, std::int64_t mask_bytes_per_elem) {
  if (s < 1) throw ValidationError("sequence length must be >= 1");
  if (mask_bytes_per_elem < 1) throw ValidationError("mask element size must be >= 1");
  hw.validate();

  const double tensor_bytes = static_cast<double>(s) * static_cast<double>(s) *
                              static_cast<double>(mask_bytes_per_elem);
  MaskPlan plan;
  if (s <= hw.mask_threshold) {
    // Direct generation on the GPU transiently pre-allocates 2x the tensor.
    plan.placement = MaskPlacement::GpuDirect;
    plan.device_bytes = 2.0 * tensor_bytes;
    plan.host_bytes = 0.0;
  } else {
    plan.placement = MaskPlacement::CpuStaged;
    plan.device_bytes = tensor_bytes;
    plan.host_bytes = tensor_bytes;
  }
  return plan;
}

double posemb_plan(std::int64_t s, std::int64_t hidden, const ParallelConfig& pc,
                   std::int64_t bytes_per_elem, std::int64_t copies) {
  if (s < 1 || hidden < 1) throw ValidationError("posemb_plan requires s, d >= 1");
  if (bytes_per_elem < 1 || copies < 1) {
    throw ValidationError("posemb_plan element size and copies must be >= 1");
  }
  pc.validate();

  const double base = static_cast<double>(copies) * static_cast<double>(s) *
                      static_cast<double>(hidden) * static_cast<double>(bytes_per_elem);
  if (pc.posemb_partitioned) {
    // [s/p, d] partial weights per device, p the sequence-parallel group size.
    return base / static_cast<double>(pc.tp);
  }
  return base;  // each device holds a replica
}

std::string_view MemoryBreakdown::largest_term() const {
  const std::array<std::pair<std::string_view, double>, 5> terms{{
      {"model_state", model_state_bytes},
      {"activation", activation_bytes},
      {"mask", mask_device_bytes},
      {"posemb", posemb_bytes},
      {"attn_map", attn_map_bytes},
  }};
  std::string_view best = terms[0].first;
  double best_bytes = terms[0].second;
  for (const auto& [name, bytes] : terms) {
    if (bytes > best_bytes) {
      best = name;
      best_bytes = bytes;
    }
  }
  return best;
}

MemoryBreakdown memory_breakdown(const ModelConfig& mc, const ParallelConfig& pc,
                                 const HardwareConfig& hw, std::int64_t s,
                                 const PlannerOptions& opt) {
  mc.validate();
  pc.validate();
  hw.validate();
  if (s < 1) throw ValidationError("sequence length must be >= 1");
  if (opt.score_bytes < 1 || opt.mask_bytes < 1 || opt.posemb_bytes < 1 || opt.posemb_copies < 1) {
    throw ValidationError("planner byte sizes and copies must be >= 1");
  }
  if (pc.total_devices() != hw.num_gpus) {
    throw ValidationError("tp*pp*dp = " + std::to_string(pc.total_devices()) +
                          " does not match num_gpus = " + std::to_string(hw.num_gpus));
  }

  MemoryBreakdown b;
  const double model_parallel = static_cast<double>(pc.tp) * static_cast<double>(pc.pp);

  // Model state: (2 + 2 + 12) bytes/param mixed-precision convention, ZeRO
  // stages partitioning optimizer / gradients / parameters over dp. Offload
  // moves the optimizer bytes to host memory, which is not budgeted here.
  double weight_bytes = 2.0 * static_cast<double>(mc.params) / model_parallel;
  double grad_bytes = 2.0 * static_cast<double>(mc.params) / model_parallel;
  double opt_bytes = 12.0 * static_cast<double>(mc.params) / model_parallel;
  if (pc.zero_stage >= 1) opt_bytes /= static_cast<double>(pc.dp);
  if (pc.zero_stage >= 2) grad_bytes /= static_cast<double>(pc.dp);
  if (pc.zero_stage >= 3) weight_bytes /= static_cast<double>(pc.dp);
  if (pc.offload) opt_bytes = 0.0;
  b.model_state_bytes = weight_bytes + grad_bytes + opt_bytes;

  // Activations: partitioned across tp*pp; without sequence parallelism the
  // non-tensor-parallel regions are replicated over the TP group (2x).
  b.activation_bytes = mc.act_multiplier * static_cast<double>(s) *
                       static_cast<double>(mc.n_layer) * static_cast<double>(mc.hidden) *
                       static_cast<double>(pc.batch) * static_cast<double>(opt.score_bytes) /
                       model_parallel * (pc.sp_enabled ? 1.0 : 2.0);

  // Attention map and mask exist only without a fused flash kernel.
  if (pc.flash_attention) {
    b.attn_map_bytes = 0.0;
    b.mask_device_bytes = 0.0;
    b.mask_host_bytes = 0.0;
  } else {
    b.attn_map_bytes = static_cast<double>(mc.n_head) / static_cast<double>(pc.tp) *
                       static_cast<double>(s) * static_cast<double>(s) *
                       static_cast<double>(opt.score_bytes);
    const MaskPlan mask = mask_plan(s, hw, opt.mask_bytes);
    b.mask_device_bytes = mask.device_bytes;
    b.mask_host_bytes = mask.host_bytes;
  }

  b.posemb_bytes = posemb_plan(s, mc.hidden, pc, opt.posemb_bytes, opt.posemb_copies);

  b.fits = b.device_total() <= hw.usable_bytes();
  return b;
}

namespace {

// Largest fitting s in [lo, hi] given fits(lo); fits is monotone on the range.
template <typename Fits>
std::int64_t largest_fitting(std::int64_t lo, std::int64_t hi, const Fits& fits) {
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo + 1) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

}  // namespace

PlanResult max_seq(const ModelConfig& mc, const ParallelConfig& pc, const HardwareConfig& hw,
                   const PlannerOptions& opt) {
  const auto fits = [&](std::int64_t s) { return memory_breakdown(mc, pc, hw, s, opt).fits; };

  // Every term is non-decreasing in s except the mask's threshold drop
  // (GpuDirect 2*s^2*b gives way to CpuStaged s^2*b), so fits is monotone on
  // each side of the threshold and the regions are searched separately; any
  // fit above the threshold beats every fit below it.
  const std::int64_t cap = kMaxSeqSearchCap;
  const std::int64_t boundary = std::min(hw.mask_threshold, cap);

  std::int64_t best = 0;
  if (boundary < cap && fits(boundary + 1)) {
    best = largest_fitting(boundary + 1, cap, fits);
  } else if (fits(1)) {
    best = largest_fitting(1, boundary, fits);
  }

  PlanResult result;
  result.max_seq = best;
  result.breakdown_at_max = memory_breakdown(mc, pc, hw, best > 0 ? best : 1, opt);
  const std::int64_t failing = best < cap ? best + 1 : cap;
  result.limiting_term = std::string(memory_breakdown(mc, pc, hw, failing, opt).largest_term());
  return result;
}

ModelConfig genslm_25b() {
  // Placeholder architecture: the public GenSLM material does not pin layer
  // count or hidden size for the 25B configuration. 56 x 6144 with 48 heads
  // lands at ~26B parameters under the usual 12*l*d^2 estimate.
  ModelConfig mc;
  mc.params = 25'000'000'000;
  mc.n_layer = 56;
  mc.hidden = 6144;
  mc.n_head = 48;
  mc.act_multiplier = 1.0;
  mc.name = "genslm-25b";
  return mc;
}

ModelConfig genslm_33b() {
  ModelConfig mc;
  mc.params = 33'000'000'000;
  mc.n_layer = 62;
  mc.hidden = 6656;
  mc.n_head = 52;
  mc.act_multiplier = 1.0;
  mc.name = "genslm-33b";
  return mc;
}

ModelConfig model_profile(std::string_view name) {
  if (name == "genslm-25b") return genslm_25b();
  if (name == "genslm-33b") return genslm_33b();
  throw ValidationError("unknown model profile '" + std::string(name) +
                        "' (expected genslm-25b|genslm-33b)");
}

HardwareConfig a100_40g(std::int64_t num_gpus) {
  HardwareConfig hw;
  hw.gpu_mem_bytes = 40e9;
  hw.num_gpus = num_gpus;
  hw.mask_threshold = 16384;
  hw.reserve_frac = 0.10;
  return hw;
}

namespace {

// Device grid: the largest divisor of n up to 8 goes to tensor parallelism,
// likewise for pipeline, remainder to data parallelism.
std::int64_t largest_divisor_up_to(std::int64_t n, std::int64_t cap) {
  for (std::int64_t d = std::min(n, cap); d >= 1; --d) {
    if (n % d == 0) return d;
  }
  return 1;
}

}  // namespace

PlanProfile plan_profile(std::string_view name, std::int64_t num_gpus) {
  if (num_gpus < 1) throw ValidationError("num_gpus must be >= 1");
  ParallelConfig pc;
  pc.tp = largest_divisor_up_to(num_gpus, 8);
  pc.pp = largest_divisor_up_to(num_gpus / pc.tp, 8);
  pc.dp = num_gpus / (pc.tp * pc.pp);

  PlanProfile profile;
  profile.parallel = pc;
  if (name == "baseline") {
    profile.name = "baseline";
    // No staging path in the modelled legacy framework: masks always
    // generate directly on the GPU.
    profile.mask_threshold_override = kMaxSeqSearchCap;
    return profile;
  }
  if (name == "optimized") {
    profile.name = "optimized";
    profile.parallel.sp_enabled = true;
    profile.parallel.posemb_partitioned = true;
    profile.parallel.flash_attention = true;
    profile.parallel.zero_stage = pc.dp > 1 ? 1 : 0;
    return profile;
  }
  throw ValidationError("unknown framework profile '" + std::string(name) +
                        "' (expected baseline|optimized)");
}

}  // namespace evomem
