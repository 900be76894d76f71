#include "evomem/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "evomem/attention.hpp"
#include "evomem/attention_tiled.hpp"
#include "evomem/errors.hpp"
#include "evomem/memory_model.hpp"
#include "evomem/report.hpp"
#include "evomem/rng.hpp"
#include "evomem/seqplan.hpp"

namespace evomem {

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!config.is_object()) throw ValidationError("config root must be a JSON object");
  return config;
}

// Unknown keys are rejected so typos cannot silently fall back to defaults.
void check_keys(const json& obj, const std::string& context,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ValidationError("unknown key '" + key + "' in " + context);
    }
  }
}

std::int64_t get_int(const json& obj, const char* key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) {
    throw ValidationError(std::string("key '") + key + "' must be an integer");
  }
  return obj[key].get<std::int64_t>();
}

double get_real(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw ValidationError(std::string("key '") + key + "' must be a number");
  }
  return obj[key].get<double>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) {
    throw ValidationError(std::string("key '") + key + "' must be a boolean");
  }
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) {
    throw ValidationError(std::string("key '") + key + "' must be a string");
  }
  return obj[key].get<std::string>();
}

// Evaluates `make_row` for every index, optionally concurrently; rows land in
// index order, which is the deterministic report order.
std::vector<std::vector<std::string>> build_rows(
    std::size_t count, bool parallel,
    const std::function<std::vector<std::vector<std::string>>(std::size_t)>& make_rows) {
  std::vector<std::vector<std::vector<std::string>>> chunks(count);
  if (parallel && count > 1) {
    std::vector<std::future<std::vector<std::vector<std::string>>>> futures;
    futures.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      futures.push_back(std::async(std::launch::async, make_rows, i));
    }
    for (std::size_t i = 0; i < count; ++i) chunks[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < count; ++i) chunks[i] = make_rows(i);
  }
  std::vector<std::vector<std::string>> rows;
  for (auto& chunk : chunks) {
    for (auto& row : chunk) rows.push_back(std::move(row));
  }
  return rows;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.at(i) - b.at(i)));
  }
  return worst;
}

double format_tolerance(NumericFormat fmt) {
  switch (fmt) {
    case NumericFormat::F64:
      return 1e-10;
    case NumericFormat::F32:
      return 1e-5;
    default:
      return 5e-2;  // loose bound for the emulated half formats
  }
}

// ---------------------------------------------------------------------------
// attn-bench

struct BenchCase {
  AttentionVariant variant = AttentionVariant::MsaRowWise;
  std::int64_t B = 4, L = 128, H = 2, D = 8;
  NumericFormat fmt = NumericFormat::F32;
  TileConfig tc;
};

std::vector<BenchCase> default_bench_cases() {
  std::vector<BenchCase> cases;
  const AttentionVariant variants[] = {
      AttentionVariant::MsaRowWise, AttentionVariant::MsaColumnWise,
      AttentionVariant::TriangularStartNode, AttentionVariant::TriangularEndNode};
  for (AttentionVariant v : variants) {
    BenchCase c;
    c.variant = v;
    // 130 exercises edge-clipped tiles; triangular variants need B == L.
    const bool tri = v == AttentionVariant::TriangularStartNode ||
                     v == AttentionVariant::TriangularEndNode;
    c.L = 130;
    c.B = tri ? c.L : 4;
    cases.push_back(c);
  }
  BenchCase f64_case;
  f64_case.fmt = NumericFormat::F64;
  f64_case.L = 96;
  cases.push_back(f64_case);
  return cases;
}

BenchCase parse_bench_case(const json& obj, std::size_t index) {
  const std::string context = "cases[" + std::to_string(index) + "]";
  check_keys(obj, context,
             {"variant", "B", "L", "H", "D", "format", "tile_q", "tile_k", "tile_b"});
  BenchCase c;
  c.variant = variant_from_name(get_string(obj, "variant", "msa_row"));
  c.L = get_int(obj, "L", 128);
  const bool tri = c.variant == AttentionVariant::TriangularStartNode ||
                   c.variant == AttentionVariant::TriangularEndNode;
  c.B = get_int(obj, "B", tri ? c.L : 4);
  c.H = get_int(obj, "H", 2);
  c.D = get_int(obj, "D", 8);
  c.fmt = format_from_name(get_string(obj, "format", "f32"));
  c.tc.tile_q = get_int(obj, "tile_q", 64);
  c.tc.tile_k = get_int(obj, "tile_k", 64);
  c.tc.tile_b = get_int(obj, "tile_b", 1);
  return c;
}

AttentionProblem random_problem(const BenchCase& c, std::uint64_t seed, std::uint64_t stream) {
  SeededRng rng = derived_rng(seed, stream);
  Tensor q = random_uniform({c.B, c.L, c.H, c.D}, c.fmt, rng);
  Tensor k = random_uniform({c.B, c.L, c.H, c.D}, c.fmt, rng);
  Tensor v = random_uniform({c.B, c.L, c.H, c.D}, c.fmt, rng);
  std::optional<Tensor> bias;
  if (variant_has_bias(c.variant)) {
    bias = random_uniform({c.H, c.L, c.L}, c.fmt, rng);
  }
  return AttentionProblem::make(c.variant, std::move(q), std::move(k), std::move(v),
                                std::move(bias));
}

std::vector<std::string> bench_row(const BenchCase& c, std::uint64_t seed, std::uint64_t stream,
                                   bool* failed) {
  AttentionProblem p = random_problem(c, seed, stream);
  SeededRng rng = derived_rng(seed, stream + (1u << 20));
  Tensor grad_out = random_uniform({c.B, c.L, c.H, c.D}, c.fmt, rng);

  AllocationLedger naive_ledger;
  AttentionGrads ref_grads;
  Tensor ref_output;
  {
    ForwardResult fwd = attn_forward_ref(p, &naive_ledger);
    ref_grads = attn_backward_ref(p, fwd.probs, grad_out, &naive_ledger);
    ref_output = std::move(fwd.output);
    naive_ledger.record_free("naive/S", fwd.logits.emulated_bytes());
    naive_ledger.record_free("naive/P", fwd.probs.emulated_bytes());
  }

  AllocationLedger tiled_ledger;
  TiledForwardResult fwd = attn_forward_tiled(p, c.tc, tiled_ledger);
  AttentionGrads tiled_grads =
      attn_backward_tiled(p, fwd.output, fwd.stats, grad_out, c.tc, AccumPolicy{}, tiled_ledger);
  tiled_ledger.record_free("tiled/stats", fwd.stats.logsumexp.emulated_bytes());

  double diff = max_abs_diff(ref_output, fwd.output);
  diff = std::max(diff, max_abs_diff(ref_grads.dquery, tiled_grads.dquery));
  diff = std::max(diff, max_abs_diff(ref_grads.dkey, tiled_grads.dkey));
  diff = std::max(diff, max_abs_diff(ref_grads.dvalue, tiled_grads.dvalue));
  if (ref_grads.dbias.has_value()) {
    diff = std::max(diff, max_abs_diff(*ref_grads.dbias, *tiled_grads.dbias));
  }
  if (diff > format_tolerance(c.fmt)) *failed = true;

  const std::int64_t naive_peak = naive_ledger.measure_peak().peak_bytes;
  const std::int64_t tiled_peak = tiled_ledger.measure_peak().peak_bytes;
  return {std::string(variant_name(c.variant)),
          format_int(c.B),
          format_int(c.L),
          format_int(c.H),
          format_int(c.D),
          format_int(c.tc.tile_q),
          format_int(c.tc.tile_k),
          format_int(naive_peak),
          format_int(tiled_peak),
          format_sci(static_cast<double>(naive_peak) / static_cast<double>(tiled_peak)),
          format_sci(diff)};
}

ReportTable run_attn_bench(const json& config, const RunSpec& spec, bool* failed) {
  std::vector<BenchCase> cases;
  if (config.is_null() || !config.contains("cases")) {
    if (!config.is_null()) check_keys(config, "config", {"cases"});
    cases = default_bench_cases();
  } else {
    check_keys(config, "config", {"cases"});
    if (!config["cases"].is_array()) throw ValidationError("key 'cases' must be an array");
    std::size_t index = 0;
    for (const json& obj : config["cases"]) {
      cases.push_back(parse_bench_case(obj, index++));
    }
  }

  ReportTable table;
  table.columns = {"variant",          "B",       "L",    "H",
                   "D",                "tile_q",  "tile_k", "naive_peak_bytes",
                   "tiled_peak_bytes", "reduction_ratio", "max_abs_diff"};
  std::vector<char> row_failed(cases.size(), 0);
  table.rows = build_rows(cases.size(), spec.parallel, [&](std::size_t i) {
    bool f = false;
    auto row = bench_row(cases[i], spec.seed, i, &f);
    row_failed[i] = f ? 1 : 0;
    return std::vector<std::vector<std::string>>{std::move(row)};
  });
  for (char f : row_failed) {
    if (f != 0) *failed = true;
  }
  return table;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradCase {
  AttentionVariant variant = AttentionVariant::MsaRowWise;
  std::int64_t B = 2, L = 16, H = 2, D = 4;
};

// Central finite differences of the scalar loss sum(O * dO) with respect to
// one input tensor; depends only on the forward pass.
Tensor finite_difference_grad(const AttentionProblem& p, const Tensor& grad_out,
                              int which,  // 0=Q 1=K 2=V 3=bias
                              double h) {
  const auto loss = [&](const AttentionProblem& q) {
    const ForwardResult f = attn_forward_ref(q);
    double total = 0.0;
    for (std::int64_t i = 0; i < f.output.size(); ++i) {
      total += f.output.at(i) * grad_out.at(i);
    }
    return total;
  };

  AttentionProblem probe = p;
  Tensor& target = which == 0   ? probe.query
                   : which == 1 ? probe.key
                   : which == 2 ? probe.value
                                : *probe.bias;
  Tensor grad(target.shape(), NumericFormat::F64);
  for (std::int64_t i = 0; i < target.size(); ++i) {
    const double saved = target.at(i);
    target.set(i, saved + h);
    const double up = loss(probe);
    target.set(i, saved - h);
    const double down = loss(probe);
    target.set(i, saved);
    grad.set(i, (up - down) / (2.0 * h));
  }
  return grad;
}

double max_rel_err(const Tensor& got, const Tensor& want) {
  // Near-zero entries are compared against a floor of 1e-3 of the tensor's
  // largest magnitude; below that the central-difference cancellation noise
  // dominates any true relative error.
  double scale = 0.0;
  for (std::int64_t i = 0; i < want.size(); ++i) scale = std::max(scale, std::abs(want.at(i)));
  const double floor = std::max(1e-3 * scale, 1e-8);
  double worst = 0.0;
  for (std::int64_t i = 0; i < got.size(); ++i) {
    const double denom = std::max({std::abs(got.at(i)), std::abs(want.at(i)), floor});
    worst = std::max(worst, std::abs(got.at(i) - want.at(i)) / denom);
  }
  return worst;
}

std::vector<std::vector<std::string>> grad_rows(const GradCase& c, std::uint64_t seed,
                                                std::uint64_t stream, bool* failed) {
  BenchCase bc;
  bc.variant = c.variant;
  bc.B = c.B;
  bc.L = c.L;
  bc.H = c.H;
  bc.D = c.D;
  bc.fmt = NumericFormat::F64;
  AttentionProblem p = random_problem(bc, seed, stream);
  SeededRng rng = derived_rng(seed, stream + (1u << 20));
  Tensor grad_out = random_uniform({c.B, c.L, c.H, c.D}, NumericFormat::F64, rng);

  const ForwardResult fwd = attn_forward_ref(p);
  const AttentionGrads ref = attn_backward_ref(p, fwd.probs, grad_out);

  AllocationLedger ledger;
  const TileConfig tc{8, 8, 1};
  const TiledForwardResult tiled_fwd = attn_forward_tiled(p, tc, ledger);
  const AttentionGrads tiled =
      attn_backward_tiled(p, tiled_fwd.output, tiled_fwd.stats, grad_out, tc, AccumPolicy{}, ledger);

  constexpr double kH = 1e-5;
  constexpr double kTol = 1e-6;
  std::vector<std::vector<std::string>> rows;
  const auto add_row = [&](const char* tensor, const Tensor& got_ref, const Tensor& got_tiled,
                           int which) {
    const Tensor fd = finite_difference_grad(p, grad_out, which, kH);
    const double err = std::max(max_rel_err(got_ref, fd), max_rel_err(got_tiled, fd));
    const bool pass = err <= kTol;
    if (!pass) *failed = true;
    rows.push_back({std::string(variant_name(c.variant)), tensor, format_sci(err),
                    pass ? "true" : "false"});
  };
  add_row("dQ", ref.dquery, tiled.dquery, 0);
  add_row("dK", ref.dkey, tiled.dkey, 1);
  add_row("dV", ref.dvalue, tiled.dvalue, 2);
  if (ref.dbias.has_value()) {
    add_row("dBias", *ref.dbias, *tiled.dbias, 3);
  }
  return rows;
}

ReportTable run_gradcheck(const json& config, const RunSpec& spec, bool* failed) {
  std::vector<GradCase> cases;
  if (config.is_null() || !config.contains("cases")) {
    if (!config.is_null()) check_keys(config, "config", {"cases"});
    for (AttentionVariant v :
         {AttentionVariant::MsaRowWise, AttentionVariant::MsaColumnWise,
          AttentionVariant::TriangularStartNode, AttentionVariant::TriangularEndNode}) {
      GradCase c;
      c.variant = v;
      const bool tri = v == AttentionVariant::TriangularStartNode ||
                       v == AttentionVariant::TriangularEndNode;
      // Triangular variants need B == L; a smaller instance keeps the
      // finite-difference cancellation noise well below the 1e-6 bar.
      if (tri) c.B = c.L = 8;
      cases.push_back(c);
    }
  } else {
    check_keys(config, "config", {"cases"});
    std::size_t index = 0;
    for (const json& obj : config["cases"]) {
      const std::string context = "cases[" + std::to_string(index++) + "]";
      check_keys(obj, context, {"variant", "B", "L", "H", "D"});
      GradCase c;
      c.variant = variant_from_name(get_string(obj, "variant", "msa_row"));
      c.L = get_int(obj, "L", 16);
      const bool tri = c.variant == AttentionVariant::TriangularStartNode ||
                       c.variant == AttentionVariant::TriangularEndNode;
      c.B = get_int(obj, "B", tri ? c.L : 2);
      c.H = get_int(obj, "H", 2);
      c.D = get_int(obj, "D", 4);
      cases.push_back(c);
    }
  }

  ReportTable table;
  table.columns = {"variant", "tensor", "max_rel_err", "pass"};
  std::vector<char> row_failed(cases.size(), 0);
  table.rows = build_rows(cases.size(), spec.parallel, [&](std::size_t i) {
    bool f = false;
    auto rows = grad_rows(cases[i], spec.seed, i, &f);
    row_failed[i] = f ? 1 : 0;
    return rows;
  });
  for (char f : row_failed) {
    if (f != 0) *failed = true;
  }
  return table;
}

// ---------------------------------------------------------------------------
// precision-demo

ReportTable run_precision_demo(const json& config, const RunSpec& spec, bool* failed) {
  std::vector<std::int64_t> batches{64, 512, 4096};
  double magnitude = 1e-3;
  NumericFormat fmt = NumericFormat::BF16;
  if (!config.is_null()) {
    check_keys(config, "config", {"batch_sizes", "magnitude", "format"});
    if (config.contains("batch_sizes")) {
      if (!config["batch_sizes"].is_array()) {
        throw ValidationError("key 'batch_sizes' must be an array");
      }
      batches.clear();
      for (const json& v : config["batch_sizes"]) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
          throw ValidationError("key 'batch_sizes' must hold positive integers");
        }
        batches.push_back(v.get<std::int64_t>());
      }
    }
    magnitude = get_real(config, "magnitude", magnitude);
    fmt = format_from_name(get_string(config, "format", "bf16"));
  }

  ReportTable table;
  table.columns = {"B", "policy", "rel_err"};
  for (std::int64_t b : batches) {
    const double contribution = round_to_format(magnitude, fmt);
    const double exact = static_cast<double>(b) * contribution;  // F64 oracle
    for (AccumMode mode : {AccumMode::NativeFormat, AccumMode::UpcastF32}) {
      PolicyAccumulator acc(AccumPolicy{mode, true}, fmt);
      for (std::int64_t i = 0; i < b; ++i) acc.add(contribution);
      const double rel = std::abs(acc.value() - exact) / std::abs(exact);
      table.rows.push_back({format_int(b),
                            mode == AccumMode::NativeFormat ? "native" : "upcast_f32",
                            format_sci(rel)});
    }
  }
  (void)failed;
  return table;
}

// ---------------------------------------------------------------------------
// planner commands

struct PlanInputs {
  ModelConfig model;
  ParallelConfig parallel;
  HardwareConfig hardware;
  PlannerOptions options;
  std::string profile_name = "custom";
  std::int64_t seq_len = 0;
};

ParallelConfig parse_parallel(const json& obj) {
  check_keys(obj, "parallel",
             {"tp", "pp", "dp", "sp_enabled", "posemb_partitioned", "flash_attention",
              "zero_stage", "offload", "batch"});
  ParallelConfig pc;
  pc.tp = get_int(obj, "tp", 1);
  pc.pp = get_int(obj, "pp", 1);
  pc.dp = get_int(obj, "dp", 1);
  pc.sp_enabled = get_bool(obj, "sp_enabled", false);
  pc.posemb_partitioned = get_bool(obj, "posemb_partitioned", false);
  pc.flash_attention = get_bool(obj, "flash_attention", false);
  pc.zero_stage = static_cast<int>(get_int(obj, "zero_stage", 0));
  pc.offload = get_bool(obj, "offload", false);
  pc.batch = get_int(obj, "batch", 1);
  pc.validate();
  return pc;
}

PlanInputs parse_plan_inputs(const json& config, bool need_seq_len) {
  if (config.is_null()) {
    PlanInputs in;
    in.model = genslm_25b();
    in.hardware = a100_40g(64);
    const PlanProfile profile = plan_profile("optimized", 64);
    in.parallel = profile.parallel;
    in.profile_name = profile.name;
    if (profile.mask_threshold_override) in.hardware.mask_threshold = *profile.mask_threshold_override;
    in.seq_len = 100000;
    return in;
  }

  check_keys(config, "config", {"model", "parallel", "hardware", "options", "seq_len"});
  PlanInputs in;

  if (!config.contains("hardware")) throw ValidationError("missing key 'hardware'");
  const json& hw = config["hardware"];
  check_keys(hw, "hardware",
             {"profile", "num_gpus", "gpu_mem_bytes", "mask_threshold", "reserve_frac"});
  const std::string hw_profile = get_string(hw, "profile", "");
  if (!hw_profile.empty()) {
    if (hw_profile != "a100-40g") {
      throw ValidationError("unknown hardware profile '" + hw_profile + "' (expected a100-40g)");
    }
    in.hardware = a100_40g(get_int(hw, "num_gpus", 1));
  } else {
    in.hardware.num_gpus = get_int(hw, "num_gpus", 1);
  }
  in.hardware.gpu_mem_bytes = get_real(hw, "gpu_mem_bytes", in.hardware.gpu_mem_bytes);
  in.hardware.mask_threshold = get_int(hw, "mask_threshold", in.hardware.mask_threshold);
  in.hardware.reserve_frac = get_real(hw, "reserve_frac", in.hardware.reserve_frac);
  in.hardware.validate();

  if (!config.contains("model")) throw ValidationError("missing key 'model'");
  const json& model = config["model"];
  check_keys(model, "model",
             {"profile", "name", "params", "n_layer", "hidden", "n_head", "act_multiplier"});
  if (model.contains("profile")) {
    in.model = model_profile(get_string(model, "profile", ""));
  }
  in.model.name = get_string(model, "name", in.model.name);
  in.model.params = get_int(model, "params", in.model.params);
  in.model.n_layer = get_int(model, "n_layer", in.model.n_layer);
  in.model.hidden = get_int(model, "hidden", in.model.hidden);
  in.model.n_head = get_int(model, "n_head", in.model.n_head);
  in.model.act_multiplier = get_real(model, "act_multiplier", in.model.act_multiplier);
  in.model.validate();

  if (!config.contains("parallel")) throw ValidationError("missing key 'parallel'");
  const json& par = config["parallel"];
  if (par.is_string()) {
    const PlanProfile profile = plan_profile(par.get<std::string>(), in.hardware.num_gpus);
    in.parallel = profile.parallel;
    in.profile_name = profile.name;
    if (profile.mask_threshold_override) {
      in.hardware.mask_threshold = *profile.mask_threshold_override;
    }
  } else {
    in.parallel = parse_parallel(par);
  }

  if (config.contains("options")) {
    const json& opt = config["options"];
    check_keys(opt, "options", {"score_bytes", "mask_bytes", "posemb_bytes", "posemb_copies"});
    in.options.score_bytes = get_int(opt, "score_bytes", in.options.score_bytes);
    in.options.mask_bytes = get_int(opt, "mask_bytes", in.options.mask_bytes);
    in.options.posemb_bytes = get_int(opt, "posemb_bytes", in.options.posemb_bytes);
    in.options.posemb_copies = get_int(opt, "posemb_copies", in.options.posemb_copies);
  }

  in.seq_len = get_int(config, "seq_len", 0);
  if (need_seq_len && in.seq_len < 1) {
    throw ValidationError("key 'seq_len' must be a positive integer for this command");
  }
  return in;
}

ReportTable run_plan_max_seq(const json& config, bool* /*failed*/) {
  const PlanInputs in = parse_plan_inputs(config, /*need_seq_len=*/false);
  const PlanResult result = max_seq(in.model, in.parallel, in.hardware, in.options);
  ReportTable table;
  table.columns = {"num_gpus", "framework_profile", "max_seq", "limiting_term"};
  table.rows.push_back({format_int(in.hardware.num_gpus), in.profile_name,
                        format_int(result.max_seq), result.limiting_term});
  return table;
}

ReportTable run_plan_breakdown(const json& config, bool* /*failed*/) {
  const PlanInputs in = parse_plan_inputs(config, /*need_seq_len=*/true);
  const MemoryBreakdown b =
      memory_breakdown(in.model, in.parallel, in.hardware, in.seq_len, in.options);
  ReportTable table;
  table.columns = {"term", "device_bytes", "host_bytes"};
  table.rows.push_back({"model_state", format_bytes(b.model_state_bytes), "0"});
  table.rows.push_back({"activation", format_bytes(b.activation_bytes), "0"});
  table.rows.push_back({"mask", format_bytes(b.mask_device_bytes), format_bytes(b.mask_host_bytes)});
  table.rows.push_back({"posemb", format_bytes(b.posemb_bytes), "0"});
  table.rows.push_back({"attn_map", format_bytes(b.attn_map_bytes), "0"});
  table.rows.push_back({"total_device", format_bytes(b.device_total()),
                        format_bytes(b.mask_host_bytes)});
  table.rows.push_back({"capacity_usable", format_bytes(in.hardware.usable_bytes()), "0"});
  table.rows.push_back({"fits", b.fits ? "true" : "false", ""});
  return table;
}

ReportTable run_sweep(const json& config, const RunSpec& spec, bool* /*failed*/) {
  std::vector<std::int64_t> gpu_counts{8, 16, 32, 64};
  std::vector<std::string> profiles{"baseline", "optimized"};
  ModelConfig model = genslm_25b();
  PlannerOptions options;
  double gpu_mem_bytes = 40e9;
  double reserve_frac = 0.10;
  std::int64_t mask_threshold = 16384;

  if (!config.is_null()) {
    check_keys(config, "config",
               {"gpu_counts", "profiles", "model", "options", "hardware"});
    if (config.contains("gpu_counts")) {
      if (!config["gpu_counts"].is_array()) {
        throw ValidationError("key 'gpu_counts' must be an array");
      }
      gpu_counts.clear();
      for (const json& v : config["gpu_counts"]) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
          throw ValidationError("key 'gpu_counts' must hold positive integers");
        }
        gpu_counts.push_back(v.get<std::int64_t>());
      }
    }
    if (config.contains("profiles")) {
      if (!config["profiles"].is_array()) throw ValidationError("key 'profiles' must be an array");
      profiles.clear();
      for (const json& v : config["profiles"]) {
        if (!v.is_string()) throw ValidationError("key 'profiles' must hold strings");
        profiles.push_back(v.get<std::string>());
      }
    }
    if (config.contains("model")) {
      const json& m = config["model"];
      check_keys(m, "model",
                 {"profile", "name", "params", "n_layer", "hidden", "n_head", "act_multiplier"});
      if (m.contains("profile")) model = model_profile(get_string(m, "profile", ""));
      model.name = get_string(m, "name", model.name);
      model.params = get_int(m, "params", model.params);
      model.n_layer = get_int(m, "n_layer", model.n_layer);
      model.hidden = get_int(m, "hidden", model.hidden);
      model.n_head = get_int(m, "n_head", model.n_head);
      model.act_multiplier = get_real(m, "act_multiplier", model.act_multiplier);
      model.validate();
    }
    if (config.contains("hardware")) {
      const json& hw = config["hardware"];
      check_keys(hw, "hardware", {"gpu_mem_bytes", "mask_threshold", "reserve_frac"});
      gpu_mem_bytes = get_real(hw, "gpu_mem_bytes", gpu_mem_bytes);
      mask_threshold = get_int(hw, "mask_threshold", mask_threshold);
      reserve_frac = get_real(hw, "reserve_frac", reserve_frac);
    }
    if (config.contains("options")) {
      const json& opt = config["options"];
      check_keys(opt, "options", {"score_bytes", "mask_bytes", "posemb_bytes", "posemb_copies"});
      options.score_bytes = get_int(opt, "score_bytes", options.score_bytes);
      options.mask_bytes = get_int(opt, "mask_bytes", options.mask_bytes);
      options.posemb_bytes = get_int(opt, "posemb_bytes", options.posemb_bytes);
      options.posemb_copies = get_int(opt, "posemb_copies", options.posemb_copies);
    }
  }

  struct SweepCase {
    std::int64_t gpus;
    std::string profile;
  };
  std::vector<SweepCase> sweep_cases;
  for (std::int64_t n : gpu_counts) {
    for (const std::string& prof : profiles) {
      sweep_cases.push_back({n, prof});
    }
  }

  ReportTable table;
  table.columns = {"num_gpus", "framework_profile", "max_seq", "limiting_term"};
  table.rows = build_rows(sweep_cases.size(), spec.parallel, [&](std::size_t i) {
    const SweepCase& sc = sweep_cases[i];
    const PlanProfile profile = plan_profile(sc.profile, sc.gpus);
    HardwareConfig hw;
    hw.gpu_mem_bytes = gpu_mem_bytes;
    hw.num_gpus = sc.gpus;
    hw.mask_threshold = profile.mask_threshold_override.value_or(mask_threshold);
    hw.reserve_frac = reserve_frac;
    const PlanResult result = max_seq(model, profile.parallel, hw, options);
    return std::vector<std::vector<std::string>>{{format_int(sc.gpus), profile.name,
                                                  format_int(result.max_seq),
                                                  result.limiting_term}};
  });
  return table;
}

}  // namespace

int run(const RunSpec& spec, std::ostream& diagnostics) {
  ReportTable table;
  bool check_failed = false;
  try {
    json config;  // null when no config file was given
    if (!spec.config_path.empty()) config = load_config(spec.config_path);

    if (spec.command == "attn-bench") {
      table = run_attn_bench(config, spec, &check_failed);
    } else if (spec.command == "gradcheck") {
      table = run_gradcheck(config, spec, &check_failed);
    } else if (spec.command == "precision-demo") {
      table = run_precision_demo(config, spec, &check_failed);
    } else if (spec.command == "plan-max-seq") {
      table = run_plan_max_seq(config, &check_failed);
    } else if (spec.command == "plan-breakdown") {
      table = run_plan_breakdown(config, &check_failed);
    } else if (spec.command == "sweep") {
      table = run_sweep(config, spec, &check_failed);
    } else {
      throw ValidationError("unknown command '" + spec.command + "'");
    }
  } catch (const Error& e) {
    diagnostics << "error: " << e.what() << "\n";
    return 1;
  }

  const std::string report = spec.format == ReportFormat::Csv
                                 ? to_csv(table)
                                 : to_json(spec.command, spec.seed, table);
  std::ofstream out(spec.output_path, std::ios::binary);
  if (!out) {
    diagnostics << "error: cannot open output file '" << spec.output_path << "'\n";
    return 1;
  }
  out << report;
  out.close();

  if (check_failed) {
    diagnostics << spec.command << ": correctness check failed; see " << spec.output_path << "\n";
    return 2;
  }
  diagnostics << spec.command << ": wrote " << table.rows.size() << " row(s) to "
              << spec.output_path << "\n";
  return 0;
}

}  // namespace evomem
