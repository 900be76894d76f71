#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "evomem/ledger.hpp"
#include "evomem/tensor.hpp"

namespace evomem {

// The four biased-axial-attention variants. Row-wise and both triangular
// variants add a pair bias shared across the batch axis; column-wise does not.
enum class AttentionVariant { MsaRowWise, MsaColumnWise, TriangularStartNode, TriangularEndNode };

constexpr bool variant_has_bias(AttentionVariant v) {
  return v != AttentionVariant::MsaColumnWise;
}

std::string_view variant_name(AttentionVariant v);
AttentionVariant variant_from_name(std::string_view name);  // throws ValidationError

// One attention instance in canonical axes: Q/K/V are (B, L, H, D) where B is
// the axis not attended over and L the attended axis. The bias, when the
// variant carries one, is (H, L, L) and is shared by every batch row.
//
//   MsaRowWise:          (B, L) = (N_msa, N_res)
//   MsaColumnWise:       (B, L) = (N_res, N_msa)
//   Triangular variants: (B, L) = (N_res, N_res), so B == L
struct AttentionProblem {
  AttentionVariant variant = AttentionVariant::MsaRowWise;
  Tensor query;   // (B, L, H, D)
  Tensor key;     // (B, L, H, D)
  Tensor value;   // (B, L, H, D)
  std::optional<Tensor> bias;  // (H, L, L) iff variant_has_bias(variant)
  double scale = 0.0;          // logit scale, default 1/sqrt(D)

  static AttentionProblem make(AttentionVariant variant, Tensor query, Tensor key, Tensor value,
                               std::optional<Tensor> bias = std::nullopt,
                               std::optional<double> scale = std::nullopt);

  std::int64_t batch() const { return query.extent(0); }
  std::int64_t seq() const { return query.extent(1); }
  std::int64_t heads() const { return query.extent(2); }
  std::int64_t head_dim() const { return query.extent(3); }
  NumericFormat format() const { return query.format(); }

  void validate() const;  // throws ValidationError / NumericError
};

struct AttentionGrads {
  Tensor dquery;  // (B, L, H, D)
  Tensor dkey;    // (B, L, H, D)
  Tensor dvalue;  // (B, L, H, D)
  // Gradient of the shared bias, summed over the broadcast batch axis.
  // Stored F32-or-wider regardless of the problem format.
  std::optional<Tensor> dbias;  // (H, L, L)
};

// Canonicalization of a raw MSA-layout tensor to problem axes. MSA variants
// take (N_msa, N_res, H, D); triangular variants take (N_res, N_res, H, D).
// The mapping is a pure axis permutation: permutation[k] names the raw axis
// that lands in canonical position k.
struct CanonicalLayout {
  Tensor tensor;  // (B, L, H, D)
  std::array<int, 4> permutation;
  std::int64_t batch_extent;
  std::int64_t attended_extent;
};

CanonicalLayout layout_from_msa(AttentionVariant variant, const Tensor& raw);

// Axis permutation helper: out[idx] = in[idx mapped through perm]. Public so
// the layout round-trip (apply mapping then its inverse) is expressible.
Tensor permute_axes(const Tensor& t, const std::array<int, 4>& perm);
std::array<int, 4> inverse_permutation(const std::array<int, 4>& perm);

// Fully materializing reference pass; the correctness oracle for the tiled
// implementation. Deliberately memory hungry: logits and probabilities are
// (H, B, L, L) tensors, recorded as "naive/S" and "naive/P" when a ledger is
// supplied. I/O tensors (Q, K, V, O, gradients) are the caller's and are not
// ledgered.
struct ForwardResult {
  Tensor output;  // (B, L, H, D)
  Tensor logits;  // (H, B, L, L): scale*QK^T + broadcast bias
  Tensor probs;   // (H, B, L, L): softmax of logits over the last axis
};

ForwardResult attn_forward_ref(const AttentionProblem& p, AllocationLedger* ledger = nullptr);

// Backward from the saved probability tensor. dP is formed in the dS buffer
// and transformed in place, so exactly one (H, B, L, L) scratch tensor is
// live ("naive/dS"). The bias gradient is accumulated over the batch axis in
// double precision and stored F32-or-wider.
AttentionGrads attn_backward_ref(const AttentionProblem& p, const Tensor& probs,
                                 const Tensor& grad_output, AllocationLedger* ledger = nullptr);

}  // namespace evomem
