#include "evomem/attention.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "evomem/errors.hpp"

namespace evomem {

std::string_view variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::MsaRowWise:
      return "msa_row";
    case AttentionVariant::MsaColumnWise:
      return "msa_col";
    case AttentionVariant::TriangularStartNode:
      return "tri_start";
    case AttentionVariant::TriangularEndNode:
      return "tri_end";
  }
  return "msa_row";
}

AttentionVariant variant_from_name(std::string_view name) {
  if (name == "msa_row") return AttentionVariant::MsaRowWise;
  if (name == "msa_col") return AttentionVariant::MsaColumnWise;
  if (name == "tri_start") return AttentionVariant::TriangularStartNode;
  if (name == "tri_end") return AttentionVariant::TriangularEndNode;
  throw ValidationError("unknown attention variant '" + std::string(name) +
                        "' (expected msa_row|msa_col|tri_start|tri_end)");
}

AttentionProblem AttentionProblem::make(AttentionVariant variant, Tensor query, Tensor key,
                                        Tensor value, std::optional<Tensor> bias,
                                        std::optional<double> scale) {
  AttentionProblem p;
  p.variant = variant;
  p.query = std::move(query);
  p.key = std::move(key);
  p.value = std::move(value);
  p.bias = std::move(bias);
  p.scale = scale.value_or(p.query.rank() == 4 ? 1.0 / std::sqrt(static_cast<double>(
                                                     p.query.extent(3)))
                                               : 1.0);
  p.validate();
  return p;
}

void AttentionProblem::validate() const {
  if (query.rank() != 4) {
    throw ValidationError("attention tensors must be rank-4 (B, L, H, D), got " +
                          query.shape_str());
  }
  if (!query.same_shape(key) || !query.same_shape(value)) {
    throw ValidationError("Q, K, V must share one shape; got " + query.shape_str() + ", " +
                          key.shape_str() + ", " + value.shape_str());
  }
  if (query.format() != key.format() || query.format() != value.format()) {
    throw ValidationError("Q, K, V must share one numeric format");
  }
  const bool needs_bias = variant_has_bias(variant);
  if (needs_bias != bias.has_value()) {
    throw ValidationError(std::string("variant ") + std::string(variant_name(variant)) +
                          (needs_bias ? " requires a bias tensor" : " does not take a bias"));
  }
  if (bias.has_value()) {
    if (bias->rank() != 3 || bias->extent(0) != heads() || bias->extent(1) != seq() ||
        bias->extent(2) != seq()) {
      throw ValidationError("bias must be (H, L, L) = (" + std::to_string(heads()) + ", " +
                            std::to_string(seq()) + ", " + std::to_string(seq()) + "), got " +
                            bias->shape_str());
    }
    if (bias->format() != query.format()) {
      throw ValidationError("bias must share the problem numeric format");
    }
  }
  if ((variant == AttentionVariant::TriangularStartNode ||
       variant == AttentionVariant::TriangularEndNode) &&
      batch() != seq()) {
    throw ValidationError("triangular variants require B == L (N_res, N_res), got (" +
                          std::to_string(batch()) + ", " + std::to_string(seq()) + ")");
  }
  if (!std::isfinite(scale)) {
    throw NumericError("attention scale must be finite");
  }
}

namespace {

void require_finite(const Tensor& t, const char* name) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (std::isnan(t.at(i))) {
      throw NumericError(std::string(name) + " contains NaN");
    }
  }
}

}  // namespace

CanonicalLayout layout_from_msa(AttentionVariant variant, const Tensor& raw) {
  if (raw.rank() != 4) {
    throw ValidationError("layout_from_msa expects a rank-4 tensor, got " + raw.shape_str());
  }
  // MSA variants arrive as (N_msa, N_res, H, D); the attended axis is N_res
  // for row-wise and N_msa for column-wise. Triangular inputs are
  // (N_res, N_res, H, D): start-node attends over the second axis, end-node
  // over the first.
  std::array<int, 4> perm{0, 1, 2, 3};
  switch (variant) {
    case AttentionVariant::MsaRowWise:
    case AttentionVariant::TriangularStartNode:
      perm = {0, 1, 2, 3};
      break;
    case AttentionVariant::MsaColumnWise:
    case AttentionVariant::TriangularEndNode:
      perm = {1, 0, 2, 3};
      break;
  }
  CanonicalLayout out{permute_axes(raw, perm), perm, 0, 0};
  out.batch_extent = out.tensor.extent(0);
  out.attended_extent = out.tensor.extent(1);
  return out;
}

Tensor permute_axes(const Tensor& t, const std::array<int, 4>& perm) {
  if (t.rank() != 4) {
    throw ValidationError("permute_axes expects a rank-4 tensor, got " + t.shape_str());
  }
  bool seen[4] = {false, false, false, false};
  for (int a : perm) {
    if (a < 0 || a > 3 || seen[a]) throw ValidationError("invalid axis permutation");
    seen[a] = true;
  }
  const std::int64_t e0 = t.extent(perm[0]);
  const std::int64_t e1 = t.extent(perm[1]);
  const std::int64_t e2 = t.extent(perm[2]);
  const std::int64_t e3 = t.extent(perm[3]);

  std::int64_t in_strides[4];
  in_strides[3] = 1;
  in_strides[2] = t.extent(3);
  in_strides[1] = t.extent(2) * in_strides[2];
  in_strides[0] = t.extent(1) * in_strides[1];

  Tensor out({e0, e1, e2, e3}, t.format());
  std::int64_t flat = 0;
  for (std::int64_t i0 = 0; i0 < e0; ++i0) {
    for (std::int64_t i1 = 0; i1 < e1; ++i1) {
      for (std::int64_t i2 = 0; i2 < e2; ++i2) {
        for (std::int64_t i3 = 0; i3 < e3; ++i3) {
          const std::int64_t src = i0 * in_strides[perm[0]] + i1 * in_strides[perm[1]] +
                                   i2 * in_strides[perm[2]] + i3 * in_strides[perm[3]];
          out.set(flat++, t.at(src));
        }
      }
    }
  }
  return out;
}

std::array<int, 4> inverse_permutation(const std::array<int, 4>& perm) {
  std::array<int, 4> inv{};
  for (int k = 0; k < 4; ++k) inv[perm[k]] = k;
  return inv;
}

ForwardResult attn_forward_ref(const AttentionProblem& p, AllocationLedger* ledger) {
  p.validate();
  require_finite(p.query, "Q");
  require_finite(p.key, "K");
  require_finite(p.value, "V");
  if (p.bias.has_value()) require_finite(*p.bias, "bias");

  const std::int64_t B = p.batch(), L = p.seq(), H = p.heads(), D = p.head_dim();
  const NumericFormat fmt = p.format();
  const FormatRounder rnd{fmt};
  const bool has_bias = p.bias.has_value();

  // Strides of the canonical layouts.
  const std::int64_t q_lstride = H * D;        // (B, L, H, D)
  const std::int64_t q_bstride = L * q_lstride;
  const std::int64_t s_istride = L;            // (H, B, L, L)
  const std::int64_t s_bstride = L * s_istride;
  const std::int64_t s_hstride = B * s_bstride;

  Tensor logits({H, B, L, L}, fmt);
  if (ledger != nullptr) ledger->record_alloc("naive/S", logits.emulated_bytes());

  for (std::int64_t h = 0; h < H; ++h) {
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t i = 0; i < L; ++i) {
        const std::int64_t q_base = b * q_bstride + i * q_lstride + h * D;
        const std::int64_t s_base = h * s_hstride + b * s_bstride + i * s_istride;
        for (std::int64_t j = 0; j < L; ++j) {
          const std::int64_t k_base = b * q_bstride + j * q_lstride + h * D;
          double dot = 0.0;
          for (std::int64_t d = 0; d < D; ++d) {
            dot = rnd(dot + rnd(p.query.at(q_base + d) * p.key.at(k_base + d)));
          }
          double s = rnd(p.scale * dot);
          if (has_bias) {
            s = rnd(s + p.bias->at((h * L + i) * L + j));
          }
          logits.set(s_base + j, s);
        }
      }
    }
  }

  Tensor probs = softmax_lastdim(logits);
  if (ledger != nullptr) ledger->record_alloc("naive/P", probs.emulated_bytes());

  Tensor output({B, L, H, D}, fmt);
  std::vector<double> row_acc(static_cast<std::size_t>(D));
  for (std::int64_t h = 0; h < H; ++h) {
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t i = 0; i < L; ++i) {
        std::fill(row_acc.begin(), row_acc.end(), 0.0);
        const std::int64_t s_base = h * s_hstride + b * s_bstride + i * s_istride;
        for (std::int64_t j = 0; j < L; ++j) {
          const double pij = probs.at(s_base + j);
          const std::int64_t v_base = b * q_bstride + j * q_lstride + h * D;
          for (std::int64_t d = 0; d < D; ++d) {
            row_acc[static_cast<std::size_t>(d)] =
                rnd(row_acc[static_cast<std::size_t>(d)] + rnd(pij * p.value.at(v_base + d)));
          }
        }
        const std::int64_t o_base = b * q_bstride + i * q_lstride + h * D;
        for (std::int64_t d = 0; d < D; ++d) {
          output.set(o_base + d, row_acc[static_cast<std::size_t>(d)]);
        }
      }
    }
  }

  return ForwardResult{std::move(output), std::move(logits), std::move(probs)};
}

AttentionGrads attn_backward_ref(const AttentionProblem& p, const Tensor& probs,
                                 const Tensor& grad_output, AllocationLedger* ledger) {
  p.validate();
  const std::int64_t B = p.batch(), L = p.seq(), H = p.heads(), D = p.head_dim();
  const NumericFormat fmt = p.format();
  const FormatRounder rnd{fmt};

  if (probs.rank() != 4 || probs.extent(0) != H || probs.extent(1) != B ||
      probs.extent(2) != L || probs.extent(3) != L) {
    throw ValidationError("probs must be (H, B, L, L), got " + probs.shape_str());
  }
  if (!grad_output.same_shape(p.query)) {
    throw ValidationError("grad_output must match Q/K/V shape, got " + grad_output.shape_str());
  }
  if (probs.format() != fmt || grad_output.format() != fmt) {
    throw ValidationError("probs and grad_output must share the problem numeric format");
  }
  require_finite(grad_output, "dO");

  const std::int64_t lstride = H * D;
  const std::int64_t bstride = L * lstride;
  const std::int64_t s_istride = L;
  const std::int64_t s_bstride = L * s_istride;
  const std::int64_t s_hstride = B * s_bstride;

  // dP is formed in the dS buffer and transformed in place, so the backward
  // pass materializes exactly one (H, B, L, L) scratch tensor.
  Tensor dS({H, B, L, L}, fmt);
  ScopedAllocation ds_alloc(ledger, "naive/dS", dS.emulated_bytes());

  for (std::int64_t h = 0; h < H; ++h) {
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t i = 0; i < L; ++i) {
        const std::int64_t s_base = h * s_hstride + b * s_bstride + i * s_istride;
        const std::int64_t do_base = b * bstride + i * lstride + h * D;
        for (std::int64_t j = 0; j < L; ++j) {
          const std::int64_t v_base = b * bstride + j * lstride + h * D;
          double dp = 0.0;
          for (std::int64_t d = 0; d < D; ++d) {
            dp = rnd(dp + rnd(grad_output.at(do_base + d) * p.value.at(v_base + d)));
          }
          dS.set(s_base + j, dp);
        }
        // row term: sum_j P[i,j] * dP[i,j]
        double row = 0.0;
        for (std::int64_t j = 0; j < L; ++j) {
          row = rnd(row + rnd(probs.at(s_base + j) * dS.at(s_base + j)));
        }
        for (std::int64_t j = 0; j < L; ++j) {
          dS.set(s_base + j, rnd(probs.at(s_base + j) * rnd(dS.at(s_base + j) - row)));
        }
      }
    }
  }

  AttentionGrads grads;
  grads.dquery = Tensor({B, L, H, D}, fmt);
  grads.dkey = Tensor({B, L, H, D}, fmt);
  grads.dvalue = Tensor({B, L, H, D}, fmt);

  for (std::int64_t h = 0; h < H; ++h) {
    for (std::int64_t b = 0; b < B; ++b) {
      // dQ[b,i,h,d] = scale * sum_j dS[h,b,i,j] K[b,j,h,d]
      for (std::int64_t i = 0; i < L; ++i) {
        const std::int64_t s_base = h * s_hstride + b * s_bstride + i * s_istride;
        const std::int64_t dq_base = b * bstride + i * lstride + h * D;
        for (std::int64_t d = 0; d < D; ++d) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < L; ++j) {
            acc = rnd(acc + rnd(dS.at(s_base + j) * p.key.at(b * bstride + j * lstride + h * D + d)));
          }
          grads.dquery.set(dq_base + d, rnd(p.scale * acc));
        }
      }
      // dK[b,j,h,d] = scale * sum_i dS[h,b,i,j] Q[b,i,h,d]
      // dV[b,j,h,d] = sum_i P[h,b,i,j] dO[b,i,h,d]
      for (std::int64_t j = 0; j < L; ++j) {
        const std::int64_t dk_base = b * bstride + j * lstride + h * D;
        for (std::int64_t d = 0; d < D; ++d) {
          double k_acc = 0.0;
          double v_acc = 0.0;
          for (std::int64_t i = 0; i < L; ++i) {
            const std::int64_t s_idx = h * s_hstride + b * s_bstride + i * s_istride + j;
            const std::int64_t io_idx = b * bstride + i * lstride + h * D + d;
            k_acc = rnd(k_acc + rnd(dS.at(s_idx) * p.query.at(io_idx)));
            v_acc = rnd(v_acc + rnd(probs.at(s_idx) * grad_output.at(io_idx)));
          }
          grads.dkey.set(dk_base + d, rnd(p.scale * k_acc));
          grads.dvalue.set(dk_base + d, v_acc);
        }
      }
    }
  }

  if (p.bias.has_value()) {
    // Broadcast reverse: sum the logit gradients over the batch axis, in
    // double, ascending b; stored F32-or-wider.
    Tensor dbias({H, L, L}, widened_to_f32(fmt));
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t i = 0; i < L; ++i) {
        for (std::int64_t j = 0; j < L; ++j) {
          double acc = 0.0;
          for (std::int64_t b = 0; b < B; ++b) {
            acc += dS.at(h * s_hstride + b * s_bstride + i * s_istride + j);
          }
          dbias.set((h * L + i) * L + j, acc);
        }
      }
    }
    grads.dbias = std::move(dbias);
  }

  return grads;
}

}  // namespace evomem
