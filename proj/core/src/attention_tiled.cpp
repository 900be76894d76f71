#include "evomem/attention_tiled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "evomem/errors.hpp"

namespace evomem {

void TileConfig::validate() const {
  if (tile_q < 1 || tile_k < 1 || tile_b < 1) {
    throw ValidationError("tile extents must be >= 1, got (" + std::to_string(tile_q) + ", " +
                          std::to_string(tile_k) + ", " + std::to_string(tile_b) + ")");
  }
}

Tensor broadcast_bias_tile(const Tensor& bias, std::int64_t head, std::int64_t q_origin,
                           std::int64_t k_origin, const TileConfig& tc) {
  tc.validate();
  if (bias.rank() != 3 || bias.extent(1) != bias.extent(2)) {
    throw ValidationError("bias must be (H, L, L), got " + bias.shape_str());
  }
  const std::int64_t H = bias.extent(0);
  const std::int64_t L = bias.extent(1);
  if (head < 0 || head >= H) {
    throw ValidationError("bias head index " + std::to_string(head) + " out of range [0, " +
                          std::to_string(H) + ")");
  }
  if (q_origin < 0 || q_origin >= L || k_origin < 0 || k_origin >= L) {
    throw ValidationError("bias tile origin (" + std::to_string(q_origin) + ", " +
                          std::to_string(k_origin) + ") out of range for L=" + std::to_string(L));
  }
  const std::int64_t rows = std::min(tc.tile_q, L - q_origin);
  const std::int64_t cols = std::min(tc.tile_k, L - k_origin);

  Tensor tile({rows, cols}, bias.format());
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    for (std::int64_t jj = 0; jj < cols; ++jj) {
      tile.set(ii * cols + jj, bias.at((head * L + q_origin + ii) * L + k_origin + jj));
    }
  }
  return tile;
}

namespace {

void require_no_nan(const Tensor& t, const char* name) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (std::isnan(t.at(i))) throw NumericError(std::string(name) + " contains NaN");
  }
}

}  // namespace

TiledForwardResult attn_forward_tiled(const AttentionProblem& p, const TileConfig& tc,
                                      AllocationLedger& ledger) {
  p.validate();
  tc.validate();
  if (ledger.closed()) throw UsageError("allocation ledger is closed");
  require_no_nan(p.query, "Q");
  require_no_nan(p.key, "K");
  require_no_nan(p.value, "V");
  if (p.bias.has_value()) require_no_nan(*p.bias, "bias");

  const std::int64_t B = p.batch(), L = p.seq(), H = p.heads(), D = p.head_dim();
  const NumericFormat fmt = p.format();
  const NumericFormat stats_fmt = widened_to_f32(fmt);
  const FormatRounder rnd{fmt};
  const bool has_bias = p.bias.has_value();

  const std::int64_t lstride = H * D;  // (B, L, H, D)
  const std::int64_t bstride = L * lstride;

  Tensor output({B, L, H, D}, fmt);  // caller-owned I/O, not ledgered
  Tensor lse({H, B, L}, stats_fmt);

  LedgerScope scope(ledger, "tiled");
  ledger.record_alloc("stats", lse.emulated_bytes());

  const std::int64_t fmt_b = format_bytes(fmt);
  const std::int64_t tk_max = std::min(tc.tile_k, L);

  for (std::int64_t h = 0; h < H; ++h) {
    for (std::int64_t b0 = 0; b0 < B; b0 += tc.tile_b) {
      const std::int64_t b1 = std::min(b0 + tc.tile_b, B);
      for (std::int64_t i0 = 0; i0 < L; i0 += tc.tile_q) {
        const std::int64_t rows = std::min(tc.tile_q, L - i0);

        // One work unit: a logits tile, the output accumulator and the
        // running max/denominator rows. Batch rows inside the unit reuse
        // these buffers sequentially.
        ScopedAllocation a_tile(&ledger, "work/logits_tile", rows * tk_max * fmt_b);
        ScopedAllocation a_acc(&ledger, "work/out_acc", rows * D * fmt_b);
        ScopedAllocation a_max(&ledger, "work/row_max", rows * fmt_b);
        ScopedAllocation a_den(&ledger, "work/row_denom", rows * fmt_b);
        std::vector<double> s_tile(static_cast<std::size_t>(rows * tk_max));
        std::vector<double> acc(static_cast<std::size_t>(rows * D));
        std::vector<double> row_max(static_cast<std::size_t>(rows));
        std::vector<double> row_denom(static_cast<std::size_t>(rows));

        for (std::int64_t b = b0; b < b1; ++b) {
          std::fill(acc.begin(), acc.end(), 0.0);
          std::fill(row_max.begin(), row_max.end(), -std::numeric_limits<double>::infinity());
          std::fill(row_denom.begin(), row_denom.end(), 0.0);

          for (std::int64_t j0 = 0; j0 < L; j0 += tc.tile_k) {
            const std::int64_t cols = std::min(tc.tile_k, L - j0);

            // Steps 1-2: logits tile with the bias broadcast on the fly;
            // the (h, i0, j0) bias window is the same for every b.
            for (std::int64_t ii = 0; ii < rows; ++ii) {
              const std::int64_t q_base = b * bstride + (i0 + ii) * lstride + h * D;
              for (std::int64_t jj = 0; jj < cols; ++jj) {
                const std::int64_t k_base = b * bstride + (j0 + jj) * lstride + h * D;
                double dot = 0.0;
                for (std::int64_t d = 0; d < D; ++d) {
                  dot = rnd(dot + rnd(p.query.at(q_base + d) * p.key.at(k_base + d)));
                }
                double s = rnd(p.scale * dot);
                if (has_bias) {
                  s = rnd(s + p.bias->at((h * L + i0 + ii) * L + j0 + jj));
                }
                if (!std::isfinite(s)) {
                  throw NumericError("attention logits are not finite");
                }
                s_tile[static_cast<std::size_t>(ii * tk_max + jj)] = s;
              }
            }

            // Step 3, online: m' = max(m, rowmax); l = l*e^(m-m') + rowsum;
            // acc = acc*e^(m-m') + e^(S-m') V.
            for (std::int64_t ii = 0; ii < rows; ++ii) {
              double m_new = row_max[static_cast<std::size_t>(ii)];
              for (std::int64_t jj = 0; jj < cols; ++jj) {
                m_new = std::max(m_new, s_tile[static_cast<std::size_t>(ii * tk_max + jj)]);
              }
              const double alpha =
                  rnd(std::exp(rnd(row_max[static_cast<std::size_t>(ii)] - m_new)));
              for (std::int64_t d = 0; d < D; ++d) {
                acc[static_cast<std::size_t>(ii * D + d)] =
                    rnd(acc[static_cast<std::size_t>(ii * D + d)] * alpha);
              }
              double tile_sum = 0.0;
              for (std::int64_t jj = 0; jj < cols; ++jj) {
                const double e =
                    rnd(std::exp(rnd(s_tile[static_cast<std::size_t>(ii * tk_max + jj)] - m_new)));
                tile_sum = rnd(tile_sum + e);
                const std::int64_t v_base = b * bstride + (j0 + jj) * lstride + h * D;
                for (std::int64_t d = 0; d < D; ++d) {
                  acc[static_cast<std::size_t>(ii * D + d)] =
                      rnd(acc[static_cast<std::size_t>(ii * D + d)] + rnd(e * p.value.at(v_base + d)));
                }
              }
              row_denom[static_cast<std::size_t>(ii)] =
                  rnd(rnd(row_denom[static_cast<std::size_t>(ii)] * alpha) + tile_sum);
              row_max[static_cast<std::size_t>(ii)] = m_new;
            }
          }

          // Step 4 finalization and the saved row statistic.
          for (std::int64_t ii = 0; ii < rows; ++ii) {
            const std::int64_t o_base = b * bstride + (i0 + ii) * lstride + h * D;
            for (std::int64_t d = 0; d < D; ++d) {
              output.set(o_base + d,
                         rnd(acc[static_cast<std::size_t>(ii * D + d)] /
                             row_denom[static_cast<std::size_t>(ii)]));
            }
            lse.set((h * B + b) * L + i0 + ii,
                    row_max[static_cast<std::size_t>(ii)] +
                        std::log(row_denom[static_cast<std::size_t>(ii)]));
          }
        }
      }
    }
  }

  return TiledForwardResult{std::move(output), RowStats{std::move(lse)}};
}

AttentionGrads attn_backward_tiled(const AttentionProblem& p, const Tensor& output,
                                   const RowStats& stats, const Tensor& grad_output,
                                   const TileConfig& tc, const AccumPolicy& policy,
                                   AllocationLedger& ledger) {
  p.validate();
  tc.validate();
  if (ledger.closed()) throw UsageError("allocation ledger is closed");

  const std::int64_t B = p.batch(), L = p.seq(), H = p.heads(), D = p.head_dim();
  const NumericFormat fmt = p.format();
  const NumericFormat stats_fmt = widened_to_f32(fmt);
  const FormatRounder rnd{fmt};
  const bool has_bias = p.bias.has_value();

  const Tensor& lse = stats.logsumexp;
  if (lse.rank() != 3 || lse.extent(0) != H || lse.extent(1) != B || lse.extent(2) != L) {
    throw ValidationError("row stats must be (H, B, L), got " + lse.shape_str());
  }
  if (lse.format() != stats_fmt) {
    throw ValidationError("row stats format does not match the problem format");
  }
  if (!output.same_shape(p.query) || !grad_output.same_shape(p.query)) {
    throw ValidationError("output and grad_output must match Q/K/V shape");
  }
  if (output.format() != fmt || grad_output.format() != fmt) {
    throw ValidationError("output and grad_output must share the problem numeric format");
  }
  require_no_nan(grad_output, "dO");

  const std::int64_t lstride = H * D;
  const std::int64_t bstride = L * lstride;

  AttentionGrads grads;
  grads.dquery = Tensor({B, L, H, D}, fmt);
  grads.dkey = Tensor({B, L, H, D}, fmt);
  grads.dvalue = Tensor({B, L, H, D}, fmt);
  if (has_bias) {
    // The bias-gradient accumulator: UpcastF32 keeps it F32-or-wider so the
    // emulated low-precision grid never touches the running sums;
    // NativeFormat re-rounds after every addition (see PolicyAccumulator).
    grads.dbias = Tensor({H, L, L}, policy.mode == AccumMode::UpcastF32 ? stats_fmt : fmt);
  }

  LedgerScope scope(ledger, "tiled");

  // Softmax-backward row term: delta[b,i,h] = sum_d dO[b,i,h,d] O[b,i,h,d].
  Tensor delta({B, L, H}, stats_fmt);
  ScopedAllocation a_delta(&ledger, "delta", delta.emulated_bytes());
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t i = 0; i < L; ++i) {
      for (std::int64_t h = 0; h < H; ++h) {
        const std::int64_t base = b * bstride + i * lstride + h * D;
        double acc = 0.0;
        for (std::int64_t d = 0; d < D; ++d) {
          acc = rnd(acc + rnd(grad_output.at(base + d) * output.at(base + d)));
        }
        delta.set((b * L + i) * H + h, acc);
      }
    }
  }

  const std::int64_t fmt_b = format_bytes(fmt);
  const std::int64_t tk_max = std::min(tc.tile_k, L);

  // Batch iteration order: ascending for the deterministic contract,
  // descending otherwise (stand-in for unordered atomic accumulation of the
  // bias gradient; per-b terms of dQ/dK/dV are independent of this order).
  std::vector<std::int64_t> batch_order(static_cast<std::size_t>(B));
  for (std::int64_t b = 0; b < B; ++b) {
    batch_order[static_cast<std::size_t>(b)] = policy.deterministic ? b : B - 1 - b;
  }

  for (std::int64_t h = 0; h < H; ++h) {
    for (std::int64_t bo = 0; bo < B; bo += tc.tile_b) {
      const std::int64_t bo1 = std::min(bo + tc.tile_b, B);
      for (std::int64_t i0 = 0; i0 < L; i0 += tc.tile_q) {
        const std::int64_t rows = std::min(tc.tile_q, L - i0);

        // Recomputation scratch: a single (tile_q, tile_k) tile holding the
        // logits and then the recomputed probabilities in place.
        ScopedAllocation a_tile(&ledger, "work/scratch_tile", rows * tk_max * fmt_b);
        std::vector<double> tile(static_cast<std::size_t>(rows * tk_max));

        for (std::int64_t bi = bo; bi < bo1; ++bi) {
          const std::int64_t b = batch_order[static_cast<std::size_t>(bi)];

          for (std::int64_t j0 = 0; j0 < L; j0 += tc.tile_k) {
            const std::int64_t cols = std::min(tc.tile_k, L - j0);

            // Steps 1-3 rerun: logits tile, then P = exp(S - logsumexp).
            for (std::int64_t ii = 0; ii < rows; ++ii) {
              const std::int64_t q_base = b * bstride + (i0 + ii) * lstride + h * D;
              const double row_lse = lse.at((h * B + b) * L + i0 + ii);
              for (std::int64_t jj = 0; jj < cols; ++jj) {
                const std::int64_t k_base = b * bstride + (j0 + jj) * lstride + h * D;
                double dot = 0.0;
                for (std::int64_t d = 0; d < D; ++d) {
                  dot = rnd(dot + rnd(p.query.at(q_base + d) * p.key.at(k_base + d)));
                }
                double s = rnd(p.scale * dot);
                if (has_bias) {
                  s = rnd(s + p.bias->at((h * L + i0 + ii) * L + j0 + jj));
                }
                tile[static_cast<std::size_t>(ii * tk_max + jj)] =
                    rnd(std::exp(rnd(s - row_lse)));
              }
            }

            for (std::int64_t ii = 0; ii < rows; ++ii) {
              const std::int64_t i = i0 + ii;
              const std::int64_t io_i = b * bstride + i * lstride + h * D;
              const double row_delta = delta.at((b * L + i) * H + h);
              for (std::int64_t jj = 0; jj < cols; ++jj) {
                const std::int64_t j = j0 + jj;
                const std::int64_t io_j = b * bstride + j * lstride + h * D;
                const double prob = tile[static_cast<std::size_t>(ii * tk_max + jj)];

                // dV[b,j,h,:] += P * dO[b,i,h,:]
                for (std::int64_t d = 0; d < D; ++d) {
                  grads.dvalue.set(io_j + d,
                                   rnd(grads.dvalue.at(io_j + d) +
                                       rnd(prob * grad_output.at(io_i + d))));
                }
                // dP = sum_d dO V, dS = P (dP - delta)
                double dp = 0.0;
                for (std::int64_t d = 0; d < D; ++d) {
                  dp = rnd(dp + rnd(grad_output.at(io_i + d) * p.value.at(io_j + d)));
                }
                const double ds = rnd(prob * rnd(dp - row_delta));

                for (std::int64_t d = 0; d < D; ++d) {
                  grads.dquery.set(io_i + d,
                                   rnd(grads.dquery.at(io_i + d) + rnd(ds * p.key.at(io_j + d))));
                  grads.dkey.set(io_j + d,
                                 rnd(grads.dkey.at(io_j + d) + rnd(ds * p.query.at(io_i + d))));
                }
                if (has_bias) {
                  // Broadcast-reverse accumulation over b; the tensor's
                  // format applies the policy rounding per addition.
                  const std::int64_t bias_idx = (h * L + i) * L + j;
                  grads.dbias->set(bias_idx, grads.dbias->at(bias_idx) + ds);
                }
              }
            }
          }
        }
      }
    }
  }

  // Deferred scale so dQ/dK see the same ascending-index sums as the
  // reference before the single scale rounding.
  for (std::int64_t i = 0; i < grads.dquery.size(); ++i) {
    grads.dquery.set(i, rnd(p.scale * grads.dquery.at(i)));
    grads.dkey.set(i, rnd(p.scale * grads.dkey.at(i)));
  }

  return grads;
}

}  // namespace evomem
