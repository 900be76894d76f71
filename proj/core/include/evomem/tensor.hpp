#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evomem/numeric_format.hpp"

namespace evomem {

// Dense row-major tensor of real values with an emulated storage precision.
// Stored values are always exactly representable in the tensor's format:
// set() re-rounds on the way in, so re-rounding a stored value is a no-op.
//
// There is no broadcasting and no view machinery at this layer; shapes are
// explicit and indexing is flat. F64 data lives in doubles, every narrower
// grid (F32/BF16/F16) embeds losslessly in floats.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::int64_t> shape, NumericFormat fmt);  // zero-filled
  static Tensor from_values(std::vector<std::int64_t> shape, NumericFormat fmt,
                            std::span<const double> values);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t extent(std::int64_t axis) const;
  std::int64_t size() const { return size_; }
  NumericFormat format() const { return format_; }

  // Logical footprint in the emulated format (what an allocation ledger
  // should account), not the in-memory footprint of the host vectors.
  std::int64_t emulated_bytes() const { return size_ * format_bytes(format_); }

  double at(std::int64_t flat) const {
    return format_ == NumericFormat::F64 ? wide_[static_cast<std::size_t>(flat)]
                                         : static_cast<double>(narrow_[static_cast<std::size_t>(flat)]);
  }

  void set(std::int64_t flat, double v) {
    if (format_ == NumericFormat::F64) {
      wide_[static_cast<std::size_t>(flat)] = v;
    } else {
      narrow_[static_cast<std::size_t>(flat)] = static_cast<float>(round_to_format(v, format_));
    }
  }

  void fill(double v);

  // Bounds-checked multi-index to flat offset; throws ValidationError.
  std::int64_t flat_index(std::span<const std::int64_t> idx) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

 private:
  std::vector<std::int64_t> shape_;
  std::int64_t size_ = 0;
  NumericFormat format_ = NumericFormat::F64;
  std::vector<double> wide_;
  std::vector<float> narrow_;
};

// C[i,j] = sum_t A[i,t]*B[t,j] with the sum taken in ascending t and every
// partial product/sum rounded to the output format. A and B must share one
// format; the result uses it. Throws ValidationError on shape mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

// Numerically safe softmax over the last axis: each slice y satisfies
// y_j = exp(x_j - max(x)) / sum_k exp(x_k - max(x)). Reductions run in
// ascending index order; emulated formats round after every primitive op.
// Throws NumericError if the input contains non-finite values.
Tensor softmax_lastdim(const Tensor& x);

}  // namespace evomem
