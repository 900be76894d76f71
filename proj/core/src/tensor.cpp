#include "evomem/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "evomem/errors.hpp"

namespace evomem {

namespace {

std::int64_t checked_element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) {
    if (e <= 0) {
      throw ValidationError("tensor extents must be positive");
    }
    if (n > (std::int64_t{1} << 62) / e) {
      throw ValidationError("tensor element count overflows");
    }
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape, NumericFormat fmt)
    : shape_(std::move(shape)), size_(checked_element_count(shape_)), format_(fmt) {
  if (format_ == NumericFormat::F64) {
    wide_.assign(static_cast<std::size_t>(size_), 0.0);
  } else {
    narrow_.assign(static_cast<std::size_t>(size_), 0.0f);
  }
}

Tensor Tensor::from_values(std::vector<std::int64_t> shape, NumericFormat fmt,
                           std::span<const double> values) {
  Tensor t(std::move(shape), fmt);
  if (static_cast<std::int64_t>(values.size()) != t.size_) {
    throw ValidationError("value count " + std::to_string(values.size()) +
                          " does not match shape " + t.shape_str());
  }
  for (std::int64_t i = 0; i < t.size_; ++i) t.set(i, values[static_cast<std::size_t>(i)]);
  return t;
}

std::int64_t Tensor::extent(std::int64_t axis) const {
  if (axis < 0 || axis >= rank()) {
    throw ValidationError("axis " + std::to_string(axis) + " out of range for rank " +
                          std::to_string(rank()));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

void Tensor::fill(double v) {
  for (std::int64_t i = 0; i < size_; ++i) set(i, v);
}

std::int64_t Tensor::flat_index(std::span<const std::int64_t> idx) const {
  if (static_cast<std::int64_t>(idx.size()) != rank()) {
    throw ValidationError("index rank " + std::to_string(idx.size()) +
                          " does not match tensor rank " + std::to_string(rank()));
  }
  std::int64_t flat = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] < 0 || idx[a] >= shape_[a]) {
      throw ValidationError("index out of range on axis " + std::to_string(a));
    }
    flat = flat * shape_[a] + idx[a];
  }
  return flat;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i != 0) os << ", ";
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ValidationError("matmul expects rank-2 tensors, got " + a.shape_str() + " and " +
                          b.shape_str());
  }
  if (a.extent(1) != b.extent(0)) {
    throw ValidationError("matmul inner extents differ: " + a.shape_str() + " vs " +
                          b.shape_str());
  }
  if (a.format() != b.format()) {
    throw ValidationError("matmul operands must share one numeric format");
  }
  const std::int64_t m = a.extent(0);
  const std::int64_t k = a.extent(1);
  const std::int64_t n = b.extent(1);
  const FormatRounder rnd{a.format()};

  Tensor c({m, n}, a.format());
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) {
        acc = rnd(acc + rnd(a.at(i * k + t) * b.at(t * n + j)));
      }
      c.set(i * n + j, acc);
    }
  }
  return c;
}

Tensor softmax_lastdim(const Tensor& x) {
  if (x.rank() < 1) {
    throw ValidationError("softmax_lastdim expects rank >= 1");
  }
  const std::int64_t width = x.extent(x.rank() - 1);
  const std::int64_t rows = x.size() / width;
  const FormatRounder rnd{x.format()};

  for (std::int64_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.at(i))) {
      throw NumericError("softmax_lastdim input contains a non-finite value");
    }
  }

  Tensor y(x.shape(), x.format());
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t base = r * width;
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < width; ++j) row_max = std::max(row_max, x.at(base + j));
    double denom = 0.0;
    for (std::int64_t j = 0; j < width; ++j) {
      const double e = rnd(std::exp(rnd(x.at(base + j) - row_max)));
      y.set(base + j, e);
      denom = rnd(denom + e);
    }
    for (std::int64_t j = 0; j < width; ++j) {
      y.set(base + j, rnd(y.at(base + j) / denom));
    }
  }
  return y;
}

}  // namespace evomem
