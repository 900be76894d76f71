#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "evomem/errors.hpp"
#include "evomem/rng.hpp"
#include "evomem/tensor.hpp"

using namespace evomem;

namespace {

Tensor make2(std::int64_t m, std::int64_t n, std::vector<double> v,
             NumericFormat fmt = NumericFormat::F64) {
  return Tensor::from_values({m, n}, fmt, v);
}

}  // namespace

TEST_CASE("matmul identity") {
  const Tensor a = make2(2, 2, {1, 0, 0, 1});
  const Tensor b = make2(2, 2, {3, 4, 5, 6});
  const Tensor c = matmul(a, b);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(c.at(i) == b.at(i));
}

TEST_CASE("matmul 2x2 hand expansion") {
  const Tensor a = make2(2, 2, {1, 2, 3, 4});
  const Tensor b = make2(2, 2, {5, 6, 7, 8});
  const Tensor c = matmul(a, b);
  CHECK(c.at(0) == 19.0);
  CHECK(c.at(1) == 22.0);
  CHECK(c.at(2) == 43.0);
  CHECK(c.at(3) == 50.0);
}

TEST_CASE("matmul zeros") {
  const Tensor a({3, 2}, NumericFormat::F64);
  SeededRng rng(11);
  const Tensor b = random_uniform({2, 4}, NumericFormat::F64, rng);
  const Tensor c = matmul(a, b);
  for (std::int64_t i = 0; i < c.size(); ++i) CHECK(c.at(i) == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a({2, 3}, NumericFormat::F64);
  const Tensor b({2, 2}, NumericFormat::F64);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2, 3)"), ValidationError);
}

TEST_CASE("matmul agrees exactly with a triple-loop oracle in F64") {
  SeededRng rng(7);
  const std::int64_t m = 5, k = 7, n = 4;
  const Tensor a = random_uniform({m, k}, NumericFormat::F64, rng);
  const Tensor b = random_uniform({k, n}, NumericFormat::F64, rng);
  const Tensor c = matmul(a, b);
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;  // same ascending-index order as the implementation
      for (std::int64_t t = 0; t < k; ++t) acc += a.at(i * k + t) * b.at(t * n + j);
      CHECK(c.at(i * n + j) == acc);
    }
  }
}

TEST_CASE("softmax uniform on constant rows") {
  const Tensor x = Tensor::from_values({4}, NumericFormat::F64, std::vector<double>{0, 0, 0, 0});
  const Tensor y = softmax_lastdim(x);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance") {
  SeededRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3), c = rng.uniform(-50, 50);
    const Tensor x0 = Tensor::from_values({3}, NumericFormat::F64, std::vector<double>{0, a, b});
    const Tensor x1 =
        Tensor::from_values({3}, NumericFormat::F64, std::vector<double>{c, c + a, c + b});
    const Tensor y0 = softmax_lastdim(x0);
    const Tensor y1 = softmax_lastdim(x1);
    for (std::int64_t i = 0; i < 3; ++i) {
      CHECK(y0.at(i) == doctest::Approx(y1.at(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax closed form for [0, ln 2]") {
  const Tensor x =
      Tensor::from_values({2}, NumericFormat::F64, std::vector<double>{0.0, std::log(2.0)});
  const Tensor y = softmax_lastdim(x);
  CHECK(y.at(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(y.at(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax rejects NaN input") {
  const Tensor x = Tensor::from_values(
      {2}, NumericFormat::F64,
      std::vector<double>{0.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(softmax_lastdim(x), NumericError);
}

TEST_CASE("softmax rows sum to one") {
  SeededRng rng(5);
  const Tensor x32 = random_uniform({6, 17}, NumericFormat::F32, rng, -4, 4);
  const Tensor y32 = softmax_lastdim(x32);
  const Tensor x64 = random_uniform({6, 17}, NumericFormat::F64, rng, -4, 4);
  const Tensor y64 = softmax_lastdim(x64);
  for (std::int64_t r = 0; r < 6; ++r) {
    double s32 = 0.0, s64 = 0.0;
    for (std::int64_t j = 0; j < 17; ++j) {
      s32 += y32.at(r * 17 + j);
      s64 += y64.at(r * 17 + j);
    }
    CHECK(std::abs(s32 - 1.0) < 1e-6);
    CHECK(std::abs(s64 - 1.0) < 1e-12);
  }
}

TEST_CASE("round_to_format examples") {
  CHECK(round_to_format(1.0, NumericFormat::BF16) == 1.0);
  // ulp at 1.0 is 2^-7 for bf16; adding 2^-9 is a quarter ulp, rounds down.
  CHECK(round_to_format(1.0 + 0x1.0p-9, NumericFormat::BF16) == 1.0);
  // Neighbouring bf16 values around pi are 3.140625 and 3.15625.
  CHECK(round_to_format(3.1415927, NumericFormat::BF16) == 3.140625);
}

TEST_CASE("round_to_format bf16 neighbour enumeration oracle") {
  // Enumerate the bf16 grid around pi from first principles: values are
  // m * 2^(1-7) for integer m when 2 <= |x| < 4.
  const double ulp = 0x1.0p-6;
  const double below = std::floor(3.1415927 / ulp) * ulp;
  const double above = below + ulp;
  CHECK(below == 3.140625);
  CHECK(above == 3.15625);
  const double rounded = round_to_format(3.1415927, NumericFormat::BF16);
  CHECK(std::abs(rounded - 3.1415927) <= std::abs(above - 3.1415927));
  CHECK(std::abs(rounded - 3.1415927) <= std::abs(below - 3.1415927));
}

TEST_CASE("round_to_format overflow saturates and flags") {
  const RoundedValue r = round_to_format_checked(1e60, NumericFormat::BF16);
  CHECK(r.overflow);
  CHECK(std::isinf(r.value));
  CHECK(r.value > 0);
  const RoundedValue rneg = round_to_format_checked(-1e60, NumericFormat::F16);
  CHECK(rneg.overflow);
  CHECK(rneg.value < 0);
  const RoundedValue fine = round_to_format_checked(1.5, NumericFormat::F16);
  CHECK_FALSE(fine.overflow);
  CHECK(fine.value == 1.5);
}

TEST_CASE("round_to_format ties to even") {
  // 1 + 2^-8 sits exactly between bf16 neighbours 1.0 and 1 + 2^-7.
  CHECK(round_to_format(1.0 + 0x1.0p-8, NumericFormat::BF16) == 1.0);
  // 1 + 3*2^-8 sits between 1 + 2^-7 and 1 + 2^-6; the even neighbour wins.
  CHECK(round_to_format(1.0 + 3 * 0x1.0p-8, NumericFormat::BF16) == 1.0 + 0x1.0p-6);
}

TEST_CASE("round_to_format is idempotent on random finite values") {
  SeededRng rng(17);
  const NumericFormat formats[] = {NumericFormat::F64, NumericFormat::F32, NumericFormat::BF16,
                                   NumericFormat::F16};
  for (NumericFormat fmt : formats) {
    for (int i = 0; i < 100000; ++i) {
      // Wide dynamic range including subnormal territory of the small formats.
      const double mag = std::exp(rng.uniform(-60.0, 60.0));
      const double x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
      const double once = round_to_format(x, fmt);
      CHECK(round_to_format(once, fmt) == once);
    }
  }
}

TEST_CASE("round_to_format halves store exactly in f16 subnormal range") {
  // Smallest f16 normal is 2^-14; subnormals go down to 2^-24.
  CHECK(round_to_format(0x1.0p-24, NumericFormat::F16) == 0x1.0p-24);
  CHECK(round_to_format(0x1.0p-25, NumericFormat::F16) == 0.0);  // ties to even 0
  CHECK(round_to_format(0x1.8p-24, NumericFormat::F16) == 0x1.0p-23);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 0}, NumericFormat::F64), ValidationError);
  Tensor t({2, 2}, NumericFormat::BF16);
  t.set(0, 3.1415927);
  CHECK(t.at(0) == 3.140625);  // stored values are representable: re-round is a no-op
  CHECK(t.emulated_bytes() == 8);
  const std::vector<std::int64_t> idx{1, 1};
  CHECK(t.flat_index(idx) == 3);
  const std::vector<std::int64_t> bad{2, 0};
  CHECK_THROWS_AS(t.flat_index(bad), ValidationError);
}

TEST_CASE("from_values length mismatch") {
  CHECK_THROWS_AS(Tensor::from_values({2, 2}, NumericFormat::F64, std::vector<double>{1.0}),
                  ValidationError);
}
