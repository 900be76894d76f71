#include "evomem/rng.hpp"

namespace evomem {

Tensor random_uniform(std::vector<std::int64_t> shape, NumericFormat fmt, SeededRng& rng,
                      double lo, double hi) {
  Tensor t(std::move(shape), fmt);
  for (std::int64_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

}  // namespace evomem
