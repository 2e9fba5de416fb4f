#pragma once

#include <random>

#include "tloom/tensor.hpp"

namespace testutil {

inline tloom::Tensor random_tensor(std::mt19937& rng, const tloom::Shape& shape,
                                   float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(shape.count()));
  for (auto& x : v) x = dist(rng);
  return tloom::Tensor(shape, std::move(v));
}

inline tloom::Shape random_shape(std::mt19937& rng, int min_rank, int max_rank,
                                 std::int64_t min_extent, std::int64_t max_extent) {
  std::uniform_int_distribution<int> rank_dist(min_rank, max_rank);
  std::uniform_int_distribution<std::int64_t> ext_dist(min_extent, max_extent);
  const int rank = rank_dist(rng);
  std::vector<std::int64_t> extents(static_cast<std::size_t>(rank));
  for (auto& e : extents) e = ext_dist(rng);
  return tloom::Shape(std::span<const std::int64_t>(extents));
}

}  // namespace testutil
