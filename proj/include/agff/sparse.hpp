// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace agff {

/// Sparse vector with strictly increasing indices.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool is_zero() const noexcept { return entries.empty(); }
  double norm() const;
  std::vector<double> to_dense() const;
};

}  // namespace agff
