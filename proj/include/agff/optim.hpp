// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "agff/autodiff.hpp"

namespace agff {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are allocated lazily on the first step
/// and matched to parameters by position, so the same span must be passed
/// on every call.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// One update of every parameter from its `grad`. Throws ShapeError if the
  /// parameter list changed shape since the first step and NumericalError if
  /// an update produces a non-finite value.
  void step(std::span<Parameter* const> params, double lr);

  std::uint64_t steps() const noexcept { return t_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  AdamOptions options_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace agff
