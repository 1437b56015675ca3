// SPDX-License-Identifier: Apache-2.0
#include "agff/optim.hpp"

#include <cmath>
#include <string>

#include "agff/errors.hpp"

namespace agff {

void Adam::step(std::span<Parameter* const> params, double lr) {
  if (!(lr > 0.0)) throw ContractError("adam: learning rate must be positive");
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.value.shape() != m_[i].shape() || p.grad.shape() != m_[i].shape()) {
      throw ShapeError("adam: parameter " + p.name + " has shape " +
                       shape_string(p.value.shape()) + ", moments have " +
                       shape_string(m_[i].shape()));
    }
  }

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2, eps = options_.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    double* theta = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    if (!p.value.all_finite()) {
      throw NumericalError("adam: parameter " + p.name + " became non-finite");
    }
  }
}

}  // namespace agff
