// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over dense tensors.
//
// A Tape records every operation in append order. backward() replays the
// records in strict reverse order, so the append order is the topological
// order. Parameters live outside the tape: a parameter node references the
// Parameter's value without copying it and accumulates its gradient straight
// into Parameter::grad. A tape belongs to one thread; separate tapes may run
// concurrently against the same read-only parameters as long as gradients are
// not recorded into shared Parameters.
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agff/rng.hpp"
#include "agff/sparse.hpp"
#include "agff/tensor.hpp"

namespace agff {

/// A learnable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  /// With `record == false` no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Untracked input.
  Var constant(Tensor value);
  /// Tracked input whose gradient is readable through grad() after backward.
  Var leaf(Tensor value);
  /// Tracked parameter. The value is referenced, gradients accumulate into
  /// `param.grad`, which must outlive the tape.
  Var param(Parameter& param);
  /// Untracked view of an external tensor, which must outlive the tape.
  Var reference(const Tensor& value);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient of a node after backward(); zero tensor if the node was never
  /// reached.
  Tensor grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse
  /// append order. Throws ContractError unless `loss` is a one-element tensor.
  void backward(Var loss);

  // Operation plumbing.
  Var push(Tensor value, std::vector<std::size_t> parents, BackwardFn fn,
           const char* op);
  /// Mutable gradient buffer of node `id`, allocated (zeroed) on first use.
  Tensor& grad_buffer(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].grad_live; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    const Tensor* external = nullptr;
    Parameter* param = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
    bool grad_live = false;
  };

  bool record_;
  // deque: references returned by value() stay valid as the tape grows
  std::deque<Node> nodes_;
};

// Differentiable operations. All inputs must belong to the same tape.
// Shape violations raise ShapeError naming both shapes; every result is
// checked for NaN/Inf and raises NumericalError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// (m x k)(k x n), (m x k)(k), or (k)(k x n).
Var matmul(Var a, Var b);
/// x W^T + b for x of shape (in) or (n x in), W (out x in), b (out).
Var linear(Var x, Var weight, std::optional<Var> bias = std::nullopt);
/// Concatenation along the last axis; rank and leading dims must agree.
Var concat(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
/// Softmax over a vector, stabilised by max subtraction.
Var softmax(Var logits);

struct CrossEntropy {
  Var loss;     ///< shape {1}
  Tensor probs; ///< softmax(logits)
};
/// Loss -ln softmax(logits)[label]; gradient w.r.t. logits is probs - onehot.
CrossEntropy softmax_cross_entropy(Var logits, std::size_t label);

/// Inverted dropout. Identity when `training` is false or `p == 0`;
/// otherwise every entry consumes exactly one draw from `rng`.
Var dropout(Var x, double p, Rng& rng, bool training);

/// Rows of `table` (V x k) selected by `ids`, giving (n x k).
Var embedding_lookup(Var table, std::span<const std::uint32_t> ids);
/// W s for W (out x dim) and a sparse s; touches only nonzero columns.
Var sparse_matvec(Var weight, const SparseVector& s);

struct LstmWeights {
  Var w_ih;  ///< (4H x k), gate blocks ordered input|forget|cell|output
  Var w_hh;  ///< (4H x H)
  Var bias;  ///< (4H)
};
/// One LSTM direction over the rows of `inputs` (n x k) with zero initial
/// state. Output row t is the hidden state at position t; with `reverse` the
/// recurrence runs from the last row to the first. Backward is BPTT.
Var lstm(Var inputs, const LstmWeights& weights, bool reverse);

}  // namespace agff
