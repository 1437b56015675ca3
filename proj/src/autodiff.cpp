// SPDX-License-Identifier: Apache-2.0
#include "agff/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

#include "agff/errors.hpp"

namespace agff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap as_mat(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
MatMap as_mat(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}
ConstVecMap as_vec(const Tensor& t) {
  return ConstVecMap(t.data(), static_cast<Eigen::Index>(t.size()));
}
VecMap as_vec(Tensor& t) {
  return VecMap(t.data(), static_cast<Eigen::Index>(t.size()));
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) +
                   " and " + shape_string(b));
}

void same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void accumulate(Tensor& dst, const Tensor& src) {
  as_vec(dst) += as_vec(src);
}

}  // namespace

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

const Tensor& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  Node node;
  node.external = &p.value;
  node.param = &p;
  node.requires_grad = record_;
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::reference(const Tensor& value) {
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.param) return n.param->grad;
  if (n.grad_live) return n.grad;
  return Tensor(value(v.id()).shape());
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  n.grad_live = true;
  if (n.param) return n.param->grad;
  if (n.grad.shape() != value(id).shape()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

Var Tape::push(Tensor value, std::vector<std::size_t> parents, BackwardFn fn,
               const char* op) {
  if (!value.all_finite()) {
    throw NumericalError(std::string(op) + " produced a non-finite value");
  }
  Node node;
  node.value = std::move(value);
  if (record_) {
    node.requires_grad = std::any_of(parents.begin(), parents.end(),
                                     [&](std::size_t p) { return nodes_[p].requires_grad; });
    if (node.requires_grad) node.backward = std::move(fn);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss lives on another tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(value(loss.id()).shape()));
  }
  if (!record_) throw ContractError("backward: tape was created without recording");
  grad_buffer(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad_live) n.backward(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor out = a.value();
  as_vec(out) += as_vec(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad_buffer(ib), g);
  }, "add");
}

Var sub(Var a, Var b) {
  same_tape(a, b, "sub");
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  Tensor out = a.value();
  as_vec(out) -= as_vec(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.requires_grad(ib)) as_vec(t.grad_buffer(ib)) -= as_vec(g);
  }, "sub");
}

Var mul(Var a, Var b) {
  same_tape(a, b, "mul");
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  Tensor out = a.value();
  as_vec(out).array() *= as_vec(b.value()).array();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) {
      as_vec(t.grad_buffer(ia)).array() += as_vec(g).array() * as_vec(t.value(ib)).array();
    }
    if (t.requires_grad(ib)) {
      as_vec(t.grad_buffer(ib)).array() += as_vec(g).array() * as_vec(t.value(ia)).array();
    }
  }, "mul");
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  as_vec(out) *= factor;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    as_vec(t.grad_buffer(ia)) += factor * as_vec(t.grad_buffer(self));
  }, "scale");
}

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  as_vec(out).array() += offset;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    accumulate(t.grad_buffer(ia), t.grad_buffer(self));
  }, "add_scalar");
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto y = as_vec(t.value(self)).array();
    as_vec(t.grad_buffer(ia)).array() += as_vec(t.grad_buffer(self)).array() * (1.0 - y * y);
  }, "tanh");
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = stable_sigmoid(v);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto y = as_vec(t.value(self)).array();
    as_vec(t.grad_buffer(ia)).array() += as_vec(t.grad_buffer(self)).array() * y * (1.0 - y);
  }, "sigmoid");
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t ia = a.id(), ib = b.id();
  Tape& tape = a.tape();

  if (av.rank() == 2 && bv.rank() == 2) {
    if (av.cols() != bv.rows()) shape_mismatch("matmul", av.shape(), bv.shape());
    Tensor out({av.rows(), bv.cols()});
    as_mat(out).noalias() = as_mat(av) * as_mat(bv);
    return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
      const auto g = as_mat(t.grad_buffer(self));
      if (t.requires_grad(ia)) {
        as_mat(t.grad_buffer(ia)).noalias() += g * as_mat(t.value(ib)).transpose();
      }
      if (t.requires_grad(ib)) {
        as_mat(t.grad_buffer(ib)).noalias() += as_mat(t.value(ia)).transpose() * g;
      }
    }, "matmul");
  }
  if (av.rank() == 2 && bv.rank() == 1) {
    if (av.cols() != bv.size()) shape_mismatch("matmul", av.shape(), bv.shape());
    Tensor out({av.rows()});
    as_vec(out).noalias() = as_mat(av) * as_vec(bv);
    return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
      const auto g = as_vec(t.grad_buffer(self));
      if (t.requires_grad(ia)) {
        as_mat(t.grad_buffer(ia)).noalias() += g * as_vec(t.value(ib)).transpose();
      }
      if (t.requires_grad(ib)) {
        as_vec(t.grad_buffer(ib)).noalias() += as_mat(t.value(ia)).transpose() * g;
      }
    }, "matmul");
  }
  if (av.rank() == 1 && bv.rank() == 2) {
    if (av.size() != bv.rows()) shape_mismatch("matmul", av.shape(), bv.shape());
    Tensor out({bv.cols()});
    as_vec(out).noalias() = as_mat(bv).transpose() * as_vec(av);
    return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
      const auto g = as_vec(t.grad_buffer(self));
      if (t.requires_grad(ia)) {
        as_vec(t.grad_buffer(ia)).noalias() += as_mat(t.value(ib)) * g;
      }
      if (t.requires_grad(ib)) {
        as_mat(t.grad_buffer(ib)).noalias() += as_vec(t.value(ia)) * g.transpose();
      }
    }, "matmul");
  }
  shape_mismatch("matmul", av.shape(), bv.shape());
}

Var linear(Var x, Var weight, std::optional<Var> bias) {
  same_tape(x, weight, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (wv.rank() != 2 || xv.rank() < 1 || xv.rank() > 2 || xv.cols() != wv.cols()) {
    shape_mismatch("linear", xv.shape(), wv.shape());
  }
  if (bias) {
    same_tape(x, *bias, "linear");
    if (bias->shape() != Shape{wv.rows()}) shape_mismatch("linear", wv.shape(), bias->shape());
  }
  const std::size_t ix = x.id(), iw = weight.id();
  const std::size_t ib = bias ? bias->id() : 0;
  const bool has_bias = bias.has_value();
  std::vector<std::size_t> parents{ix, iw};
  if (has_bias) parents.push_back(ib);

  Tensor out(xv.rank() == 1 ? Shape{wv.rows()} : Shape{xv.rows(), wv.rows()});
  auto om = as_mat(out);
  om.noalias() = as_mat(xv) * as_mat(wv).transpose();
  if (has_bias) om.rowwise() += as_vec(bias->value()).transpose();

  return x.tape().push(std::move(out), std::move(parents),
                       [ix, iw, ib, has_bias](Tape& t, std::size_t self) {
    Tensor& gt = t.grad_buffer(self);
    const auto g = as_mat(gt);
    if (t.requires_grad(ix)) {
      as_mat(t.grad_buffer(ix)).noalias() += g * as_mat(t.value(iw));
    }
    if (t.requires_grad(iw)) {
      as_mat(t.grad_buffer(iw)).noalias() += g.transpose() * as_mat(t.value(ix));
    }
    if (has_bias && t.requires_grad(ib)) {
      as_vec(t.grad_buffer(ib)) += g.colwise().sum().transpose();
    }
  }, "linear");
}

Var concat(Var a, Var b) {
  same_tape(a, b, "concat");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() < 1 || av.rank() > 2 || av.rows() != bv.rows()) {
    shape_mismatch("concat", av.shape(), bv.shape());
  }
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Shape shape = av.shape();
  shape.back() = ca + cb;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib},
                       [ia, ib, rows, ca, cb](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
    }
  }, "concat");
}

// ---------------------------------------------------------------------------
// Softmax and loss

namespace {

Tensor softmax_values(const Tensor& logits) {
  Tensor out = logits;
  const double mx = *std::max_element(out.values().begin(), out.values().end());
  double total = 0.0;
  for (double& v : out.values()) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : out.values()) v /= total;
  return out;
}

}  // namespace

Var softmax(Var logits) {
  if (logits.value().rank() != 1 || logits.value().empty()) {
    throw ShapeError("softmax: expected a non-empty vector, got " +
                     shape_string(logits.shape()));
  }
  const std::size_t ia = logits.id();
  return logits.tape().push(softmax_values(logits.value()), {ia},
                            [ia](Tape& t, std::size_t self) {
    const auto y = as_vec(t.value(self));
    const auto g = as_vec(t.grad_buffer(self));
    const double dot = g.dot(y);
    as_vec(t.grad_buffer(ia)).array() += y.array() * (g.array() - dot);
  }, "softmax");
}

CrossEntropy softmax_cross_entropy(Var logits, std::size_t label) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 1 || lv.size() < 2) {
    throw ShapeError("softmax_cross_entropy: expected at least 2 logits, got " +
                     shape_string(lv.shape()));
  }
  if (label >= lv.size()) {
    throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(lv.size()) + " classes");
  }
  Tensor probs = softmax_values(lv);
  const double mx = *std::max_element(lv.values().begin(), lv.values().end());
  double sum = 0.0;
  for (double v : lv.values()) sum += std::exp(v - mx);
  const double loss = std::log(sum) + mx - lv[label];

  const std::size_t ia = logits.id();
  Var out = logits.tape().push(Tensor::scalar(loss), {ia},
                               [ia, probs, label](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    Tensor& gl = t.grad_buffer(ia);
    for (std::size_t c = 0; c < probs.size(); ++c) {
      gl[c] += g * (probs[c] - (c == label ? 1.0 : 0.0));
    }
  }, "softmax_cross_entropy");
  return {out, std::move(probs)};
}

// ---------------------------------------------------------------------------
// Dropout, lookups

Var dropout(Var x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.shape());
  for (double& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = x.value();
  as_vec(out).array() *= as_vec(mask).array();
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), {ix},
                       [ix, mask = std::move(mask)](Tape& t, std::size_t self) {
    as_vec(t.grad_buffer(ix)).array() +=
        as_vec(t.grad_buffer(self)).array() * as_vec(mask).array();
  }, "dropout");
}

Var embedding_lookup(Var table, std::span<const std::uint32_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("embedding_lookup: table must be a matrix");
  const std::size_t k = tv.cols();
  Tensor out({ids.size(), k});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) +
                       " out of range for table with " + std::to_string(tv.rows()) + " rows");
    }
    std::copy_n(tv.data() + ids[i] * k, k, out.data() + i * k);
  }
  const std::size_t it = table.id();
  std::vector<std::uint32_t> rows(ids.begin(), ids.end());
  return table.tape().push(std::move(out), {it},
                           [it, rows = std::move(rows), k](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gt = t.grad_buffer(it);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* dst = gt.data() + rows[i] * k;
      const double* src = g.data() + i * k;
      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
    }
  }, "embedding_lookup");
}

Var sparse_matvec(Var weight, const SparseVector& s) {
  const Tensor& wv = weight.value();
  if (wv.rank() != 2 || wv.cols() != s.dim) {
    shape_mismatch("sparse_matvec", wv.shape(), Shape{s.dim});
  }
  const std::size_t rows = wv.rows(), cols = wv.cols();
  Tensor out({rows});
  for (const auto& [j, v] : s.entries) {
    if (j >= cols) throw IndexError("sparse_matvec: entry index out of range");
    for (std::size_t r = 0; r < rows; ++r) out[r] += wv[r * cols + j] * v;
  }
  const std::size_t iw = weight.id();
  return weight.tape().push(std::move(out), {iw},
                            [iw, entries = s.entries, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gw = t.grad_buffer(iw);
    for (const auto& [j, v] : entries) {
      for (std::size_t r = 0; r < rows; ++r) gw[r * cols + j] += g[r] * v;
    }
  }, "sparse_matvec");
}

// ---------------------------------------------------------------------------
// LSTM

Var lstm(Var inputs, const LstmWeights& w, bool reverse) {
  same_tape(inputs, w.w_ih, "lstm");
  same_tape(inputs, w.w_hh, "lstm");
  same_tape(inputs, w.bias, "lstm");
  const Tensor& x = inputs.value();
  const Tensor& w_ih = w.w_ih.value();
  const Tensor& w_hh = w.w_hh.value();
  const Tensor& b = w.bias.value();
  if (x.rank() != 2 || x.rows() == 0) {
    throw ShapeError("lstm: inputs must be a non-empty matrix, got " + shape_string(x.shape()));
  }
  if (w_hh.rank() != 2 || w_hh.rows() != 4 * w_hh.cols()) {
    throw ShapeError("lstm: recurrent weights must be 4H x H, got " + shape_string(w_hh.shape()));
  }
  const std::size_t n = x.rows(), k = x.cols(), hd = w_hh.cols(), g4 = 4 * hd;
  if (w_ih.rank() != 2 || w_ih.rows() != g4) shape_mismatch("lstm", w_ih.shape(), w_hh.shape());
  if (w_ih.cols() != k) shape_mismatch("lstm", x.shape(), w_ih.shape());
  if (b.shape() != Shape{g4}) shape_mismatch("lstm", w_hh.shape(), b.shape());

  // Activated gates (n x 4H), cell states and their tanh (n x H), outputs.
  Tensor gates({n, g4});
  as_mat(gates).noalias() = as_mat(x) * as_mat(w_ih).transpose();
  as_mat(gates).rowwise() += as_vec(b).transpose();
  Tensor cells({n, hd});
  Tensor cell_tanh({n, hd});
  Tensor out({n, hd});

  const auto whh = as_mat(w_hh);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hd));
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hd));
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t pos = reverse ? n - 1 - step : step;
    double* a = gates.data() + pos * g4;
    VecMap(a, static_cast<Eigen::Index>(g4)).noalias() += whh * h_prev;
    for (std::size_t j = 0; j < hd; ++j) {
      const double ig = stable_sigmoid(a[j]);
      const double fg = stable_sigmoid(a[hd + j]);
      const double cg = std::tanh(a[2 * hd + j]);
      const double og = stable_sigmoid(a[3 * hd + j]);
      a[j] = ig;
      a[hd + j] = fg;
      a[2 * hd + j] = cg;
      a[3 * hd + j] = og;
      const double c = fg * c_prev[static_cast<Eigen::Index>(j)] + ig * cg;
      const double tc = std::tanh(c);
      cells.at(pos, j) = c;
      cell_tanh.at(pos, j) = tc;
      out.at(pos, j) = og * tc;
    }
    for (std::size_t j = 0; j < hd; ++j) {
      h_prev[static_cast<Eigen::Index>(j)] = out.at(pos, j);
      c_prev[static_cast<Eigen::Index>(j)] = cells.at(pos, j);
    }
  }

  const std::size_t ix = inputs.id(), iw = w.w_ih.id(), ir = w.w_hh.id(), ib = w.bias.id();
  return inputs.tape().push(
      std::move(out), {ix, iw, ir, ib},
      [ix, iw, ir, ib, n, hd, g4, reverse, gates = std::move(gates),
       cells = std::move(cells), cell_tanh = std::move(cell_tanh)](Tape& t, std::size_t self) {
        const Tensor& dout = t.grad_buffer(self);
        const Tensor& hout = t.value(self);
        const auto whh = as_mat(t.value(ir));

        Tensor dpre({n, g4});       // gradient w.r.t. pre-activation gates
        Tensor h_before({n, hd});   // hidden state fed into each position
        Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hd));
        Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hd));

        for (std::size_t step = n; step-- > 0;) {
          const std::size_t pos = reverse ? n - 1 - step : step;
          const bool has_prev = step > 0;
          const std::size_t prev = reverse ? pos + 1 : pos - 1;
          const double* a = gates.data() + pos * g4;
          double* da = dpre.data() + pos * g4;
          for (std::size_t j = 0; j < hd; ++j) {
            const auto je = static_cast<Eigen::Index>(j);
            const double ig = a[j], fg = a[hd + j], cg = a[2 * hd + j], og = a[3 * hd + j];
            const double tc = cell_tanh.at(pos, j);
            const double c_prev = has_prev ? cells.at(prev, j) : 0.0;
            const double dh = dout.at(pos, j) + dh_next[je];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[je];
            da[j] = dc * cg * ig * (1.0 - ig);
            da[hd + j] = dc * c_prev * fg * (1.0 - fg);
            da[2 * hd + j] = dc * ig * (1.0 - cg * cg);
            da[3 * hd + j] = dh * tc * og * (1.0 - og);
            dc_next[je] = dc * fg;
            h_before.at(pos, j) = has_prev ? hout.at(prev, j) : 0.0;
          }
          dh_next.noalias() =
              whh.transpose() * ConstVecMap(da, static_cast<Eigen::Index>(g4));
        }

        const auto dp = as_mat(dpre);
        if (t.requires_grad(ix)) {
          as_mat(t.grad_buffer(ix)).noalias() += dp * as_mat(t.value(iw));
        }
        if (t.requires_grad(iw)) {
          as_mat(t.grad_buffer(iw)).noalias() += dp.transpose() * as_mat(t.value(ix));
        }
        if (t.requires_grad(ir)) {
          as_mat(t.grad_buffer(ir)).noalias() += dp.transpose() * as_mat(h_before);
        }
        if (t.requires_grad(ib)) {
          as_vec(t.grad_buffer(ib)) += dp.colwise().sum().transpose();
        }
      },
      "lstm");
}

}  // namespace agff
