#include "dmtn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "dmtn/errors.hpp"
#include "dmtn/kernels.hpp"

namespace dmtn::ad {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid()) throw ArgumentError(std::string(op) + ": unbound variable");
  if (&a.tape() != &b.tape()) throw ArgumentError(std::string(op) + ": operands on different tapes");
  return a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw ArgumentError(std::string(op) + ": unbound variable");
  return a.tape();
}

void require_vector(const Shape& s, const char* op) {
  if (!s.is_vector()) throw DimensionError(std::string(op) + ": expected a vector, got " + s.str());
}

void require_scalar(const Shape& s, const char* op) {
  if (!s.is_scalar()) throw DimensionError(std::string(op) + ": expected a [1] tensor, got " + s.str());
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor softmax_of(const Tensor& x) {
  Tensor y(x.shape());
  const double mx = *std::max_element(x.data().begin(), x.data().end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    total += y[i];
  }
  for (double& v : y.data()) v /= total;
  return y;
}

Tape::Node make(Op op, std::uint32_t a = 0, std::uint32_t b = 0) {
  Tape::Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  return n;
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
#ifdef DMTN_CHECK_FINITE
  if (!node.external) check_finite(node.value, "tape op");
#endif
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n = make(Op::kConstant);
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(const ParameterStore& store, std::string_view name) {
  std::string key(name);
  if (auto it = param_ids_.find(key); it != param_ids_.end()) return Var(this, it->second);
  Node n = make(Op::kParameter);
  n.external = &store.get(name);
  Var v = push(std::move(n));
  param_ids_.emplace(key, v.id());
  param_names_.push_back(std::move(key));
  param_leaf_ids_.push_back(v.id());
  return v;
}

Tensor& Tape::grad_of(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(value(id).shape());
  return n.grad;
}

GradientMap Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ArgumentError("backward: loss belongs to another tape");
  if (!loss.shape().is_scalar()) {
    throw ArgumentError("backward: loss must be a [1] tensor, got " + loss.shape().str());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_of(loss.id())[0] = 1.0;
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    propagate(n);
  }
  GradientMap out;
  for (std::size_t i = 0; i < param_leaf_ids_.size(); ++i) {
    Node& leaf = nodes_[param_leaf_ids_[i]];
    if (leaf.grad.size() != 0) out.emplace(param_names_[i], std::move(leaf.grad));
  }
  return out;
}

void Tape::propagate(Node& n) {
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      return;
    case Op::kAdd: {
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      Tensor& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      return;
    }
    case Op::kSub: {
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      Tensor& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      return;
    }
    case Op::kMul: {
      const Tensor& a = value(n.a);
      const Tensor& b = value(n.b);
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      Tensor& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      return;
    }
    case Op::kAbs: {
      const Tensor& a = value(n.a);
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0);
        ga[i] += g[i] * s;
      }
      return;
    }
    case Op::kAffine: {
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.alpha * g[i];
      return;
    }
    case Op::kScale: {
      const Tensor& v = value(n.a);
      const double s = value(n.b)[0];
      Tensor& gv = grad_of(n.a);
      double gs = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        gv[i] += g[i] * s;
        gs += g[i] * v[i];
      }
      grad_of(n.b)[0] += gs;
      return;
    }
    case Op::kTanh: {
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      return;
    }
    case Op::kSigmoid: {
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      return;
    }
    case Op::kSoftmax: {
      const Tensor& y = n.value;
      const double gy = kernels::dot(g.data(), y.data());
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - gy);
      return;
    }
    case Op::kMatVec: {
      const Tensor& m = value(n.a);
      const Tensor& x = value(n.b);
      const std::size_t cols = x.size();
      const std::size_t rows = m.size() / cols;
      kernels::outer_acc(grad_of(n.a).data(), g.data(), x.data(), rows, cols);
      kernels::matvec_t_acc(m.data(), g.data(), grad_of(n.b).data(), rows, cols);
      return;
    }
    case Op::kContract: {
      const Tensor& w = value(n.a);
      const Tensor& v = value(n.b);
      const std::size_t len = v.size();
      std::size_t inner = 1;
      for (std::size_t d = n.index + 1; d < w.rank(); ++d) inner *= w.dim(d);
      const std::size_t outer = w.size() / (len * inner);
      if (inner == 1) {
        kernels::outer_acc(grad_of(n.a).data(), g.data(), v.data(), outer, len);
        kernels::matvec_t_acc(w.data(), g.data(), grad_of(n.b).data(), outer, len);
      } else {
        kernels::contract_mode_grad_w(g.data(), v.data(), grad_of(n.a).data(), outer, len, inner);
        kernels::contract_mode_grad_v(w.data(), g.data(), grad_of(n.b).data(), outer, len, inner);
      }
      return;
    }
    case Op::kBlock: {
      // ids = {col_offset, rows, cols}; index = row_offset
      const Tensor& w = value(n.a);
      Tensor& gw = grad_of(n.a);
      const bool r3 = w.rank() == 3;
      const std::size_t k = r3 ? w.dim(0) : 1;
      const std::size_t wr = w.dim(r3 ? 1 : 0), wc = w.dim(r3 ? 2 : 1);
      const std::size_t r0 = n.index, c0 = n.ids[0], rows = n.ids[1], cols = n.ids[2];
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            gw[(l * wr + r0 + i) * wc + c0 + j] += g[(l * rows + i) * cols + j];
      return;
    }
    case Op::kMatMul: {
      const Tensor& a = value(n.a);
      const Tensor& b = value(n.b);
      const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
      kernels::matmul_grad_a(g.data(), b.data(), grad_of(n.a).data(), m, k, p);
      kernels::matmul_grad_b(a.data(), g.data(), grad_of(n.b).data(), m, k, p);
      return;
    }
    case Op::kTranspose: {
      const std::size_t r = g.dim(0), c = g.dim(1);
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[j * r + i] += g[i * c + j];
      return;
    }
    case Op::kDot: {
      const Tensor& a = value(n.a);
      const Tensor& b = value(n.b);
      const double s = g[0];
      Tensor& ga = grad_of(n.a);
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += s * b[i];
      Tensor& gb = grad_of(n.b);
      for (std::size_t i = 0; i < b.size(); ++i) gb[i] += s * a[i];
      return;
    }
    case Op::kConcat:
    case Op::kStackRows: {
      std::size_t offset = 0;
      for (std::uint32_t in : n.inputs) {
        Tensor& gi = grad_of(in);
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offset + i];
        offset += gi.size();
      }
      return;
    }
    case Op::kEmbeddingRow: {
      Tensor& gt = grad_of(n.a);
      const std::size_t d = g.size();
      for (std::size_t j = 0; j < d; ++j) gt[n.index * d + j] += g[j];
      return;
    }
    case Op::kEmbeddingSum: {
      Tensor& gt = grad_of(n.a);
      const std::size_t d = g.size();
      for (std::size_t id : n.ids)
        for (std::size_t j = 0; j < d; ++j) gt[id * d + j] += g[j];
      return;
    }
    case Op::kCrossEntropy: {
      const Tensor p = softmax_of(value(n.a));
      Tensor& ga = grad_of(n.a);
      const double s = g[0];
      for (std::size_t i = 0; i < p.size(); ++i) {
        ga[i] += s * (p[i] - (i == n.index ? 1.0 : 0.0));
      }
      return;
    }
    case Op::kSumSquares: {
      const Tensor& a = value(n.a);
      Tensor& ga = grad_of(n.a);
      const double s = 2.0 * g[0];
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += s * a[i];
      return;
    }
    case Op::kElement: {
      grad_of(n.a)[n.index] += g[0];
      return;
    }
  }
}

namespace {

template <typename F>
Var unary(Var a, Op op, const char* name, F&& f) {
  Tape& t = tape_of(a, name);
  const Tensor& x = a.value();
  Tape::Node n = make(op, a.id());
  n.value = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f(x[i]);
  return t.push(std::move(n));
}

template <typename F>
Var binary(Var a, Var b, Op op, const char* name, F&& f) {
  Tape& t = same_tape(a, b, name);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x.shape(), y.shape(), name);
  Tape::Node n = make(op, a.id(), b.id());
  n.value = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f(x[i], y[i]);
  return t.push(std::move(n));
}

}  // namespace

Var add(Var a, Var b) {
  return binary(a, b, Op::kAdd, "add", [](double x, double y) { return x + y; });
}
Var sub(Var a, Var b) {
  return binary(a, b, Op::kSub, "sub", [](double x, double y) { return x - y; });
}
Var mul(Var a, Var b) {
  return binary(a, b, Op::kMul, "mul", [](double x, double y) { return x * y; });
}
Var abs(Var a) {
  return unary(a, Op::kAbs, "abs", [](double x) { return std::fabs(x); });
}
Var tanh(Var a) {
  return unary(a, Op::kTanh, "tanh", [](double x) { return std::tanh(x); });
}
Var sigmoid(Var a) { return unary(a, Op::kSigmoid, "sigmoid", stable_sigmoid); }

Var affine(Var a, double alpha, double beta) {
  Tape& t = tape_of(a, "affine");
  const Tensor& x = a.value();
  Tape::Node n = make(Op::kAffine, a.id());
  n.alpha = alpha;
  n.beta = beta;
  n.value = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = alpha * x[i] + beta;
  return t.push(std::move(n));
}

Var scale(Var v, Var s) {
  Tape& t = same_tape(v, s, "scale");
  require_scalar(s.shape(), "scale");
  const Tensor& x = v.value();
  const double k = s.value()[0];
  Tape::Node n = make(Op::kScale, v.id(), s.id());
  n.value = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * k;
  return t.push(std::move(n));
}

Var softmax(Var a) {
  Tape& t = tape_of(a, "softmax");
  require_vector(a.shape(), "softmax");
  Tape::Node n = make(Op::kSoftmax, a.id());
  n.value = softmax_of(a.value());
  return t.push(std::move(n));
}

Var matvec(Var m, Var x) {
  Tape& t = same_tape(m, x, "matvec");
  const Shape& ms = m.shape();
  const Shape& xs = x.shape();
  if (!ms.is_matrix() || !xs.is_vector() || ms[1] != xs[0]) {
    throw DimensionError("matvec: cannot multiply " + ms.str() + " by " + xs.str());
  }
  Tape::Node n = make(Op::kMatVec, m.id(), x.id());
  n.value = Tensor(Shape{ms[0]});
  kernels::matvec(m.value().data(), x.value().data(), n.value.data(), ms[0], ms[1]);
  return t.push(std::move(n));
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (!as.is_matrix() || !bs.is_matrix() || as[1] != bs[0]) {
    throw DimensionError("matmul: inner dimensions disagree for " + as.str() + " x " + bs.str());
  }
  Tape::Node n = make(Op::kMatMul, a.id(), b.id());
  n.value = Tensor(Shape{as[0], bs[1]});
  kernels::matmul(a.value().data(), b.value().data(), n.value.data(), as[0], as[1], bs[1]);
  return t.push(std::move(n));
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  const Shape& s = a.shape();
  if (!s.is_matrix()) throw DimensionError("transpose: expected a matrix, got " + s.str());
  const Tensor& x = a.value();
  Tape::Node n = make(Op::kTranspose, a.id());
  n.value = Tensor(Shape{s[1], s[0]});
  for (std::size_t i = 0; i < s[0]; ++i)
    for (std::size_t j = 0; j < s[1]; ++j) n.value[j * s[0] + i] = x[i * s[1] + j];
  return t.push(std::move(n));
}

Var contract(Var tv, Var v, std::size_t mode) {
  Tape& t = same_tape(tv, v, "contract");
  const Shape& ts = tv.shape();
  const Shape& vs = v.shape();
  if (ts.rank() < 2 || mode >= ts.rank() || !vs.is_vector() || ts[mode] != vs[0]) {
    throw DimensionError("contract: cannot contract mode " + std::to_string(mode) + " of " +
                         ts.str() + " with " + vs.str());
  }
  std::vector<std::size_t> dims;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ts.rank(); ++d) {
    if (d == mode) continue;
    dims.push_back(ts[d]);
    (d < mode ? outer : inner) *= ts[d];
  }
  Tape::Node n = make(Op::kContract, tv.id(), v.id());
  n.index = mode;
  n.value = Tensor(Shape(std::span<const std::size_t>(dims)));
  if (inner == 1) {
    kernels::matvec(tv.value().data(), v.value().data(), n.value.data(), outer, vs[0]);
  } else {
    kernels::contract_mode(tv.value().data(), v.value().data(), n.value.data(), outer, vs[0], inner);
  }
  return t.push(std::move(n));
}

Var contract_last(Var tv, Var v) { return contract(tv, v, tv.shape().rank() - 1); }

Var block(Var tv, std::size_t row_offset, std::size_t col_offset, std::size_t rows,
          std::size_t cols) {
  Tape& t = tape_of(tv, "block");
  const Shape& s = tv.shape();
  const bool ok_rank = s.rank() == 2 || s.rank() == 3;
  const std::size_t r_dim = s.rank() - 2, c_dim = s.rank() - 1;
  if (!ok_rank || row_offset + rows > s[r_dim] || col_offset + cols > s[c_dim]) {
    throw DimensionError("block: [" + std::to_string(rows) + "x" + std::to_string(cols) + "] at (" +
                         std::to_string(row_offset) + "," + std::to_string(col_offset) +
                         ") does not fit " + s.str());
  }
  const std::size_t k = s.rank() == 3 ? s[0] : 1;
  const std::size_t wr = s[r_dim], wc = s[c_dim];
  const Tensor& w = tv.value();
  Tape::Node n = make(Op::kBlock, tv.id());
  n.index = row_offset;
  n.ids = {col_offset, rows, cols};
  n.value = s.rank() == 3 ? Tensor(Shape{k, rows, cols}) : Tensor(Shape{rows, cols});
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        n.value[(l * rows + i) * cols + j] = w[(l * wr + row_offset + i) * wc + col_offset + j];
  return t.push(std::move(n));
}

Var dot(Var a, Var b) {
  Tape& t = same_tape(a, b, "dot");
  require_vector(a.shape(), "dot");
  require_same_shape(a.shape(), b.shape(), "dot");
  Tape::Node n = make(Op::kDot, a.id(), b.id());
  n.value = Tensor::scalar(kernels::dot(a.value().data(), b.value().data()));
  return t.push(std::move(n));
}

Var bilinear_slices(Var e1, Var w, Var e2) {
  const Shape& ws = w.shape();
  if (ws.rank() != 3 || !e1.shape().is_vector() || !e2.shape().is_vector() ||
      ws[1] != e1.shape()[0] || ws[2] != e2.shape()[0]) {
    throw DimensionError("bilinear_slices: slice tensor " + ws.str() + " does not fit " +
                         e1.shape().str() + " and " + e2.shape().str());
  }
  return matvec(contract_last(w, e2), e1);
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat: empty part list");
  Tape& t = tape_of(parts[0], "concat");
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat");
    require_vector(p.shape(), "concat");
    total += p.shape()[0];
  }
  Tape::Node n = make(Op::kConcat);
  n.value = Tensor(Shape{total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& x = p.value();
    std::copy(x.data().begin(), x.data().end(), n.value.data().begin() + offset);
    offset += x.size();
    n.inputs.push_back(p.id());
  }
  return t.push(std::move(n));
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ArgumentError("stack_rows: no rows");
  Tape& t = tape_of(rows[0], "stack_rows");
  const Shape first = rows[0].shape();
  require_vector(first, "stack_rows");
  Tape::Node n = make(Op::kStackRows);
  n.value = Tensor(Shape{rows.size(), first[0]});
  std::size_t offset = 0;
  for (const Var& r : rows) {
    same_tape(rows[0], r, "stack_rows");
    require_same_shape(first, r.shape(), "stack_rows");
    const Tensor& x = r.value();
    std::copy(x.data().begin(), x.data().end(), n.value.data().begin() + offset);
    offset += x.size();
    n.inputs.push_back(r.id());
  }
  return t.push(std::move(n));
}

Var embedding_row(Var table, std::size_t id) {
  Tape& t = tape_of(table, "embedding_row");
  const Shape& s = table.shape();
  if (!s.is_matrix()) throw DimensionError("embedding_row: table must be a matrix, got " + s.str());
  if (id >= s[0]) {
    throw ArgumentError("embedding_row: id " + std::to_string(id) + " outside table " + s.str());
  }
  const Tensor& x = table.value();
  Tape::Node n = make(Op::kEmbeddingRow, table.id());
  n.index = id;
  n.value = Tensor(Shape{s[1]});
  std::copy_n(x.data().begin() + id * s[1], s[1], n.value.data().begin());
  return t.push(std::move(n));
}

Var embedding_sum(Var table, std::span<const std::size_t> ids) {
  Tape& t = tape_of(table, "embedding_sum");
  const Shape& s = table.shape();
  if (!s.is_matrix()) throw DimensionError("embedding_sum: table must be a matrix, got " + s.str());
  if (ids.empty()) throw ArgumentError("embedding_sum: empty id list");
  const Tensor& x = table.value();
  Tape::Node n = make(Op::kEmbeddingSum, table.id());
  n.value = Tensor(Shape{s[1]});
  for (std::size_t id : ids) {
    if (id >= s[0]) {
      throw ArgumentError("embedding_sum: id " + std::to_string(id) + " outside table " + s.str());
    }
    for (std::size_t j = 0; j < s[1]; ++j) n.value[j] += x[id * s[1] + j];
  }
  n.ids.assign(ids.begin(), ids.end());
  return t.push(std::move(n));
}

Var cross_entropy(Var logits, std::size_t target) {
  Tape& t = tape_of(logits, "cross_entropy");
  require_vector(logits.shape(), "cross_entropy");
  const Tensor& x = logits.value();
  if (target >= x.size()) {
    throw ArgumentError("cross_entropy: target " + std::to_string(target) + " outside " +
                        std::to_string(x.size()) + " classes");
  }
  const double mx = *std::max_element(x.data().begin(), x.data().end());
  double total = 0.0;
  for (double v : x.data()) total += std::exp(v - mx);
  Tape::Node n = make(Op::kCrossEntropy, logits.id());
  n.index = target;
  n.value = Tensor::scalar(mx + std::log(total) - x[target]);
  return t.push(std::move(n));
}

Var sum_squares(Var a) {
  Tape& t = tape_of(a, "sum_squares");
  double total = 0.0;
  for (double v : a.value().data()) total += v * v;
  Tape::Node n = make(Op::kSumSquares, a.id());
  n.value = Tensor::scalar(total);
  return t.push(std::move(n));
}

Var element(Var a, std::size_t i) {
  Tape& t = tape_of(a, "element");
  require_vector(a.shape(), "element");
  if (i >= a.shape()[0]) throw ArgumentError("element: index outside " + a.shape().str());
  Tape::Node n = make(Op::kElement, a.id());
  n.index = i;
  n.value = Tensor::scalar(a.value()[i]);
  return t.push(std::move(n));
}

}  // namespace dmtn::ad
