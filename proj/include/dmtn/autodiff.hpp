#pragma once

// Tape-based reverse-mode differentiation over dense tensors.
//
// A Tape is rebuilt for every forward pass: ops append nodes, backward() walks
// them in reverse. A tape is single-owner; parallel work uses one tape per
// sample. Parameter leaves reference the ParameterStore tensors without
// copying, so the store must outlive (and not change during) the pass.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dmtn/parameters.hpp"
#include "dmtn/tensor.hpp"

namespace dmtn::ad {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  /// First entry; the usual way to read a scalar result.
  double item() const { return value()[0]; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kAbs,
  kAffine,
  kScale,
  kTanh,
  kSigmoid,
  kSoftmax,
  kMatVec,
  kMatMul,
  kTranspose,
  kContract,
  kBlock,
  kDot,
  kConcat,
  kStackRows,
  kEmbeddingRow,
  kEmbeddingSum,
  kCrossEntropy,
  kSumSquares,
  kElement,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Detached value; receives no gradient in the returned map.
  Var constant(Tensor value);

  /// Leaf bound to `store[name]`. Repeated calls with the same name return the
  /// same node so all uses accumulate into one gradient.
  Var param(const ParameterStore& store, std::string_view name);

  /// Exact reverse-mode gradients of a scalar loss for every parameter leaf
  /// the loss depends on. Leaves not reachable from `loss` are absent.
  GradientMap backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Node construction, used by the op functions below.
  struct Node {
    Op op = Op::kConstant;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::vector<std::uint32_t> inputs;  // concat / stack_rows
    std::vector<std::size_t> ids;       // embedding_sum
    std::size_t index = 0;              // element / embedding row / target class
    double alpha = 0.0;
    double beta = 0.0;
    Tensor value;
    const Tensor* external = nullptr;  // parameter leaves
    Tensor grad;
  };

  Var push(Node node);
  const Node& node(std::uint32_t id) const { return nodes_[id]; }
  const Tensor& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

 private:
  void propagate(Node& n);
  Tensor& grad_of(std::uint32_t id);

  std::deque<Node> nodes_;  // stable references across push()
  std::unordered_map<std::string, std::uint32_t> param_ids_;
  std::vector<std::string> param_names_;  // parallel to param leaf ids
  std::vector<std::uint32_t> param_leaf_ids_;
};

// Element-wise. Binary kinds require equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var abs(Var a);
/// alpha * a + beta, element-wise.
Var affine(Var a, double alpha, double beta);
/// Vector times a scalar node (shape [1]).
Var scale(Var v, Var s);

Var tanh(Var a);
Var sigmoid(Var a);
/// Max-subtracted softmax over a vector.
Var softmax(Var a);

/// Matrix [m x n] times vector [n].
Var matvec(Var m, Var x);
Var matmul(Var a, Var b);
Var transpose(Var a);
/// Contracts dimension `mode` of a rank-2..4 tensor with a vector, dropping
/// that dimension: contract([k x a x b], v[a], 1) -> [k x b].
Var contract(Var t, Var v, std::size_t mode);
/// contract() over the trailing dimension: [k x a x n] . [n] -> [k x a].
Var contract_last(Var t, Var v);
/// Sub-block [rows x cols] at (row_offset, col_offset) of a matrix, or of
/// every slice of a rank-3 tensor.
Var block(Var t, std::size_t row_offset, std::size_t col_offset, std::size_t rows, std::size_t cols);
Var dot(Var a, Var b);
/// Per-slice bilinear form: out[l] = e1^T W[l] e2, evaluated as e1 . (W e2).
Var bilinear_slices(Var e1, Var w, Var e2);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Stack equal-length vectors as matrix rows.
Var stack_rows(std::span<const Var> rows);

/// Row `id` of an embedding matrix.
Var embedding_row(Var table, std::size_t id);
/// Sum of rows `ids` of an embedding matrix.
Var embedding_sum(Var table, std::span<const std::size_t> ids);

/// -log softmax(logits)[target], as a [1] tensor.
Var cross_entropy(Var logits, std::size_t target);
/// Sum of squared entries, as a [1] tensor.
Var sum_squares(Var a);
/// Entry `i` of a vector, as a [1] tensor.
Var element(Var a, std::size_t i);

}  // namespace dmtn::ad
