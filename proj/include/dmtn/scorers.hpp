#pragma once

// Attention-gate scorers G(c, m, q) -> (0, 1) and the reference relation
// models they encapsulate.
//
//   dmn   sigma(W2 tanh(W1 z(c,m,q) + b1) + b2), z = the 7d+2 handcrafted features
//   ntn2  sigma(W2 tanh(c'W_cq q + m'W_mq q + c'W_cm m + V_R [c;q;m] + b_R) + b2)
//   ntn3  ntn2 plus the trilinear term sum c_a q_b m_e W_R3[l,a,b,e]
//   xntn  sigma(W2 tanh(z'W_R z + V_R z + b_R) + b2), z = [c;m;q]
//
// Bilinear terms are k-slice stacks; each yields a k-vector.

#include <cstddef>
#include <random>
#include <string>
#include <string_view>

#include "dmtn/autodiff.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn::nn {

enum class ScorerKind { kDmn, kNtn2, kNtn3, kXntn };

/// Accepts `dmn`, `ntn2`, `ntn3`, `xntn`; anything else is a ConfigError.
ScorerKind parse_scorer(std::string_view name);
std::string to_string(ScorerKind kind);

struct GateDims {
  std::size_t fact = 40;    // d
  std::size_t slices = 40;  // k (NTN family)
  std::size_t hidden = 40;  // h (DMN gate)
};

/// Registers the scorer tensors under `<prefix>.`.
void add_scorer_params(ParameterStore& store, ScorerKind kind, const GateDims& dims,
                       std::mt19937_64& rng, std::string_view prefix = "gate");

/// Handcrafted DMN features [c; m; q; c*q; c*m; |c-q|; |c-m|; c'W_b q; c'W_b m].
ad::Var dmn_feature_vector(ad::Var c, ad::Var m, ad::Var q, ad::Var W_b);

/// A scorer bound to one tape.
///
/// Terms that depend only on q are computed in set_question(), terms that
/// depend only on (m, q) in set_memory(); score(c) finishes one fact. The
/// single-triple functions below run the same three steps, so a batched
/// episode and per-triple calls give bit-identical gates.
class AttentionGate {
 public:
  AttentionGate(ad::Tape& tape, const ParameterStore& store, ScorerKind kind,
                std::string_view prefix = "gate");

  ScorerKind kind() const { return kind_; }
  std::size_t fact_size() const { return fact_size_; }

  void set_question(ad::Var q);
  void set_memory(ad::Var m);
  /// Gate value for fact c, shape [1].
  ad::Var score(ad::Var c) const;
  /// Argument of the tanh layer: the k slice values for the tensor scorers,
  /// W1 z + b1 for the DMN gate.
  ad::Var preactivation(ad::Var c) const;
  /// Pre-sigmoid value W2 tanh(.) + b2, shape [1].
  ad::Var logit(ad::Var c) const;

 private:
  void require_fact(ad::Var v, const char* what) const;
  ad::Var ntn_slices(ad::Var c) const;
  ad::Var xntn_slices(ad::Var c) const;

  ad::Tape* tape_;
  ScorerKind kind_;
  std::size_t fact_size_ = 0;

  // Parameters.
  ad::Var W_b_, W1_, b1_, W2_, b2_;
  ad::Var W_cq_, W_mq_, W_cm_, W_R3_, V_R_, b_R_;
  ad::Var xblocks_[3][3];  // W_R split into d x d blocks over z = [c; m; q]

  // Cached partial terms.
  ad::Var q_, m_;
  ad::Var W_b_q_, W_b_m_;
  ad::Var W_cq_q_;  // [k x d]
  ad::Var W_R3_q_;  // [k x d x d] (c, m modes left)
  ad::Var hop_const_;  // [k] terms free of c
  ad::Var hop_linear_;  // [k x d] terms linear in c
};

ad::Var dmn_gate(ad::Var c, ad::Var m, ad::Var q, const ParameterStore& store,
                 std::string_view prefix = "gate");
/// `three_way` selects the trilinear term; it requires `<prefix>.W_R3`.
ad::Var ntn_gate(ad::Var c, ad::Var m, ad::Var q, const ParameterStore& store, bool three_way,
                 std::string_view prefix = "gate");
ad::Var xntn_gate(ad::Var c, ad::Var m, ad::Var q, const ParameterStore& store,
                  std::string_view prefix = "gate");

// ---------------------------------------------------------------------------
// Reference relation models (plain tensors, no tape).

enum class RelationKind { kDistance, kSingleLayer, kHadamard, kBilinear };

/// Accepts `distance`, `single_layer`, `hadamard`, `bilinear`.
RelationKind parse_relation(std::string_view name);

struct RelationParams {
  Tensor W_R1, W_R2, u_R, bias;            // distance, single layer: W_R* are [k x d]
  Tensor W1, W2, W_rel1, W_rel2, e_R, b1, b2;  // Hadamard: all d x d / d
  Tensor W_R;                              // bilinear: d x d
};

double reference_score(RelationKind kind, const Tensor& e1, const Tensor& e2,
                       const RelationParams& p);
double reference_score(std::string_view kind, const Tensor& e1, const Tensor& e2,
                       const RelationParams& p);

}  // namespace dmtn::nn
