#include "dmtn/scorers.hpp"

#include <cmath>

#include "dmtn/errors.hpp"
#include "dmtn/kernels.hpp"

namespace dmtn::nn {

using ad::Var;

ScorerKind parse_scorer(std::string_view name) {
  if (name == "dmn") return ScorerKind::kDmn;
  if (name == "ntn2") return ScorerKind::kNtn2;
  if (name == "ntn3") return ScorerKind::kNtn3;
  if (name == "xntn") return ScorerKind::kXntn;
  throw ConfigError("unknown scorer '" + std::string(name) + "' (expected dmn, ntn2, ntn3 or xntn)");
}

std::string to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kDmn: return "dmn";
    case ScorerKind::kNtn2: return "ntn2";
    case ScorerKind::kNtn3: return "ntn3";
    case ScorerKind::kXntn: return "xntn";
  }
  return "?";
}

namespace {

std::string key(std::string_view prefix, std::string_view leaf) {
  return std::string(prefix) + "." + std::string(leaf);
}

// Slice stacks use a flattened fan-in (every entry of a slice feeds one output),
// which keeps the initial bilinear terms O(1) as d grows.
Tensor slice_init(Shape shape, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(shape.numel() / shape[0]);
  const double fan_out = static_cast<double>(shape[0]);
  return uniform(shape, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

void expect_shape(Var v, const Shape& s, std::string_view what) {
  if (!(v.shape() == s)) {
    throw DimensionError(std::string(what) + " has shape " + v.shape().str() + ", expected " + s.str());
  }
}

}  // namespace

void add_scorer_params(ParameterStore& store, ScorerKind kind, const GateDims& dims,
                       std::mt19937_64& rng, std::string_view prefix) {
  const std::size_t d = dims.fact, k = dims.slices, h = dims.hidden;
  switch (kind) {
    case ScorerKind::kDmn:
      store.add(key(prefix, "W_b"), ParamKind::kWeight, xavier_uniform(Shape{d, d}, rng));
      store.add(key(prefix, "W1"), ParamKind::kWeight, xavier_uniform(Shape{h, 7 * d + 2}, rng));
      store.add(key(prefix, "b1"), ParamKind::kBias, Tensor(Shape{h}));
      store.add(key(prefix, "W2"), ParamKind::kWeight, xavier_uniform(Shape{1, h}, rng));
      store.add(key(prefix, "b2"), ParamKind::kBias, Tensor(Shape{1}));
      return;
    case ScorerKind::kNtn2:
    case ScorerKind::kNtn3:
      store.add(key(prefix, "W_cq"), ParamKind::kWeight, slice_init(Shape{k, d, d}, rng));
      store.add(key(prefix, "W_mq"), ParamKind::kWeight, slice_init(Shape{k, d, d}, rng));
      store.add(key(prefix, "W_cm"), ParamKind::kWeight, slice_init(Shape{k, d, d}, rng));
      if (kind == ScorerKind::kNtn3) {
        store.add(key(prefix, "W_R3"), ParamKind::kWeight, slice_init(Shape{k, d, d, d}, rng));
      }
      store.add(key(prefix, "V_R"), ParamKind::kWeight, xavier_uniform(Shape{k, 3 * d}, rng));
      store.add(key(prefix, "b_R"), ParamKind::kBias, Tensor(Shape{k}));
      store.add(key(prefix, "W2"), ParamKind::kWeight, xavier_uniform(Shape{1, k}, rng));
      store.add(key(prefix, "b2"), ParamKind::kBias, Tensor(Shape{1}));
      return;
    case ScorerKind::kXntn:
      store.add(key(prefix, "W_R"), ParamKind::kWeight, slice_init(Shape{k, 3 * d, 3 * d}, rng));
      store.add(key(prefix, "V_R"), ParamKind::kWeight, xavier_uniform(Shape{k, 3 * d}, rng));
      store.add(key(prefix, "b_R"), ParamKind::kBias, Tensor(Shape{k}));
      store.add(key(prefix, "W2"), ParamKind::kWeight, xavier_uniform(Shape{1, k}, rng));
      store.add(key(prefix, "b2"), ParamKind::kBias, Tensor(Shape{1}));
      return;
  }
}

Var dmn_feature_vector(Var c, Var m, Var q, Var W_b) {
  require_same_shape(c.shape(), m.shape(), "dmn_feature_vector");
  require_same_shape(c.shape(), q.shape(), "dmn_feature_vector");
  if (!c.shape().is_vector() || !(W_b.shape() == Shape{c.shape()[0], c.shape()[0]})) {
    throw DimensionError("dmn_feature_vector: W_b " + W_b.shape().str() + " does not fit facts " +
                         c.shape().str());
  }
  using namespace ad;
  return concat({c, m, q, mul(c, q), mul(c, m), abs(sub(c, q)), abs(sub(c, m)),
                 dot(c, matvec(W_b, q)), dot(c, matvec(W_b, m))});
}

AttentionGate::AttentionGate(ad::Tape& tape, const ParameterStore& store, ScorerKind kind,
                             std::string_view prefix)
    : tape_(&tape), kind_(kind) {
  auto p = [&](std::string_view leaf) { return tape.param(store, key(prefix, leaf)); };
  auto require = [&](std::string_view leaf) {
    if (!store.contains(key(prefix, leaf))) {
      throw ConfigError("scorer '" + to_string(kind) + "' needs parameter " + key(prefix, leaf));
    }
  };

  switch (kind) {
    case ScorerKind::kDmn: {
      for (auto leaf : {"W_b", "W1", "b1", "W2", "b2"}) require(leaf);
      W_b_ = p("W_b");
      W1_ = p("W1");
      b1_ = p("b1");
      W2_ = p("W2");
      b2_ = p("b2");
      fact_size_ = W_b_.shape()[0];
      const std::size_t d = fact_size_, h = W1_.shape()[0];
      expect_shape(W_b_, Shape{d, d}, "W_b");
      expect_shape(W1_, Shape{h, 7 * d + 2}, "W1");
      expect_shape(b1_, Shape{h}, "b1");
      expect_shape(W2_, Shape{1, h}, "W2");
      expect_shape(b2_, Shape{1}, "b2");
      break;
    }
    case ScorerKind::kNtn2:
    case ScorerKind::kNtn3: {
      for (auto leaf : {"W_cq", "W_mq", "W_cm", "V_R", "b_R", "W2", "b2"}) require(leaf);
      if (kind == ScorerKind::kNtn3) require("W_R3");
      W_cq_ = p("W_cq");
      W_mq_ = p("W_mq");
      W_cm_ = p("W_cm");
      V_R_ = p("V_R");
      b_R_ = p("b_R");
      W2_ = p("W2");
      b2_ = p("b2");
      const std::size_t k = W_cq_.shape()[0];
      fact_size_ = W_cq_.shape()[1];
      const std::size_t d = fact_size_;
      for (auto [v, name] : {std::pair{W_cq_, "W_cq"}, {W_mq_, "W_mq"}, {W_cm_, "W_cm"}}) {
        expect_shape(v, Shape{k, d, d}, name);
      }
      if (kind == ScorerKind::kNtn3) {
        W_R3_ = p("W_R3");
        expect_shape(W_R3_, Shape{k, d, d, d}, "W_R3");
      }
      expect_shape(V_R_, Shape{k, 3 * d}, "V_R");
      expect_shape(b_R_, Shape{k}, "b_R");
      expect_shape(W2_, Shape{1, k}, "W2");
      expect_shape(b2_, Shape{1}, "b2");
      break;
    }
    case ScorerKind::kXntn: {
      for (auto leaf : {"W_R", "V_R", "b_R", "W2", "b2"}) require(leaf);
      Var W_R = p("W_R");
      V_R_ = p("V_R");
      b_R_ = p("b_R");
      W2_ = p("W2");
      b2_ = p("b2");
      const std::size_t k = W_R.shape()[0];
      if (W_R.shape().rank() != 3 || W_R.shape()[1] % 3 != 0) {
        throw DimensionError("W_R has shape " + W_R.shape().str() + ", expected [k x 3d x 3d]");
      }
      fact_size_ = W_R.shape()[1] / 3;
      const std::size_t d = fact_size_;
      expect_shape(W_R, Shape{k, 3 * d, 3 * d}, "W_R");
      expect_shape(V_R_, Shape{k, 3 * d}, "V_R");
      expect_shape(b_R_, Shape{k}, "b_R");
      expect_shape(W2_, Shape{1, k}, "W2");
      expect_shape(b2_, Shape{1}, "b2");
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) xblocks_[i][j] = ad::block(W_R, i * d, j * d, d, d);
      break;
    }
  }
}

void AttentionGate::require_fact(Var v, const char* what) const {
  if (!(v.shape() == Shape{fact_size_})) {
    throw DimensionError(std::string("attention gate: ") + what + " has shape " + v.shape().str() +
                         ", expected [" + std::to_string(fact_size_) + "]");
  }
}

void AttentionGate::set_question(Var q) {
  require_fact(q, "question");
  q_ = q;
  using namespace ad;
  switch (kind_) {
    case ScorerKind::kDmn:
      W_b_q_ = matvec(W_b_, q);
      break;
    case ScorerKind::kNtn3:
      // W_R3 modes are (slice, c, q, m); fold q now.
      W_R3_q_ = contract(W_R3_, q, 2);
      [[fallthrough]];
    case ScorerKind::kNtn2:
      W_cq_q_ = contract_last(W_cq_, q);
      break;
    case ScorerKind::kXntn:
      break;
  }
}

void AttentionGate::set_memory(Var m) {
  if (!q_.valid()) throw ArgumentError("attention gate: set_question must precede set_memory");
  require_fact(m, "memory");
  m_ = m;
  using namespace ad;
  const std::size_t d = fact_size_;
  switch (kind_) {
    case ScorerKind::kDmn:
      W_b_m_ = matvec(W_b_, m);
      break;
    case ScorerKind::kNtn2:
    case ScorerKind::kNtn3: {
      // V_R acts on [c; q; m].
      Var v_c = block(V_R_, 0, 0, V_R_.shape()[0], d);
      Var v_q = block(V_R_, 0, d, V_R_.shape()[0], d);
      Var v_m = block(V_R_, 0, 2 * d, V_R_.shape()[0], d);
      Var linear = add(W_cq_q_, contract_last(W_cm_, m));
      if (kind_ == ScorerKind::kNtn3) linear = add(linear, contract_last(W_R3_q_, m));
      hop_linear_ = add(linear, v_c);
      Var m_q = bilinear_slices(m, W_mq_, q_);
      hop_const_ = add(add(add(m_q, matvec(v_q, q_)), matvec(v_m, m)), b_R_);
      break;
    }
    case ScorerKind::kXntn: {
      // z = [c; m; q]; block index 0 = c, 1 = m, 2 = q.
      const auto& B = xblocks_;
      Var v_c = block(V_R_, 0, 0, V_R_.shape()[0], d);
      Var v_m = block(V_R_, 0, d, V_R_.shape()[0], d);
      Var v_q = block(V_R_, 0, 2 * d, V_R_.shape()[0], d);
      Var linear = add(add(contract_last(B[0][1], m), contract_last(B[0][2], q_)),
                       add(contract(B[1][0], m, 1), contract(B[2][0], q_, 1)));
      hop_linear_ = add(linear, v_c);
      Var quad = add(add(bilinear_slices(m, B[1][1], m), bilinear_slices(m, B[1][2], q_)),
                     add(bilinear_slices(q_, B[2][1], m), bilinear_slices(q_, B[2][2], q_)));
      hop_const_ = add(add(add(quad, matvec(v_m, m)), matvec(v_q, q_)), b_R_);
      break;
    }
  }
}

Var AttentionGate::preactivation(Var c) const {
  if (!m_.valid()) throw ArgumentError("attention gate: set_memory must precede score");
  require_fact(c, "fact");
  using namespace ad;
  if (kind_ == ScorerKind::kDmn) {
    Var z = concat({c, m_, q_, mul(c, q_), mul(c, m_), abs(sub(c, q_)), abs(sub(c, m_)),
                    dot(c, W_b_q_), dot(c, W_b_m_)});
    return add(matvec(W1_, z), b1_);
  }
  return kind_ == ScorerKind::kXntn ? xntn_slices(c) : ntn_slices(c);
}

Var AttentionGate::logit(Var c) const {
  return ad::add(ad::matvec(W2_, ad::tanh(preactivation(c))), b2_);
}

Var AttentionGate::score(Var c) const { return ad::sigmoid(logit(c)); }

Var AttentionGate::ntn_slices(Var c) const {
  return ad::add(ad::matvec(hop_linear_, c), hop_const_);
}

Var AttentionGate::xntn_slices(Var c) const {
  return ad::add(ad::add(ad::bilinear_slices(c, xblocks_[0][0], c), ad::matvec(hop_linear_, c)),
                 hop_const_);
}

namespace {

Var single_triple(Var c, Var m, Var q, const ParameterStore& store, ScorerKind kind,
                  std::string_view prefix) {
  AttentionGate gate(c.tape(), store, kind, prefix);
  gate.set_question(q);
  gate.set_memory(m);
  return gate.score(c);
}

}  // namespace

Var dmn_gate(Var c, Var m, Var q, const ParameterStore& store, std::string_view prefix) {
  return single_triple(c, m, q, store, ScorerKind::kDmn, prefix);
}

Var ntn_gate(Var c, Var m, Var q, const ParameterStore& store, bool three_way,
             std::string_view prefix) {
  return single_triple(c, m, q, store, three_way ? ScorerKind::kNtn3 : ScorerKind::kNtn2, prefix);
}

Var xntn_gate(Var c, Var m, Var q, const ParameterStore& store, std::string_view prefix) {
  return single_triple(c, m, q, store, ScorerKind::kXntn, prefix);
}

// ---------------------------------------------------------------------------

RelationKind parse_relation(std::string_view name) {
  if (name == "distance") return RelationKind::kDistance;
  if (name == "single_layer") return RelationKind::kSingleLayer;
  if (name == "hadamard") return RelationKind::kHadamard;
  if (name == "bilinear") return RelationKind::kBilinear;
  throw ConfigError("unknown relation model '" + std::string(name) + "'");
}

namespace {

std::vector<double> apply(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || w.dim(1) != x.size()) {
    throw DimensionError("reference_score: cannot apply " + w.shape().str() + " to " + x.shape().str());
  }
  std::vector<double> y(w.dim(0));
  kernels::serial::matvec(w.data(), x.data(), y, w.dim(0), w.dim(1));
  return y;
}

void require_len(const Tensor& t, std::size_t n, const char* what) {
  if (t.size() != n) {
    throw DimensionError(std::string("reference_score: ") + what + " has shape " + t.shape().str() +
                         ", expected " + std::to_string(n) + " entries");
  }
}

}  // namespace

double reference_score(RelationKind kind, const Tensor& e1, const Tensor& e2,
                       const RelationParams& p) {
  switch (kind) {
    case RelationKind::kDistance: {
      const auto a = apply(p.W_R1, e1);
      const auto b = apply(p.W_R2, e2);
      require_len(p.W_R2, p.W_R1.size(), "W_R2");
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
      return s;
    }
    case RelationKind::kSingleLayer: {
      const auto a = apply(p.W_R1, e1);
      const auto b = apply(p.W_R2, e2);
      require_len(p.u_R, a.size(), "u_R");
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double bias = p.bias.size() ? p.bias[i] : 0.0;
        s += p.u_R[i] * std::tanh(a[i] + b[i] + bias);
      }
      return s;
    }
    case RelationKind::kHadamard: {
      const auto l1 = apply(p.W1, e1);
      const auto r1 = apply(p.W_rel1, p.e_R);
      const auto l2 = apply(p.W2, e2);
      const auto r2 = apply(p.W_rel2, p.e_R);
      require_len(p.b1, l1.size(), "b1");
      require_len(p.b2, l2.size(), "b2");
      double s = 0.0;
      for (std::size_t i = 0; i < l1.size(); ++i) {
        s += (l1[i] * r1[i] + p.b1[i]) * (l2[i] * r2[i] + p.b2[i]);
      }
      return s;
    }
    case RelationKind::kBilinear: {
      const auto w_e2 = apply(p.W_R, e2);
      require_len(e1, w_e2.size(), "e1");
      return kernels::dot(e1.data(), w_e2);
    }
  }
  throw ConfigError("unknown relation model");
}

double reference_score(std::string_view kind, const Tensor& e1, const Tensor& e2,
                       const RelationParams& p) {
  return reference_score(parse_relation(kind), e1, e2, p);
}

}  // namespace dmtn::nn
