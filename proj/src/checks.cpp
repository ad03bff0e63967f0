#include "dmtn/checks.hpp"

#include <random>

#include "dmtn/episodic.hpp"
#include "dmtn/errors.hpp"
#include "dmtn/gru.hpp"
#include "dmtn/memn2n.hpp"
#include "dmtn/model.hpp"

namespace dmtn::checks {

namespace {

Tensor random_vector(std::size_t n, std::mt19937_64& rng) {
  return uniform(Shape{n}, 1.0, rng);
}

babi::EncodedSample toy_sample() {
  babi::EncodedSample s;
  s.input_ids = {2, 3, 4, 1, 5, 6, 7, 1};
  s.eos_positions = {3, 7};
  s.question_ids = {8, 4};
  s.answer_id = 9;
  s.supporting_facts = {2};
  return s;
}

}  // namespace

GradCheckResult scorer(nn::ScorerKind kind, std::uint64_t seed, double eps) {
  std::mt19937_64 rng(seed);
  ParameterStore store;
  nn::add_scorer_params(store, kind, nn::GateDims{4, 3, 3}, rng);
  // Zero-initialized biases would leave their neighbourhood untested.
  for (auto& p : store) {
    if (p.kind == ParamKind::kBias) p.value = uniform(p.value.shape(), 0.5, rng);
  }
  store.add("in.c", ParamKind::kWeight, random_vector(4, rng));
  store.add("in.m", ParamKind::kWeight, random_vector(4, rng));
  store.add("in.q", ParamKind::kWeight, random_vector(4, rng));
  auto f = [kind](ad::Tape& tape, const ParameterStore& s) {
    ad::Var c = tape.param(s, "in.c");
    ad::Var m = tape.param(s, "in.m");
    ad::Var q = tape.param(s, "in.q");
    switch (kind) {
      case nn::ScorerKind::kDmn: return nn::dmn_gate(c, m, q, s);
      case nn::ScorerKind::kNtn2: return nn::ntn_gate(c, m, q, s, false);
      case nn::ScorerKind::kNtn3: return nn::ntn_gate(c, m, q, s, true);
      case nn::ScorerKind::kXntn: return nn::xntn_gate(c, m, q, s);
    }
    throw ConfigError("unknown scorer");
  };
  return gradient_check(f, store, eps);
}

GradCheckResult gru(std::uint64_t seed, double eps) {
  std::mt19937_64 rng(seed);
  ParameterStore store;
  nn::add_gru_params(store, "gru", 3, 4, rng);
  for (auto& p : store) {
    if (p.kind == ParamKind::kBias) p.value = uniform(p.value.shape(), 0.5, rng);
  }
  for (int t = 0; t < 5; ++t) store.add("x" + std::to_string(t), ParamKind::kWeight, random_vector(3, rng));
  store.add("h0", ParamKind::kWeight, random_vector(4, rng));
  const Tensor readout = random_vector(4, rng);
  auto f = [readout](ad::Tape& tape, const ParameterStore& s) {
    const nn::GruParams p = nn::GruParams::bind(tape, s, "gru");
    ad::Var h = tape.param(s, "h0");
    for (int t = 0; t < 5; ++t) h = nn::gru_cell(tape.param(s, "x" + std::to_string(t)), h, p);
    return ad::dot(h, tape.constant(readout));
  };
  return gradient_check(f, store, eps);
}

GradCheckResult dmtn(nn::ScorerKind kind, std::uint64_t seed, double eps) {
  ModelConfig cfg;
  cfg.model = kind == nn::ScorerKind::kDmn ? ModelKind::kDmn : ModelKind::kDmtn;
  cfg.scorer = kind;
  cfg.hidden = 4;
  cfg.slices = 3;
  cfg.gate_hidden = 3;
  cfg.hops = 2;
  cfg.embed = 5;
  cfg.seed = seed;
  ParameterStore store = init_parameters(cfg, 10);
  // Inputs in [-1, 1] keep the facts, and with them every slice gradient,
  // well above the round-off floor of the central differences.
  std::mt19937_64 rng(seed + 1);
  for (auto& p : store) {
    if (p.kind == ParamKind::kBias) p.value = uniform(p.value.shape(), 0.5, rng);
    if (p.kind == ParamKind::kEmbedding) p.value = uniform(p.value.shape(), 1.0, rng);
  }
  const babi::EncodedSample sample = toy_sample();
  auto f = [cfg, sample](ad::Tape& tape, const ParameterStore& s) {
    ad::Var logits = forward_logits(tape, sample, s, cfg);
    return nn::loss(logits, sample.answer_id, s, cfg.l2);
  };
  return gradient_check(f, store, eps);
}

GradCheckResult memn2n(bool tied, std::uint64_t seed, double eps) {
  ModelConfig cfg;
  cfg.model = ModelKind::kMemN2N;
  cfg.hidden = 4;
  cfg.hops = 2;
  cfg.tied = tied;
  cfg.seed = seed;
  ParameterStore store = init_parameters(cfg, 10);
  // Embeddings start at +-0.1; widen them so attention is far from uniform.
  std::mt19937_64 rng(seed + 1);
  for (auto& p : store) p.value = uniform(p.value.shape(), 0.8, rng);
  babi::EncodedSample sample;
  sample.input_ids = {2, 3, 1, 4, 5, 6, 1, 7, 2, 1};
  sample.eos_positions = {2, 6, 9};
  sample.question_ids = {8, 3};
  sample.answer_id = 9;
  auto f = [cfg, sample](ad::Tape& tape, const ParameterStore& s) {
    ad::Var logits = forward_logits(tape, sample, s, cfg);
    return nn::loss(logits, sample.answer_id, s, cfg.l2);
  };
  return gradient_check(f, store, eps);
}

GradCheckResult run(std::string_view target, nn::ScorerKind kind, std::uint64_t seed, double eps) {
  if (target == "gate") return scorer(kind, seed, eps);
  if (target == "gru") return gru(seed, eps);
  if (target == "dmtn") return dmtn(kind, seed, eps);
  if (target == "memn2n") return memn2n(true, seed, eps);
  if (target == "memn2n-untied") return memn2n(false, seed, eps);
  throw ConfigError("unknown gradcheck target '" + std::string(target) + "' (expected gate, gru, dmtn, memn2n or memn2n-untied)");
}

}  // namespace dmtn::checks
