#include "dmtn/episodic.hpp"

#include "dmtn/errors.hpp"

namespace dmtn::nn {

using ad::Var;

void add_episodic_params(ParameterStore& store, const ModelConfig& cfg, std::size_t vocab_size,
                         std::mt19937_64& rng) {
  const std::size_t d = cfg.hidden;
  store.add("embed", ParamKind::kEmbedding, uniform(Shape{vocab_size, cfg.embed}, 0.1, rng));
  add_gru_params(store, "enc", cfg.embed, d, rng);
  add_gru_params(store, "epi", d, d, rng);
  add_gru_params(store, "mem", d, d, rng);
  add_scorer_params(store, cfg.scorer, GateDims{d, cfg.slices, cfg.effective_gate_hidden()}, rng);
  store.add("ans.W_a", ParamKind::kWeight, xavier_uniform(Shape{vocab_size, 2 * d}, rng));
  store.add("ans.b_a", ParamKind::kBias, Tensor(Shape{vocab_size}));
}

Episode episode_pass(std::span<const Var> facts, Var m_prev, AttentionGate& gate,
                     const GruParams& inner) {
  if (facts.empty()) throw ArgumentError("episode_pass: no facts");
  gate.set_memory(m_prev);
  Episode out;
  out.gates.reserve(facts.size());
  Var h = m_prev.tape().constant(Tensor(Shape{inner.hidden_size()}));
  for (Var c : facts) {
    Var g = gate.score(c);
    Var updated = gru_cell(c, h, inner);
    h = ad::add(ad::scale(updated, g), ad::scale(h, ad::affine(g, -1.0, 1.0)));
    out.gates.push_back(g);
  }
  out.state = h;
  return out;
}

Var memory_update(Var episode, Var m_prev, const GruParams& memory) {
  return gru_cell(episode, m_prev, memory);
}

Var answer_logits(Var m_final, Var q, Var W_a, Var b_a) {
  require_same_shape(m_final.shape(), q.shape(), "answer_logits");
  if (!W_a.shape().is_matrix() || W_a.shape()[1] != 2 * q.shape()[0] ||
      !(b_a.shape() == Shape{W_a.shape()[0]})) {
    throw DimensionError("answer_logits: head " + W_a.shape().str() + " / " + b_a.shape().str() +
                         " does not fit memory " + m_final.shape().str());
  }
  return ad::add(ad::matvec(W_a, ad::concat({m_final, q})), b_a);
}

ForwardResult dmtn_forward(ad::Tape& tape, const babi::EncodedSample& sample,
                           const ParameterStore& store, const ModelConfig& cfg,
                           std::mt19937_64* dropout_rng) {
  if (cfg.hops == 0) throw ArgumentError("dmtn_forward: hops must be positive");
  Var embeddings = tape.param(store, "embed");
  const GruParams enc = GruParams::bind(tape, store, "enc");
  const GruParams epi = GruParams::bind(tape, store, "epi");
  const GruParams mem = GruParams::bind(tape, store, "mem");

  std::vector<Var> facts = encode_input(tape, sample, embeddings, enc);
  Var q = encode_question(tape, sample.question_ids, embeddings, enc);

  if (dropout_rng && cfg.dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - cfg.dropout);
    const double scale = 1.0 / (1.0 - cfg.dropout);
    for (Var& c : facts) {
      Tensor mask(c.shape());
      for (double& v : mask.data()) v = keep(*dropout_rng) ? scale : 0.0;
      c = ad::mul(c, tape.constant(std::move(mask)));
    }
  }

  AttentionGate gate(tape, store, cfg.scorer);
  gate.set_question(q);

  ForwardResult out;
  out.trace.hops = cfg.hops;
  out.trace.facts = facts.size();
  out.trace.values.reserve(cfg.hops * facts.size());
  Var m = q;
  for (std::size_t hop = 0; hop < cfg.hops; ++hop) {
    Episode e = episode_pass(facts, m, gate, epi);
    for (Var g : e.gates) out.trace.values.push_back(g.item());
    m = memory_update(e.state, m, mem);
  }
  out.logits = answer_logits(m, q, tape.param(store, "ans.W_a"), tape.param(store, "ans.b_a"));
  return out;
}

Var loss(Var logits, std::size_t answer_id, const ParameterStore& store, double l2) {
  Var total = ad::cross_entropy(logits, answer_id);
  if (l2 > 0.0) {
    ad::Tape& tape = logits.tape();
    for (const auto& p : store) {
      if (p.kind != ParamKind::kWeight) continue;
      total = ad::add(total, ad::affine(ad::sum_squares(tape.param(store, p.name)), l2, 0.0));
    }
  }
  return total;
}

}  // namespace dmtn::nn
