#include "dmtn/model.hpp"

#include <algorithm>

#include "dmtn/errors.hpp"
#include "dmtn/memn2n.hpp"

namespace dmtn {

ParameterStore init_parameters(const ModelConfig& cfg, std::size_t vocab_size) {
  cfg.validate();
  std::seed_seq seq{cfg.seed, std::uint64_t{1}};
  std::mt19937_64 rng(seq);
  ParameterStore store;
  if (cfg.model == ModelKind::kMemN2N) {
    nn::add_memn2n_params(store, vocab_size, cfg.hidden, cfg.hops, cfg.tied, rng);
  } else {
    nn::add_episodic_params(store, cfg, vocab_size, rng);
  }
  return store;
}

ad::Var forward_logits(ad::Tape& tape, const babi::EncodedSample& sample,
                       const ParameterStore& store, const ModelConfig& cfg, nn::GateTrace* trace,
                       std::mt19937_64* dropout_rng) {
  if (cfg.model == ModelKind::kMemN2N) {
    nn::MemN2NResult r = nn::memn2n_forward(tape, sample, store, cfg.hops, cfg.tied);
    if (trace) {
      trace->hops = r.attention.size();
      trace->facts = sample.fact_count();
      trace->values.clear();
      for (const auto& row : r.attention) trace->values.insert(trace->values.end(), row.begin(), row.end());
    }
    return r.logits;
  }
  nn::ForwardResult r = nn::dmtn_forward(tape, sample, store, cfg, dropout_rng);
  if (trace) *trace = std::move(r.trace);
  return r.logits;
}

Prediction predict(const babi::EncodedSample& sample, const ParameterStore& store,
                   const ModelConfig& cfg) {
  ad::Tape tape;
  Prediction p;
  ad::Var logits = forward_logits(tape, sample, store, cfg, &p.trace);
  p.logits = logits.value();
  p.answer = argmax(p.logits.data());
  return p;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace dmtn
