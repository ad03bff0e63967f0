#pragma once

// Episodic memory over facts and the end-to-end DMN / DMTN forward pass.
//
//   m^0 = q
//   for each hop i:  g_t = G(c_t, m^{i-1}, q)
//                    h_t = g_t GRU(c_t, h_{t-1}) + (1 - g_t) h_{t-1},  h_0 = 0
//                    e^i = h_T
//                    m^i = GRU_mem(e^i, m^{i-1})
//   logits = W_a [m^M; q] + b_a

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dmtn/autodiff.hpp"
#include "dmtn/babi.hpp"
#include "dmtn/config.hpp"
#include "dmtn/gru.hpp"
#include "dmtn/parameters.hpp"
#include "dmtn/scorers.hpp"

namespace dmtn::nn {

/// hops x facts matrix of attention gate values for one sample.
struct GateTrace {
  std::size_t hops = 0;
  std::size_t facts = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t hop, std::size_t fact) const { return values[hop * facts + fact]; }
  friend bool operator==(const GateTrace&, const GateTrace&) = default;
};

/// Embeddings, the three GRUs (`enc`, `epi`, `mem`), the gate and the answer head.
void add_episodic_params(ParameterStore& store, const ModelConfig& cfg, std::size_t vocab_size,
                         std::mt19937_64& rng);

struct Episode {
  ad::Var state;               // e = h_T
  std::vector<ad::Var> gates;  // one [1] node per fact
};

/// One attention pass. `gate` must already hold the question; this sets m_prev.
Episode episode_pass(std::span<const ad::Var> facts, ad::Var m_prev, AttentionGate& gate,
                     const GruParams& inner);

ad::Var memory_update(ad::Var episode, ad::Var m_prev, const GruParams& memory);

ad::Var answer_logits(ad::Var m_final, ad::Var q, ad::Var W_a, ad::Var b_a);

struct ForwardResult {
  ad::Var logits;
  GateTrace trace;
};

/// `dropout_rng` enables inverted dropout on the facts (training only, cfg.dropout > 0).
ForwardResult dmtn_forward(ad::Tape& tape, const babi::EncodedSample& sample,
                           const ParameterStore& store, const ModelConfig& cfg,
                           std::mt19937_64* dropout_rng = nullptr);

/// Answer cross-entropy plus l2 * (sum of squared weight entries); biases and
/// embeddings carry no penalty.
ad::Var loss(ad::Var logits, std::size_t answer_id, const ParameterStore& store, double l2);

}  // namespace dmtn::nn
