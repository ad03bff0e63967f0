#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "dmtn/autodiff.hpp"
#include "dmtn/babi.hpp"
#include "dmtn/config.hpp"
#include "dmtn/episodic.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn {

/// Fresh parameters for `cfg`, drawn from the initialization stream of cfg.seed.
ParameterStore init_parameters(const ModelConfig& cfg, std::size_t vocab_size);

/// Logits for any model kind. `trace` receives gates (DMN/DMTN) or attention
/// weights (MemN2N) as a hops x facts matrix.
ad::Var forward_logits(ad::Tape& tape, const babi::EncodedSample& sample,
                       const ParameterStore& store, const ModelConfig& cfg,
                       nn::GateTrace* trace = nullptr, std::mt19937_64* dropout_rng = nullptr);

struct Prediction {
  Tensor logits;
  nn::GateTrace trace;
  std::size_t answer = 0;  // argmax of logits
};

Prediction predict(const babi::EncodedSample& sample, const ParameterStore& store,
                   const ModelConfig& cfg);

/// Index of the first maximum.
std::size_t argmax(std::span<const double> values);

}  // namespace dmtn
