#pragma once

// End-to-end memory network baseline with bag-of-words sentence encoding.
//
//   m_i = sum A[x_ij],  c_i = sum C[x_ij],  u^1 = sum B[q_j]
//   p = softmax(u' m_i),  o = sum p_i c_i,  u^{h+1} = u^h + o^h
//   logits = W (o^H + u^H)
//
// Tied layout stores H+1 tables E0..EH with A^h = E(h-1), C^h = Eh, B = E0
// and W = EH. Untied layout stores A1..AH, C1..CH, B and W separately.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dmtn/autodiff.hpp"
#include "dmtn/babi.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn::nn {

void add_memn2n_params(ParameterStore& store, std::size_t vocab_size, std::size_t dim,
                       std::size_t hops, bool tied, std::mt19937_64& rng);

ad::Var embed_bow(std::span<const std::size_t> sentence_ids, ad::Var table);

struct MemoryHop {
  ad::Var output;     // o
  ad::Var attention;  // p
};

MemoryHop memn2n_hop(ad::Var u, std::span<const ad::Var> memory_in,
                     std::span<const ad::Var> memory_out);

struct MemN2NResult {
  ad::Var logits;
  std::vector<std::vector<double>> attention;  // per hop, per memory
};

MemN2NResult memn2n_forward(ad::Tape& tape, const babi::EncodedSample& sample,
                            const ParameterStore& store, std::size_t hops, bool tied);

/// Context sentences of an encoded sample without their EOS markers.
std::vector<std::vector<std::size_t>> split_sentences(const babi::EncodedSample& sample);

}  // namespace dmtn::nn
