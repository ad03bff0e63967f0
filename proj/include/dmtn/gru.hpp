#pragma once

// GRU cell and the input/question encoders.
//
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * h~

#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmtn/autodiff.hpp"
#include "dmtn/babi.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn::nn {

/// Registers the nine GRU tensors as `<prefix>.W_z`, `<prefix>.U_z`, `<prefix>.b_z`, ...
/// Matrices are Xavier-uniform, biases zero.
void add_gru_params(ParameterStore& store, std::string_view prefix, std::size_t input,
                    std::size_t hidden, std::mt19937_64& rng);

/// GRU parameters bound to a tape.
struct GruParams {
  ad::Var W_z, W_r, W_h;
  ad::Var U_z, U_r, U_h;
  ad::Var b_z, b_r, b_h;

  static GruParams bind(ad::Tape& tape, const ParameterStore& store, std::string_view prefix);
  std::size_t input_size() const { return W_z.shape()[1]; }
  std::size_t hidden_size() const { return U_z.shape()[0]; }
};

ad::Var gru_cell(ad::Var x, ad::Var h_prev, const GruParams& p);

/// Runs the GRU over the embedded context from a zero state and returns the
/// hidden state at every end-of-sentence position (the facts).
std::vector<ad::Var> encode_input(ad::Tape& tape, const babi::EncodedSample& sample,
                                  ad::Var embeddings, const GruParams& p);

/// Final GRU state over the embedded question, from a zero state.
ad::Var encode_question(ad::Tape& tape, std::span<const std::size_t> question_ids,
                        ad::Var embeddings, const GruParams& p);

/// Copies pretrained vectors (text: token followed by one float per column)
/// into the matching rows of `table`. Returns the number of rows filled.
std::size_t load_pretrained_embeddings(const std::filesystem::path& path,
                                       const babi::Vocabulary& vocab, Tensor& table);

}  // namespace dmtn::nn
