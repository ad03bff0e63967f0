#include "dmtn/memn2n.hpp"

#include <string>

#include "dmtn/errors.hpp"

namespace dmtn::nn {

using ad::Var;

namespace {

std::string table_name(char prefix, std::size_t i) {
  return std::string("memn2n.") + prefix + std::to_string(i);
}

}  // namespace

void add_memn2n_params(ParameterStore& store, std::size_t vocab_size, std::size_t dim,
                       std::size_t hops, bool tied, std::mt19937_64& rng) {
  const Shape table{vocab_size, dim};
  if (tied) {
    for (std::size_t i = 0; i <= hops; ++i) {
      store.add(table_name('E', i), ParamKind::kEmbedding, uniform(table, 0.1, rng));
    }
    return;
  }
  store.add("memn2n.B", ParamKind::kEmbedding, uniform(table, 0.1, rng));
  for (std::size_t h = 1; h <= hops; ++h) {
    store.add(table_name('A', h), ParamKind::kEmbedding, uniform(table, 0.1, rng));
    store.add(table_name('C', h), ParamKind::kEmbedding, uniform(table, 0.1, rng));
  }
  store.add("memn2n.W", ParamKind::kWeight, xavier_uniform(table, rng));
}

Var embed_bow(std::span<const std::size_t> sentence_ids, Var table) {
  if (sentence_ids.empty()) throw ArgumentError("embed_bow: empty sentence");
  return ad::embedding_sum(table, sentence_ids);
}

MemoryHop memn2n_hop(Var u, std::span<const Var> memory_in, std::span<const Var> memory_out) {
  if (memory_in.size() != memory_out.size()) {
    throw DimensionError("memn2n_hop: " + std::to_string(memory_in.size()) + " input memories vs " +
                         std::to_string(memory_out.size()) + " output memories");
  }
  if (memory_in.empty()) throw ArgumentError("memn2n_hop: no memories");
  Var scores = ad::matvec(ad::stack_rows(memory_in), u);
  Var p = ad::softmax(scores);
  Var o = ad::matvec(ad::transpose(ad::stack_rows(memory_out)), p);
  return {o, p};
}

std::vector<std::vector<std::size_t>> split_sentences(const babi::EncodedSample& sample) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t eos : sample.eos_positions) {
    out.emplace_back(sample.input_ids.begin() + static_cast<std::ptrdiff_t>(start),
                     sample.input_ids.begin() + static_cast<std::ptrdiff_t>(eos));
    start = eos + 1;
  }
  return out;
}

MemN2NResult memn2n_forward(ad::Tape& tape, const babi::EncodedSample& sample,
                            const ParameterStore& store, std::size_t hops, bool tied) {
  if (sample.eos_positions.empty()) throw ArgumentError("memn2n_forward: no context sentences");
  if (hops == 0) throw ArgumentError("memn2n_forward: hops must be positive");
  const auto sentences = split_sentences(sample);

  auto table = [&](char prefix, std::size_t i) { return tape.param(store, table_name(prefix, i)); };
  Var B = tied ? table('E', 0) : tape.param(store, "memn2n.B");
  Var W = tied ? table('E', hops) : tape.param(store, "memn2n.W");

  MemN2NResult out;
  Var u = embed_bow(sample.question_ids, B);
  Var o;
  for (std::size_t h = 1; h <= hops; ++h) {
    Var A = tied ? table('E', h - 1) : table('A', h);
    Var C = tied ? table('E', h) : table('C', h);
    std::vector<Var> mem_in, mem_out;
    for (const auto& s : sentences) {
      mem_in.push_back(embed_bow(s, A));
      mem_out.push_back(embed_bow(s, C));
    }
    if (h > 1) u = ad::add(u, o);
    MemoryHop hop = memn2n_hop(u, mem_in, mem_out);
    o = hop.output;
    out.attention.emplace_back(hop.attention.value().values());
  }
  out.logits = ad::matvec(W, ad::add(o, u));
  return out;
}

}  // namespace dmtn::nn
