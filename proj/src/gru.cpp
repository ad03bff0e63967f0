#include "dmtn/gru.hpp"

#include <fstream>
#include <sstream>

#include "dmtn/errors.hpp"

namespace dmtn::nn {

namespace {

std::string join_name(std::string_view prefix, std::string_view leaf) {
  std::string s(prefix);
  s += '.';
  s += leaf;
  return s;
}

}  // namespace

void add_gru_params(ParameterStore& store, std::string_view prefix, std::size_t input,
                    std::size_t hidden, std::mt19937_64& rng) {
  for (const char* gate : {"z", "r", "h"}) {
    store.add(join_name(prefix, std::string("W_") + gate), ParamKind::kWeight,
              xavier_uniform(Shape{hidden, input}, rng));
  }
  for (const char* gate : {"z", "r", "h"}) {
    store.add(join_name(prefix, std::string("U_") + gate), ParamKind::kWeight,
              xavier_uniform(Shape{hidden, hidden}, rng));
  }
  for (const char* gate : {"z", "r", "h"}) {
    store.add(join_name(prefix, std::string("b_") + gate), ParamKind::kBias, Tensor(Shape{hidden}));
  }
}

GruParams GruParams::bind(ad::Tape& tape, const ParameterStore& store, std::string_view prefix) {
  auto p = [&](std::string_view leaf) { return tape.param(store, join_name(prefix, leaf)); };
  GruParams g{p("W_z"), p("W_r"), p("W_h"), p("U_z"), p("U_r"), p("U_h"),
              p("b_z"), p("b_r"), p("b_h")};
  const std::size_t in = g.input_size();
  const std::size_t hid = g.hidden_size();
  for (ad::Var w : {g.W_z, g.W_r, g.W_h}) {
    if (!(w.shape() == Shape{hid, in})) {
      throw DimensionError("GRU '" + std::string(prefix) + "' input weight " + w.shape().str() +
                           " inconsistent with " + Shape{hid, in}.str());
    }
  }
  for (ad::Var u : {g.U_z, g.U_r, g.U_h}) {
    if (!(u.shape() == Shape{hid, hid})) {
      throw DimensionError("GRU '" + std::string(prefix) + "' recurrent weight " + u.shape().str() +
                           " is not " + Shape{hid, hid}.str());
    }
  }
  for (ad::Var b : {g.b_z, g.b_r, g.b_h}) {
    if (!(b.shape() == Shape{hid})) {
      throw DimensionError("GRU '" + std::string(prefix) + "' bias " + b.shape().str() +
                           " is not " + Shape{hid}.str());
    }
  }
  return g;
}

ad::Var gru_cell(ad::Var x, ad::Var h_prev, const GruParams& p) {
  if (!(x.shape() == Shape{p.input_size()}) || !(h_prev.shape() == Shape{p.hidden_size()})) {
    throw DimensionError("gru_cell: input " + x.shape().str() + " / state " + h_prev.shape().str() +
                         " do not match a GRU with input " + std::to_string(p.input_size()) +
                         " and hidden " + std::to_string(p.hidden_size()));
  }
  using namespace ad;
  Var z = sigmoid(add(add(matvec(p.W_z, x), matvec(p.U_z, h_prev)), p.b_z));
  Var r = sigmoid(add(add(matvec(p.W_r, x), matvec(p.U_r, h_prev)), p.b_r));
  Var candidate = tanh(add(add(matvec(p.W_h, x), matvec(p.U_h, mul(r, h_prev))), p.b_h));
  return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, candidate));
}

std::vector<ad::Var> encode_input(ad::Tape& tape, const babi::EncodedSample& sample,
                                  ad::Var embeddings, const GruParams& p) {
  if (sample.eos_positions.empty()) {
    throw ArgumentError("encode_input: sample has no context sentences");
  }
  std::vector<ad::Var> facts;
  facts.reserve(sample.eos_positions.size());
  ad::Var h = tape.constant(Tensor(Shape{p.hidden_size()}));
  std::size_t next_eos = 0;
  for (std::size_t i = 0; i < sample.input_ids.size(); ++i) {
    h = gru_cell(ad::embedding_row(embeddings, sample.input_ids[i]), h, p);
    if (next_eos < sample.eos_positions.size() && sample.eos_positions[next_eos] == i) {
      facts.push_back(h);
      ++next_eos;
    }
  }
  return facts;
}

ad::Var encode_question(ad::Tape& tape, std::span<const std::size_t> question_ids,
                        ad::Var embeddings, const GruParams& p) {
  if (question_ids.empty()) throw ArgumentError("encode_question: empty question");
  ad::Var h = tape.constant(Tensor(Shape{p.hidden_size()}));
  for (std::size_t id : question_ids) h = gru_cell(ad::embedding_row(embeddings, id), h, p);
  return h;
}

std::size_t load_pretrained_embeddings(const std::filesystem::path& path,
                                       const babi::Vocabulary& vocab, Tensor& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  const std::size_t cols = table.dim(1);
  std::size_t filled = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> vec;
    double v = 0.0;
    while (ls >> v) vec.push_back(v);
    if (vec.size() != cols) {
      throw ParseError(line_no, "embedding for '" + token + "' has " + std::to_string(vec.size()) +
                                    " values, expected " + std::to_string(cols));
    }
    if (!vocab.contains(token)) continue;
    const std::size_t row = vocab.id(token);
    std::copy(vec.begin(), vec.end(), table.data().begin() + row * cols);
    ++filled;
  }
  return filled;
}

}  // namespace dmtn::nn
