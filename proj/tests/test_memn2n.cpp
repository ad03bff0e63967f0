#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dmtn/checks.hpp"
#include "dmtn/errors.hpp"
#include "dmtn/memn2n.hpp"
#include "dmtn/model.hpp"
#include "test_util.hpp"

using namespace dmtn;
using namespace dmtn::nn;
using Catch::Approx;

namespace {

using Vec = std::vector<double>;

Vec bow(const Tensor& table, const std::vector<std::size_t>& ids) {
  const std::size_t d = table.dim(1);
  Vec out(d, 0.0);
  for (std::size_t id : ids)
    for (std::size_t j = 0; j < d; ++j) out[j] += table[id * d + j];
  return out;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Unrolled {
  Vec logits;
  std::vector<Vec> attention;
};

// The memory network written out with plain loops.
Unrolled unrolled(const ParameterStore& s, const babi::EncodedSample& x, std::size_t hops, bool tied) {
  auto tab = [&](char p, std::size_t i) -> const Tensor& { return s.get("memn2n." + std::string(1, p) + std::to_string(i)); };
  const auto sentences = split_sentences(x);
  Vec u = bow(tied ? tab('E', 0) : s.get("memn2n.B"), x.question_ids);
  Vec o;
  Unrolled out;
  for (std::size_t h = 1; h <= hops; ++h) {
    const Tensor& A = tied ? tab('E', h - 1) : tab('A', h);
    const Tensor& C = tied ? tab('E', h) : tab('C', h);
    if (h > 1)
      for (std::size_t j = 0; j < u.size(); ++j) u[j] += o[j];
    Vec scores;
    for (const auto& sent : sentences) scores.push_back(dot(u, bow(A, sent)));
    double mx = scores[0], z = 0.0;
    for (double v : scores) mx = std::max(mx, v);
    Vec p;
    for (double v : scores) z += std::exp(v - mx);
    for (double v : scores) p.push_back(std::exp(v - mx) / z);
    o.assign(u.size(), 0.0);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const Vec c = bow(C, sentences[i]);
      for (std::size_t j = 0; j < u.size(); ++j) o[j] += p[i] * c[j];
    }
    out.attention.push_back(p);
  }
  const Tensor& W = tied ? tab('E', hops) : s.get("memn2n.W");
  const std::size_t d = u.size();
  for (std::size_t r = 0; r < W.dim(0); ++r) {
    double v = 0.0;
    for (std::size_t j = 0; j < d; ++j) v += W[r * d + j] * (o[j] + u[j]);
    out.logits.push_back(v);
  }
  return out;
}

babi::EncodedSample random_sample(std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> word(2, vocab - 1), len(1, 4), count(1, 6);
  babi::EncodedSample s;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = len(rng); k > 0; --k) s.input_ids.push_back(word(rng));
    s.eos_positions.push_back(s.input_ids.size());
    s.input_ids.push_back(babi::Vocabulary::kEosId);
  }
  for (std::size_t k = len(rng); k > 0; --k) s.question_ids.push_back(word(rng));
  s.answer_id = word(rng);
  return s;
}

ParameterStore random_memn2n(std::size_t vocab, std::size_t d, std::size_t hops, bool tied, std::mt19937_64& rng) {
  ParameterStore s;
  add_memn2n_params(s, vocab, d, hops, tied, rng);
  for (auto& p : s) p.value = test::random_tensor(p.value.shape(), rng, -0.5, 0.5);
  return s;
}

}  // namespace

TEST_CASE("bag-of-words embedding", "[memn2n]") {
  ad::Tape t;
  auto table = t.constant(Tensor::matrix({{0, 0}, {1, 2}, {10, 20}, {100, 200}}));
  const std::vector<std::size_t> ids{1, 3, 1};
  CHECK(embed_bow(ids, table).value() == Tensor::vector({102, 204}));
  CHECK_THROWS_AS(embed_bow({}, table), ArgumentError);
  const std::vector<std::size_t> bad{4};
  CHECK_THROWS_AS(embed_bow(bad, table), ArgumentError);
}

TEST_CASE("bag-of-words examples", "[memn2n]") {
  ad::Tape t;
  auto table = t.constant(Tensor::matrix({{0, 0}, {1, 0}, {0, 2}}));
  const std::vector<std::size_t> one{2}, two{1, 2};
  CHECK(embed_bow(one, table).value() == Tensor::vector({0, 2}));
  CHECK(embed_bow(two, table).value() == Tensor::vector({1, 2}));
  CHECK(embed_bow(two, t.constant(Tensor(Shape{3, 2}))).value() == Tensor(Shape{2}));
}

TEST_CASE("memory hop limits", "[memn2n]") {
  ad::Tape t;
  auto u = t.constant(Tensor::vector({1, 0}));
  const std::vector<ad::Var> single_in{t.constant(Tensor::vector({0.3, -2}))};
  const std::vector<ad::Var> single_out{t.constant(Tensor::vector({4, 5}))};
  MemoryHop h = memn2n_hop(u, single_in, single_out);
  CHECK(h.attention.value() == Tensor::vector({1.0}));
  CHECK(h.output.value() == Tensor::vector({4, 5}));

  const std::vector<ad::Var> same{t.constant(Tensor::vector({0.7, 0.1})), t.constant(Tensor::vector({0.7, 0.1}))};
  CHECK(memn2n_hop(u, same, same).attention.value() == Tensor::vector({0.5, 0.5}));

  const std::vector<ad::Var> basis{t.constant(Tensor::vector({1, 0})), t.constant(Tensor::vector({0, 1}))};
  const Tensor p = memn2n_hop(u, basis, basis).attention.value();
  const double e = std::exp(1.0);
  CHECK(p[0] == Approx(e / (e + 1)).epsilon(1e-15));
  CHECK(p[1] == Approx(1 / (e + 1)).epsilon(1e-15));
}

TEST_CASE("one hop, one memory, identity answer matrix", "[memn2n]") {
  // Untied, d = |V| = 3: logits = W (c_1 + u) with W = I.
  ParameterStore s;
  s.add("memn2n.B", ParamKind::kEmbedding, Tensor::matrix({{0, 0, 0}, {0, 0, 0}, {0.5, -1, 2}}));
  s.add("memn2n.A1", ParamKind::kEmbedding, Tensor::matrix({{0, 0, 0}, {0, 0, 0}, {1, 1, 1}}));
  s.add("memn2n.C1", ParamKind::kEmbedding, Tensor::matrix({{0, 0, 0}, {0, 0, 0}, {3, 0, -1}}));
  s.add("memn2n.W", ParamKind::kWeight, Tensor::identity(3));
  babi::EncodedSample x;
  x.input_ids = {2, babi::Vocabulary::kEosId};
  x.eos_positions = {1};
  x.question_ids = {2};
  ad::Tape t;
  CHECK(memn2n_forward(t, x, s, 1, false).logits.value() == Tensor::vector({3.5, -1, 1}));
}

TEST_CASE("two hops written out by hand", "[memn2n][oracle]") {
  // Untied, d = 2, two one-word memories and a one-word question.
  ParameterStore s;
  s.add("memn2n.B", ParamKind::kEmbedding, Tensor::matrix({{0, 0}, {0, 0}, {0, 0}, {0, 0}, {1, 0}}));
  s.add("memn2n.A1", ParamKind::kEmbedding, Tensor::matrix({{0, 0}, {0, 0}, {1, 0}, {0, 1}, {0, 0}}));
  s.add("memn2n.C1", ParamKind::kEmbedding, Tensor::matrix({{0, 0}, {0, 0}, {2, 0}, {0, 2}, {0, 0}}));
  s.add("memn2n.A2", ParamKind::kEmbedding, Tensor::matrix({{0, 0}, {0, 0}, {0, 1}, {1, 0}, {0, 0}}));
  s.add("memn2n.C2", ParamKind::kEmbedding, Tensor::matrix({{0, 0}, {0, 0}, {1, 1}, {-1, 0}, {0, 0}}));
  s.add("memn2n.W", ParamKind::kWeight, Tensor::matrix({{1, 0}, {0, 1}, {1, 1}, {0, 0}, {0, 0}}));
  babi::EncodedSample x;
  x.input_ids = {2, 1, 3, 1};
  x.eos_positions = {1, 3};
  x.question_ids = {4};
  // hop 1: u = [1,0]; scores [1, 0]; p = [a, 1-a] with a = e/(e+1); o = [2a, 2(1-a)]
  const double a = std::exp(1.0) / (std::exp(1.0) + 1.0);
  const double u2[2] = {1 + 2 * a, 2 * (1 - a)};
  // hop 2: scores [u2_1, u2_0]
  const double s0 = u2[1], s1 = u2[0];
  const double b = std::exp(s0) / (std::exp(s0) + std::exp(s1));
  const double o2[2] = {b * 1 + (1 - b) * -1, b * 1};
  const double f[2] = {o2[0] + u2[0], o2[1] + u2[1]};
  ad::Tape t;
  const MemN2NResult r = memn2n_forward(t, x, s, 2, false);
  CHECK(r.attention[0][0] == Approx(a).epsilon(1e-14));
  CHECK(r.attention[1][0] == Approx(b).epsilon(1e-14));
  const Tensor& l = r.logits.value();
  CHECK(l[0] == Approx(f[0]).epsilon(1e-14));
  CHECK(l[1] == Approx(f[1]).epsilon(1e-14));
  CHECK(l[2] == Approx(f[0] + f[1]).epsilon(1e-14));
}

TEST_CASE("single memory hop examples", "[memn2n]") {
  ad::Tape t;
  auto u = t.constant(Tensor::vector({1, 0}));
  std::vector<ad::Var> in{t.constant(Tensor::vector({0, 0})), t.constant(Tensor::vector({0, 5}))};
  std::vector<ad::Var> out{t.constant(Tensor::vector({2, 4})), t.constant(Tensor::vector({6, 8}))};
  // Equal scores: uniform attention, o is the mean of the outputs.
  MemoryHop h = memn2n_hop(u, in, out);
  CHECK(h.attention.value() == Tensor::vector({0.5, 0.5}));
  CHECK(h.output.value() == Tensor::vector({4, 6}));

  // Scores 0 and ln 3: attention 1/4, 3/4.
  std::vector<ad::Var> in2{t.constant(Tensor::vector({0, 0})), t.constant(Tensor::vector({std::log(3.0), 0}))};
  h = memn2n_hop(u, in2, out);
  CHECK(h.attention.value()[0] == Approx(0.25).epsilon(1e-14));
  CHECK(h.output.value()[0] == Approx(0.25 * 2 + 0.75 * 6).epsilon(1e-14));

  CHECK_THROWS_AS(memn2n_hop(u, in, std::span<const ad::Var>(out).first(1)), DimensionError);
  CHECK_THROWS_AS(memn2n_hop(u, {}, {}), ArgumentError);
}

TEST_CASE("forward matches the unrolled loops", "[memn2n][oracle]") {
  std::mt19937_64 rng(41);
  for (bool tied : {true, false}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t hops = 1 + trial % 3, vocab = 12, d = 5;
      const ParameterStore s = random_memn2n(vocab, d, hops, tied, rng);
      const babi::EncodedSample x = random_sample(vocab, rng);
      ad::Tape t;
      const MemN2NResult r = memn2n_forward(t, x, s, hops, tied);
      const Unrolled ref = unrolled(s, x, hops, tied);
      REQUIRE(r.attention.size() == hops);
      for (std::size_t h = 0; h < hops; ++h) {
        REQUIRE(r.attention[h].size() == x.fact_count());
        for (std::size_t i = 0; i < x.fact_count(); ++i)
          CHECK(r.attention[h][i] == Approx(ref.attention[h][i]).margin(1e-13));
      }
      for (std::size_t i = 0; i < vocab; ++i) CHECK(r.logits.value()[i] == Approx(ref.logits[i]).margin(1e-12));
    }
  }
}

TEST_CASE("attention rows are probability vectors", "[memn2n][property]") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const ParameterStore s = random_memn2n(10, 4, 3, trial % 2 == 0, rng);
    const babi::EncodedSample x = random_sample(10, rng);
    ad::Tape t;
    for (const auto& row : memn2n_forward(t, x, s, 3, trial % 2 == 0).attention) {
      double sum = 0.0;
      for (double p : row) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        sum += p;
      }
      CHECK(sum == Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("tied and untied layouts", "[memn2n]") {
  std::mt19937_64 rng(43);
  ParameterStore tied, untied;
  add_memn2n_params(tied, 10, 4, 3, true, rng);
  add_memn2n_params(untied, 10, 4, 3, false, rng);
  CHECK(tied.size() == 4);
  CHECK(untied.size() == 8);
  CHECK(tied.scalar_count() < untied.scalar_count());

  ModelConfig cfg;
  cfg.model = ModelKind::kMemN2N;
  cfg.hops = 3;
  cfg.embed = 4;
  const babi::EncodedSample x = random_sample(10, rng);
  cfg.tied = true;
  const Prediction a = predict(x, init_parameters(cfg, 10), cfg);
  cfg.tied = false;
  const Prediction b = predict(x, init_parameters(cfg, 10), cfg);
  CHECK_FALSE(a.logits == b.logits);
  CHECK(a.trace.hops == 3);
  CHECK(a.trace.facts == x.fact_count());
}

TEST_CASE("memory network forward errors", "[memn2n]") {
  std::mt19937_64 rng(44);
  const ParameterStore s = random_memn2n(10, 4, 2, true, rng);
  babi::EncodedSample x = random_sample(10, rng);
  ad::Tape t;
  CHECK_THROWS_AS(memn2n_forward(t, x, s, 0, true), ArgumentError);
  x.eos_positions.clear();
  x.input_ids.clear();
  CHECK_THROWS_AS(memn2n_forward(t, x, s, 2, true), ArgumentError);
}

TEST_CASE("memory network gradients pass checking", "[memn2n][gradcheck]") {
  CHECK(checks::memn2n(true).max_rel_error <= checks::kTolerance);
  CHECK(checks::memn2n(false).max_rel_error <= checks::kTolerance);

  std::mt19937_64 rng(45);
  const ParameterStore s = random_memn2n(8, 3, 2, false, rng);
  const babi::EncodedSample x = random_sample(8, rng);
  auto f = [&](ad::Tape& t, const ParameterStore& p) {
    return ad::cross_entropy(memn2n_forward(t, x, p, 2, false).logits, x.answer_id);
  };
  CHECK(test::fd_max_rel_error(f, s) <= checks::kTolerance);
}
