#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "dmtn/autodiff.hpp"
#include "dmtn/errors.hpp"
#include "dmtn/gradcheck.hpp"
#include "test_util.hpp"

using namespace dmtn;
using Catch::Approx;

namespace {

Tensor mat(std::initializer_list<std::initializer_list<double>> rows) { return Tensor::matrix(rows); }

}  // namespace

TEST_CASE("shape and tensor basics", "[tensor]") {
  CHECK(Shape{2, 3}.numel() == 6);
  CHECK(Shape{2, 3}.str() == "[2x3]");
  CHECK_THROWS_AS(Shape({2, 0}), ArgumentError);
  CHECK_THROWS_AS(Shape({1, 2, 3, 4, 5}), ArgumentError);
  CHECK_THROWS_AS(Tensor(Shape{2}, {1.0, 2.0, 3.0}), DimensionError);
  Tensor t = Tensor::vector({1.0, std::nan("")});
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(check_finite(t, "test"), NumericError);
}

TEST_CASE("matmul examples", "[autodiff][matmul]") {
  ad::Tape tape;
  auto a = tape.constant(mat({{1, 2}, {3, 4}}));
  CHECK(ad::matmul(tape.constant(Tensor::identity(2)), a).value() == a.value());
  auto zero = tape.constant(Tensor(Shape{2, 2}));
  CHECK(ad::matmul(zero, a).value() == Tensor(Shape{2, 2}));
  auto r = ad::matmul(a, tape.constant(mat({{5}, {6}})));
  CHECK(r.value() == mat({{17}, {39}}));

  try {
    ad::matmul(a, tape.constant(Tensor(Shape{3, 1})));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3x1]") != std::string::npos);
  }
}

TEST_CASE("elementwise examples", "[autodiff]") {
  ad::Tape tape;
  auto x = tape.constant(Tensor::vector({1, 2}));
  CHECK(ad::mul(x, tape.constant(Tensor::vector({3, 4}))).value() == Tensor::vector({3, 8}));
  CHECK(ad::abs(ad::sub(x, x)).value() == Tensor::vector({0, 0}));
  CHECK(ad::add(x, tape.constant(Tensor(Shape{2}))).value() == x.value());
  CHECK_THROWS_AS(ad::add(x, tape.constant(Tensor(Shape{3}))), DimensionError);
  CHECK_THROWS_AS(ad::mul(x, tape.constant(Tensor(Shape{1}))), DimensionError);
}

TEST_CASE("activation examples", "[autodiff]") {
  ad::Tape tape;
  CHECK(ad::sigmoid(tape.constant(Tensor::scalar(0))).item() == 0.5);
  CHECK(ad::tanh(tape.constant(Tensor::scalar(0))).item() == 0.0);
  CHECK(ad::sigmoid(tape.constant(Tensor::scalar(2))).item() == Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(ad::sigmoid(tape.constant(Tensor::scalar(2))).item() == Approx(0.880797).margin(1e-6));
  // Stable at extremes.
  CHECK(ad::sigmoid(tape.constant(Tensor::scalar(-800))).item() >= 0.0);
  CHECK(ad::sigmoid(tape.constant(Tensor::scalar(800))).item() == 1.0);
}

TEST_CASE("softmax examples and invariants", "[autodiff][softmax]") {
  ad::Tape tape;
  CHECK(ad::softmax(tape.constant(Tensor::vector({0, 0}))).value() == Tensor::vector({0.5, 0.5}));

  const auto p = ad::softmax(tape.constant(Tensor::vector({1, 2, 3}))).value();
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(p[0] == Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(p[1] == Approx(std::exp(2.0) / z).epsilon(1e-14));
  CHECK(p[2] == Approx(std::exp(3.0) / z).epsilon(1e-14));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 17;
    Tensor x = test::random_tensor(Shape{n}, rng, -30.0, 30.0);
    const double shift = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
    Tensor xs = x;
    for (double& v : xs.data()) v += shift;
    const Tensor a = ad::softmax(tape.constant(x)).value();
    const Tensor b = ad::softmax(tape.constant(xs)).value();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a[i] >= 0.0);
      CHECK(std::abs(a[i] - b[i]) <= 1e-12);
      sum += a[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("bilinear_slices examples", "[autodiff][bilinear]") {
  ad::Tape tape;
  Tensor eye(Shape{1, 2, 2});
  eye[0] = eye[3] = 1.0;
  auto e1 = tape.constant(Tensor::vector({1, 0}));
  auto e2 = tape.constant(Tensor::vector({0, 1}));
  CHECK(ad::bilinear_slices(e1, tape.constant(eye), e2).value() == Tensor::vector({0}));
  CHECK(ad::bilinear_slices(e1, tape.constant(Tensor(Shape{3, 2, 2})), e2).value() == Tensor(Shape{3}));

  // Triple-loop oracle.
  std::mt19937_64 rng(5);
  const std::size_t k = 2, d1 = 3, d2 = 4;
  Tensor w = test::random_tensor(Shape{k, d1, d2}, rng);
  Tensor a = test::random_tensor(Shape{d1}, rng);
  Tensor b = test::random_tensor(Shape{d2}, rng);
  const Tensor out = ad::bilinear_slices(tape.constant(a), tape.constant(w), tape.constant(b)).value();
  for (std::size_t l = 0; l < k; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < d1; ++i)
      for (std::size_t j = 0; j < d2; ++j) s += a[i] * w[(l * d1 + i) * d2 + j] * b[j];
    CHECK(out[l] == Approx(s).epsilon(1e-14));
  }

  try {
    ad::bilinear_slices(tape.constant(a), tape.constant(w), tape.constant(a));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("[2x3x4]") != std::string::npos);
  }
}

TEST_CASE("identity slices give exact dot products", "[autodiff][bilinear]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + trial % 4, d = 1 + trial % 6;
    Tensor w(Shape{k, d, d});
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t i = 0; i < d; ++i) w[(l * d + i) * d + i] = 1.0;
    ad::Tape tape;
    Tensor a = test::random_tensor(Shape{d}, rng);
    Tensor b = test::random_tensor(Shape{d}, rng);
    double expected = 0.0;
    for (std::size_t i = 0; i < d; ++i) expected += a[i] * b[i];
    const Tensor out = ad::bilinear_slices(tape.constant(a), tape.constant(w), tape.constant(b)).value();
    for (std::size_t l = 0; l < k; ++l) CHECK(out[l] == expected);
  }
}

TEST_CASE("concat examples", "[autodiff]") {
  ad::Tape tape;
  auto one = tape.constant(Tensor::vector({1}));
  auto two = tape.constant(Tensor::vector({2, 3}));
  CHECK(ad::concat({one, two}).value() == Tensor::vector({1, 2, 3}));
  CHECK(ad::concat({two}).value() == two.value());
  CHECK(ad::concat({two, two, two}).shape() == Shape{6});
  CHECK_THROWS_AS(ad::concat(std::span<const ad::Var>{}), ArgumentError);
  CHECK_THROWS_AS(ad::concat({tape.constant(Tensor(Shape{2, 2}))}), DimensionError);
}

TEST_CASE("backward examples", "[autodiff][backward]") {
  ParameterStore store;
  store.add("w", ParamKind::kWeight, Tensor::vector({1, 2}));
  store.add("p", ParamKind::kWeight, Tensor::vector({5}));
  ad::Tape tape;
  auto w = tape.param(store, "w");
  tape.param(store, "p");  // on the tape but unused
  const GradientMap g = tape.backward(ad::dot(w, w));
  REQUIRE(g.size() == 1);
  CHECK(g.at("w") == Tensor::vector({2, 4}));
  CHECK(g.count("p") == 0);

  ad::Tape t2;
  CHECK_THROWS_AS(t2.backward(t2.param(store, "w")), ArgumentError);
}

TEST_CASE("diamond graph accumulates both paths", "[autodiff][backward]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterStore store;
    store.add("x", ParamKind::kWeight, test::random_tensor(Shape{3}, rng));
    ad::Tape tape;
    auto x = tape.param(store, "x");
    auto xx = ad::mul(x, x);
    auto shared = ad::add(xx, xx);  // x*x + x*x
    auto loss = ad::dot(shared, tape.constant(Tensor::vector({1, 1, 1})));
    const Tensor g = tape.backward(loss).at("x");
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == 4.0 * store.get("x")[i]);
  }
}

TEST_CASE("cross entropy and reductions", "[autodiff]") {
  ad::Tape tape;
  auto logits = tape.constant(Tensor::vector({0, 0, 0, 0}));
  CHECK(ad::cross_entropy(logits, 2).item() == Approx(std::log(4.0)).epsilon(1e-15));
  CHECK_THROWS_AS(ad::cross_entropy(logits, 4), ArgumentError);
  CHECK(ad::sum_squares(tape.constant(Tensor::vector({1, 2, 3}))).item() == 14.0);
  CHECK(ad::element(tape.constant(Tensor::vector({1, 2, 3})), 1).item() == 2.0);
}

TEST_CASE("gradient_check examples", "[autodiff][gradcheck]") {
  ParameterStore store;
  store.add("w", ParamKind::kWeight, Tensor::scalar(0.3));
  const Tensor x = Tensor::scalar(1.7);
  auto sig = [x](ad::Tape& t, const ParameterStore& s) {
    return ad::sigmoid(ad::mul(t.param(s, "w"), t.constant(x)));
  };
  CHECK(gradient_check(sig, store, 1e-4).max_rel_error <= 1e-6);

  auto constant = [](ad::Tape& t, const ParameterStore& s) {
    t.param(s, "w");
    return t.constant(Tensor::scalar(3.0));
  };
  const GradCheckResult r = gradient_check(constant, store, 1e-4);
  CHECK(r.max_rel_error <= 1e-6);
  CHECK(std::abs(r.numeric) <= 1e-8);

  CHECK_THROWS_AS(gradient_check(sig, store, 0.0), ArgumentError);
  auto blowup = [](ad::Tape& t, const ParameterStore& s) {
    return ad::affine(t.param(s, "w"), std::numeric_limits<double>::infinity(), 0.0);
  };
  CHECK_THROWS_AS(gradient_check(blowup, store, 1e-4), NumericError);
}

// Every op kind against central differences on random inputs in [-1, 1].
TEST_CASE("per-op gradient property", "[autodiff][property]") {
  std::mt19937_64 rng(2024);
  constexpr double kTol = 1e-4;

  for (int trial = 0; trial < 5; ++trial) {
    ParameterStore p;
    p.add("a", ParamKind::kWeight, test::random_tensor(Shape{4}, rng));
    p.add("b", ParamKind::kWeight, test::random_tensor(Shape{4}, rng));
    p.add("nz", ParamKind::kWeight, test::random_away_from_zero(Shape{4}, rng));
    p.add("s", ParamKind::kWeight, test::random_tensor(Shape{1}, rng));
    p.add("M", ParamKind::kWeight, test::random_tensor(Shape{3, 4}, rng));
    p.add("N", ParamKind::kWeight, test::random_tensor(Shape{4, 2}, rng));
    p.add("T3", ParamKind::kWeight, test::random_tensor(Shape{2, 3, 4}, rng));
    p.add("T4", ParamKind::kWeight, test::random_tensor(Shape{2, 3, 4, 2}, rng));
    p.add("E", ParamKind::kEmbedding, test::random_tensor(Shape{5, 4}, rng));
    p.add("c", ParamKind::kWeight, test::random_tensor(Shape{3}, rng));
    p.add("e2", ParamKind::kWeight, test::random_tensor(Shape{2}, rng));

    // Readout weights are drawn once per case so f is deterministic.
    const Tensor r4 = test::random_tensor(Shape{4}, rng);
    const Tensor r3 = test::random_tensor(Shape{3}, rng);
    const Tensor r2 = test::random_tensor(Shape{2}, rng);
    const Tensor r8 = test::random_tensor(Shape{8}, rng);
    const Tensor r6 = test::random_tensor(Shape{6}, rng);
    auto lin = [](ad::Var v, const Tensor& w) { return ad::dot(v, v.tape().constant(w)); };
    auto lin2 = [](ad::Var m, const Tensor& u, const Tensor& w) {
      ad::Tape& t = m.tape();
      return ad::dot(t.constant(u), ad::matvec(m, t.constant(w)));
    };

    const std::vector<std::pair<const char*, test::Loss>> cases = {
        {"add", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::add(t.param(s, "a"), t.param(s, "b")), r4); }},
        {"sub", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::sub(t.param(s, "a"), t.param(s, "b")), r4); }},
        {"mul", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::mul(t.param(s, "a"), t.param(s, "b")), r4); }},
        {"abs", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::abs(t.param(s, "nz")), r4); }},
        {"affine", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::affine(t.param(s, "a"), -1.5, 0.3), r4); }},
        {"scale", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::scale(t.param(s, "a"), t.param(s, "s")), r4); }},
        {"tanh", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::tanh(t.param(s, "a")), r4); }},
        {"sigmoid", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::sigmoid(t.param(s, "a")), r4); }},
        {"softmax", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::softmax(t.param(s, "a")), r4); }},
        {"matvec", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::matvec(t.param(s, "M"), t.param(s, "a")), r3); }},
        {"matmul", [&](ad::Tape& t, const ParameterStore& s) { return lin2(ad::matmul(t.param(s, "M"), t.param(s, "N")), r3, r2); }},
        {"transpose", [&](ad::Tape& t, const ParameterStore& s) { return lin2(ad::transpose(t.param(s, "M")), r4, r3); }},
        {"contract3", [&](ad::Tape& t, const ParameterStore& s) { return lin2(ad::contract(t.param(s, "T3"), t.param(s, "c"), 1), r2, r4); }},
        {"contract3_last", [&](ad::Tape& t, const ParameterStore& s) { return lin2(ad::contract_last(t.param(s, "T3"), t.param(s, "a")), r2, r3); }},
        {"contract3_first", [&](ad::Tape& t, const ParameterStore& s) { return lin2(ad::contract(t.param(s, "T3"), t.param(s, "e2"), 0), r3, r4); }},
        {"contract4", [&](ad::Tape& t, const ParameterStore& s) {
           auto x = ad::contract(t.param(s, "T4"), t.param(s, "c"), 1);   // [2x4x2]
           auto y = ad::contract(x, t.param(s, "a"), 1);                  // [2x2]
           return lin2(y, r2, r2);
         }},
        {"contract4_last", [&](ad::Tape& t, const ParameterStore& s) {
           auto x = ad::contract(t.param(s, "T4"), t.param(s, "e2"), 3);  // [2x3x4]
           return lin2(ad::contract_last(x, t.param(s, "a")), r2, r3);
         }},
        {"block2", [&](ad::Tape& t, const ParameterStore& s) { return lin2(ad::block(t.param(s, "M"), 1, 1, 2, 3), r2, r3); }},
        {"block3", [&](ad::Tape& t, const ParameterStore& s) {
           auto b = ad::block(t.param(s, "T3"), 1, 1, 2, 2);  // [2x2x2]
           return lin2(ad::contract_last(b, t.param(s, "e2")), r2, r2);
         }},
        {"dot", [&](ad::Tape& t, const ParameterStore& s) { return ad::dot(t.param(s, "a"), t.param(s, "b")); }},
        {"bilinear", [&](ad::Tape& t, const ParameterStore& s) {
           return lin(ad::bilinear_slices(t.param(s, "c"), t.param(s, "T3"), t.param(s, "a")), r2);
         }},
        {"concat", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::concat({t.param(s, "a"), t.param(s, "b")}), r8); }},
        {"stack_rows", [&](ad::Tape& t, const ParameterStore& s) {
           std::vector<ad::Var> rows{t.param(s, "a"), t.param(s, "b"), t.param(s, "a")};
           return lin2(ad::stack_rows(rows), r3, r4);
         }},
        {"embedding_row", [&](ad::Tape& t, const ParameterStore& s) { return lin(ad::embedding_row(t.param(s, "E"), 3), r4); }},
        {"embedding_sum", [&](ad::Tape& t, const ParameterStore& s) {
           const std::vector<std::size_t> ids{1, 3, 1, 4};
           return lin(ad::embedding_sum(t.param(s, "E"), ids), r4);
         }},
        {"cross_entropy", [&](ad::Tape& t, const ParameterStore& s) { return ad::cross_entropy(t.param(s, "a"), 2); }},
        {"sum_squares", [&](ad::Tape& t, const ParameterStore& s) { return ad::sum_squares(t.param(s, "M")); }},
        {"element", [&](ad::Tape& t, const ParameterStore& s) { return ad::element(ad::tanh(t.param(s, "a")), 1); }},
        {"composite", [&](ad::Tape& t, const ParameterStore& s) {
           auto h = ad::tanh(ad::matvec(t.param(s, "M"), ad::mul(t.param(s, "a"), t.param(s, "b"))));
           return lin(ad::softmax(ad::concat({h, t.param(s, "c")})), r6);
         }},
    };
    for (const auto& [name, f] : cases) {
      INFO("op " << name << ", trial " << trial);
      CHECK(test::fd_max_rel_error(f, p) <= kTol);
    }
  }
}

TEST_CASE("library gradient_check agrees with the test oracle", "[autodiff][gradcheck]") {
  std::mt19937_64 rng(99);
  ParameterStore p;
  p.add("M", ParamKind::kWeight, test::random_tensor(Shape{3, 4}, rng));
  p.add("x", ParamKind::kWeight, test::random_tensor(Shape{4}, rng));
  auto f = [](ad::Tape& t, const ParameterStore& s) {
    return ad::cross_entropy(ad::tanh(ad::matvec(t.param(s, "M"), t.param(s, "x"))), 1);
  };
  const GradCheckResult r = gradient_check(f, p, 1e-4);
  CHECK(r.entries_checked == 16);
  CHECK(r.max_rel_error <= 1e-6);
  CHECK(test::fd_max_rel_error(f, p) == Approx(r.max_rel_error).margin(1e-12));
}
