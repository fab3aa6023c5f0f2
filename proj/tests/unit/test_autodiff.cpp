#include <cmath>
#include <vector>

#include "doctest.h"
#include "ntm/autodiff.hpp"
#include "ntm/errors.hpp"
#include "ntm/gradient_check.hpp"
#include "ntm/model_check.hpp"
#include "ntm/rng.hpp"

using namespace ntm;

TEST_CASE("sigmoid of 0 is 0.5") {
  Tape t;
  CHECK(t.sigmoid(t.input({0.0})).scalar() == 0.5);
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape t;
  auto w = t.softmax(t.input({0.0, 0.0, 0.0})).value();
  for (double v : w) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax is stable for large logits") {
  Tape t;
  auto w = t.softmax(t.input({1000.0, 1000.0})).value();
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 0.5);
}

TEST_CASE("circular conv of one-hot by +1 kernel rotates") {
  Tape t;
  Var w = t.input({0, 0, 1, 0, 0});
  Var k = t.input({0, 0, 1});  // offsets -1, 0, +1
  auto r = t.circular_conv(w, k, 1).value();
  const std::vector<double> want{0, 0, 0, 1, 0};
  for (std::size_t i = 0; i < 5; ++i) CHECK(r[i] == want[i]);
}

TEST_CASE("backward of x*x at 3 gives 6") {
  ParameterStore s;
  auto& p = s.add("x", Shape::scalar());
  p.value[0] = 3.0;
  Tape t;
  Var x = t.parameter(p);
  t.backward(t.mul(x, x));
  CHECK(p.grad[0] == 6.0);
}

TEST_CASE("sum of softmax has zero gradient") {
  ParameterStore s;
  auto& p = s.add("z", Shape::vector(4));
  p.value = {0.3, -1.2, 2.0, 0.5};
  Tape t;
  t.backward(t.sum(t.softmax(t.parameter(p))));
  for (double g : p.grad) CHECK(std::abs(g) < 1e-15);
}

TEST_CASE("backward needs a scalar loss") {
  Tape t;
  Var v = t.input({1.0, 2.0});
  CHECK_THROWS_AS(t.backward(v), ConfigError);
}

TEST_CASE("shape mismatch is a configuration error") {
  Tape t;
  Var a = t.input(std::vector<double>(6, 1.0), {2, 3});
  Var b = t.input(std::vector<double>(2, 1.0), {2, 1});
  CHECK_THROWS_AS(t.matmul(a, b), ConfigError);
  CHECK_THROWS_AS(t.add(a, b), ConfigError);
}

TEST_CASE("non-finite value is a numeric error naming the op") {
  Tape t;
  Var big = t.input({800.0});
  Var x = t.input({1.0});
  try {
    Var p = t.power(t.input({1e300}), t.input({2.0}));
    (void)p;
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("power") != std::string::npos);
  }
  (void)big;
  (void)x;
}

TEST_CASE("eval tapes refuse backward") {
  Tape t(false);
  CHECK_THROWS_AS(t.backward(t.input({1.0})), ConfigError);
}

TEST_CASE("power has zero gradient at zero for gamma > 1") {
  ParameterStore s;
  auto& w = s.add("w", Shape::vector(3));
  w.value = {0.0, 0.5, 0.5};
  Tape t;
  Var g = t.constant(2.0, Shape::scalar());
  t.backward(t.sum(t.power(t.parameter(w), g)));
  CHECK(w.grad[0] == 0.0);
  CHECK(w.grad[1] == doctest::Approx(1.0));
}

TEST_CASE("gradient check: single sigmoid neuron") {
  ParameterStore s;
  auto& w = s.add("w", {1, 3});
  auto& b = s.add("b", Shape::scalar());
  w.value = {0.4, -0.7, 0.2};
  b.value = {0.1};
  const std::vector<double> x{1.0, 0.5, -2.0};
  const std::vector<double> target{1.0};
  LossFn f = [&](Tape& t) {
    Var z = t.add(t.matmul(t.parameter(w), t.input(x, Shape::vector(3))), t.parameter(b));
    return t.sigmoid_cross_entropy(z, target);
  };
  auto r = gradient_check(f, s, 1e-5, 1e-7);
  CHECK(r.max_rel_err < 1e-7);
  CHECK(r.passed);
  CHECK(r.checked == 4);
}

TEST_CASE("gradient check: random two-layer tanh net") {
  ParameterStore s;
  Rng rng(7);
  auto& w1 = s.add("w1", {6, 4});
  auto& b1 = s.add("b1", Shape::vector(6));
  auto& w2 = s.add("w2", {3, 6});
  for (std::size_t p = 0; p < s.size(); ++p) {
    for (auto& v : s[p].value) v = rng.uniform(-1, 1);
  }
  std::vector<double> x(4), target{1, 0, 1};
  for (auto& v : x) v = rng.uniform(-1, 1);
  LossFn f = [&](Tape& t) {
    Var h = t.tanh(t.add(t.matmul(t.parameter(w1), t.input(x, Shape::vector(4))), t.parameter(b1)));
    return t.sigmoid_cross_entropy(t.matmul(t.parameter(w2), h), target);
  };
  auto r = gradient_check(f, s, 1e-5, 1e-6);
  INFO("worst ", r.worst_param, "[", r.worst_index, "] ", r.max_rel_err);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("gradient check: dead parameter has zero error") {
  ParameterStore s;
  auto& used = s.add("used", Shape::scalar());
  auto& dead = s.add("dead", Shape::scalar());
  used.value = {0.3};
  dead.value = {1.7};
  LossFn f = [&](Tape& t) {
    Var u = t.parameter(used);
    t.parameter(dead);
    return t.mul(u, u);
  };
  auto r = gradient_check(f, s, 1e-5, 1e-4);
  CHECK(dead.grad[0] == 0.0);
  CHECK(r.passed);
}

TEST_CASE("gradient check: full NTM step") {
  ModelConfig mc;
  apply_model_name(mc, "ntm-ff");
  mc.hidden = {16};
  mc.memory_rows = 8;
  mc.memory_width = 4;
  mc.input_width = 9;
  mc.output_width = 8;
  auto r = check_model_gradients(mc, 1, 1);
  INFO("worst ", r.worst_param, "[", r.worst_index, "] ", r.max_rel_err);
  CHECK(r.max_rel_err < 1e-4);
}

// Random small graphs built from the primitives, all checked against
// central differences.
TEST_CASE("property: random small graphs match finite differences") {
  int failures = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    ParameterStore s;
    auto& a = s.add("a", Shape::vector(5));
    auto& m = s.add("m", {5, 3});
    auto& g = s.add("g", Shape::scalar());
    for (std::size_t p = 0; p < s.size(); ++p) {
      for (auto& v : s[p].value) v = rng.uniform(-1, 1);
    }
    const int variant = static_cast<int>(seed % 4);
    const std::vector<double> target{1, 0, 1, 1, 0};
    LossFn f = [&](Tape& t) {
      Var av = t.parameter(a), mv = t.parameter(m), gv = t.parameter(g);
      Var w = t.softmax(av);
      Var x;
      switch (variant) {
        case 0: x = t.sharpen(w, t.add(t.constant(1, Shape::scalar()), t.softplus(gv))); break;
        case 1: x = t.circular_conv(w, t.softmax(t.slice(av, 0, 3)), 1); break;
        case 2: x = t.scale(t.cosine_similarity(mv, t.slice(av, 1, 3)), t.sigmoid(gv)); break;
        default: x = t.mul(t.tanh(av), t.one_minus(t.sigmoid(av))); break;
      }
      Var r = t.matmul_tn(mv, x);
      Var z = t.concat({t.sub(x, av), r});
      return t.sigmoid_cross_entropy(t.slice(z, 0, 5), target);
    };
    auto r = gradient_check(f, s, 1e-5, 1e-4);
    if (!r.passed) {
      ++failures;
      MESSAGE("seed ", seed, " worst ", r.worst_param, " ", r.max_rel_err);
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("linearity of backward") {
  ParameterStore s;
  auto& p = s.add("p", Shape::vector(3));
  p.value = {0.2, -0.4, 0.9};
  auto grad_of = [&](double a, double b) {
    s.zero_grad();
    Tape t;
    Var x = t.parameter(p);
    Var f = t.sum(t.tanh(x));
    Var g = t.sum(t.mul(x, x));
    t.backward(t.add(t.scale(f, t.constant(a, Shape::scalar())),
                     t.scale(g, t.constant(b, Shape::scalar()))));
    return p.grad;
  };
  auto gf = grad_of(1, 0), gg = grad_of(0, 1), gc = grad_of(2.5, -1.5);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(gc[i] - (2.5 * gf[i] - 1.5 * gg[i])) < 1e-12);
}

TEST_CASE("determinism: identical inputs give bitwise-identical gradients") {
  auto run = [] {
    ModelConfig mc;
    mc.hidden = {8};
    mc.memory_rows = 8;
    mc.memory_width = 4;
    auto m = make_model(mc);
    Episode e = random_episode(9, 8, 4, 11);
    Tape t;
    t.backward(m->forward(t, e).loss);
    std::vector<double> all;
    for (std::size_t p = 0; p < m->params().size(); ++p) {
      all.insert(all.end(), m->params()[p].grad.begin(), m->params()[p].grad.end());
    }
    return all;
  };
  CHECK(run() == run());
}

TEST_CASE("parameter store rejects duplicate names") {
  ParameterStore s;
  s.add("x", Shape::scalar());
  CHECK_THROWS_AS(s.add("x", Shape::scalar()), ConfigError);
}
