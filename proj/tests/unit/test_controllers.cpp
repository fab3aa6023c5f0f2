#include <cmath>
#include <vector>

#include "doctest.h"
#include "ntm/addressing.hpp"
#include "ntm/controllers.hpp"
#include "ntm/gradient_check.hpp"
#include "ntm/model.hpp"
#include "ntm/model_check.hpp"
#include "ntm/rng.hpp"

using namespace ntm;

namespace {

std::vector<double> values_of(Var v) { return {v.value().begin(), v.value().end()}; }

}  // namespace

TEST_CASE("controller kind names") {
  CHECK(parse_controller_kind("lstm") == ControllerKind::kLstm);
  CHECK(parse_controller_kind("feedforward") == ControllerKind::kFeedforward);
  CHECK(parse_controller_kind("ff") == ControllerKind::kFeedforward);
  CHECK_THROWS_AS(parse_controller_kind("gru"), ConfigError);
}

TEST_CASE("feedforward controller is stateless") {
  ParameterStore s;
  Rng rng(1);
  ControllerConfig cc{ControllerKind::kFeedforward, 5, {7}, 11};
  Controller c(s, "ctrl", cc, rng);
  Tape t;
  ControllerState st = c.initial_state(t);
  Var x = t.input({0.1, -0.2, 0.3, 0.0, 1.0});
  auto a = values_of(c.step(t, st, x));
  auto b = values_of(c.step(t, st, x));
  CHECK(a.size() == 11);
  CHECK(a == b);
}

TEST_CASE("LSTM with forget gates at 1 and input gates at 0 keeps its cell constant") {
  ParameterStore s;
  Rng rng(2);
  LstmStack lstm(s, "l", 3, {4}, rng);
  Parameter& b = s.at("l.l0.b");
  // Gate order: input, forget, output, candidate.
  for (std::size_t j = 0; j < 4; ++j) {
    b.value[j] = -60.0;     // input gate ~ 0
    b.value[4 + j] = 60.0;  // forget gate ~ 1
  }
  Tape t;
  ControllerState st = lstm.initial_state(t);
  const auto c0 = values_of(st.cell[0]);
  for (int step = 0; step < 10; ++step) {
    lstm.step(t, st, t.input({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}));
    auto c = values_of(st.cell[0]);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(c[j] - c0[j]) < 1e-20 + 1e-15 * std::abs(c0[j]));
  }
}

TEST_CASE("gradient check through 3 stacked LSTM steps") {
  ParameterStore s;
  Rng rng(3);
  LstmStack lstm(s, "l", 3, {4, 4, 4}, rng);
  randomize_parameters(s, 0.5, 3);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 3; ++i) xs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  const std::vector<double> target{1, 0, 1, 1};
  LossFn f = [&](Tape& t) {
    ControllerState st = lstm.initial_state(t);
    Var h;
    for (const auto& x : xs) h = lstm.step(t, st, t.input(x, Shape::vector(3)));
    return t.sigmoid_cross_entropy(h, target);
  };
  auto r = gradient_check(f, s, 1e-5, 1e-4);
  INFO("worst ", r.worst_param, "[", r.worst_index, "] ", r.max_rel_err);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("LSTM baseline: episode reset starts from the learned biases") {
  ModelConfig mc;
  apply_model_name(mc, "lstm");
  mc.hidden = {5, 5};
  LstmModel m(mc);
  Parameter& h0 = m.params().at("lstm.l1.h0");
  for (auto& v : h0.value) v = 0.25;
  Tape t;
  ControllerState st = m.initial_state(t);
  for (double v : st.hidden[1].value()) CHECK(v == 0.25);
  auto c0 = m.params().at("lstm.l0.c0").value;
  auto got = values_of(st.cell[0]);
  CHECK(got == c0);
}

TEST_CASE("LSTM baseline: zero weights give a constant output") {
  ModelConfig mc;
  apply_model_name(mc, "lstm");
  mc.hidden = {4, 4, 4};
  LstmModel m(mc);
  for (std::size_t p = 0; p < m.params().size(); ++p) {
    for (auto& v : m.params()[p].value) v = 0.0;
  }
  m.params().at("out.b").value[2] = 0.7;
  Tape t;
  ControllerState st = m.initial_state(t);
  Rng rng(4);
  std::vector<double> first;
  for (int step = 0; step < 6; ++step) {
    std::vector<double> x(mc.input_width);
    for (auto& v : x) v = rng.uniform(-1, 1);
    auto y = values_of(m.step(t, st, t.input(x, Shape::vector(x.size()))));
    if (step == 0) first = y;
    CHECK(y == first);
  }
}

TEST_CASE("LSTM baseline: finite-difference check over 5 steps") {
  ModelConfig mc;
  apply_model_name(mc, "lstm");
  mc.hidden = {4, 4, 4};
  auto r = check_model_gradients(mc, 5, 1);
  INFO("worst ", r.worst_param, "[", r.worst_index, "] ", r.max_rel_err);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("LSTM perfect integrator: sensitivity to the first input does not decay") {
  auto sensitivity = [](std::size_t steps) {
    ParameterStore s;
    Rng rng(5);
    LstmStack lstm(s, "l", 2, {3}, rng);
    Parameter& w = s.at("l.l0.W");
    Parameter& b = s.at("l.l0.b");
    std::fill(w.value.begin(), w.value.end(), 0.0);
    std::fill(b.value.begin(), b.value.end(), 0.0);
    const std::size_t cols = 2 + 3;
    for (std::size_t j = 0; j < 3; ++j) {
      b.value[j] = 60.0;          // input gate 1
      b.value[3 + j] = 60.0;      // forget gate 1
      b.value[6 + j] = 60.0;      // output gate 1
      w.value[(9 + j) * cols + 0] = 0.5;  // candidate reads input channel 0
    }
    std::fill(s.at("l.l0.c0").value.begin(), s.at("l.l0.c0").value.end(), 0.0);
    Parameter& x1 = s.add("x1", Shape::vector(2));
    x1.value = {0.3, 0.0};
    Tape t;
    ControllerState st = lstm.initial_state(t);
    Var h = lstm.step(t, st, t.parameter(x1));
    for (std::size_t k = 1; k < steps; ++k) h = lstm.step(t, st, t.constant(0.0, Shape::vector(2)));
    t.backward(t.sum(h));
    return x1.grad[0];
  };
  const double g1 = sensitivity(1);
  CHECK(g1 > 0.0);
  for (std::size_t steps : {5u, 20u, 50u}) {
    const double g = sensitivity(steps);
    CHECK(g > g1 / 2);
    CHECK(g < g1 * 2);
  }
}

TEST_CASE("feedforward controller output ignores memory rows with zero read weight") {
  ParameterStore s;
  Rng rng(6);
  const std::size_t n = 6, m = 3;
  ControllerConfig cc{ControllerKind::kFeedforward, 2 + m, {5}, 9};
  Controller c(s, "ctrl", cc, rng);
  std::vector<double> mem(n * m);
  for (auto& v : mem) v = rng.uniform(-1, 1);
  std::vector<double> w(n, 0.0);
  w[2] = 1.0;
  auto interface_for = [&](const std::vector<double>& memory) {
    Tape t;
    ControllerState st = c.initial_state(t);
    Var r = read_memory(t, t.input(memory, {n, m}), t.input(w, Shape::vector(n)));
    return values_of(c.step(t, st, t.concat({t.input({0.4, -0.6}), r})));
  };
  auto base = interface_for(mem);
  auto other = mem;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 2) continue;
    for (std::size_t j = 0; j < m; ++j) other[i * m + j] = rng.uniform(-5, 5);
  }
  CHECK(interface_for(other) == base);
}

TEST_CASE("initialization is uniform within 0.1 / sqrt(fan-in) and forget bias starts at 1") {
  ParameterStore s;
  Rng rng(7);
  LstmStack lstm(s, "l", 10, {6}, rng);
  const double bound = 0.1 / std::sqrt(16.0);
  for (double v : s.at("l.l0.W").value) CHECK(std::abs(v) <= bound);
  const auto& b = s.at("l.l0.b").value;
  for (std::size_t j = 0; j < 6; ++j) CHECK(b[6 + j] == 1.0);
}
