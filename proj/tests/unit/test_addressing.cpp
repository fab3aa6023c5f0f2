#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ntm/addressing.hpp"
#include "ntm/model.hpp"
#include "ntm/rng.hpp"

using namespace ntm;

namespace {

std::vector<double> one_hot(std::size_t n, std::size_t i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

Var vec(Tape& t, const std::vector<double>& v) { return t.input(v, Shape::vector(v.size())); }
Var mat(Tape& t, const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return t.input(v, {rows, cols});
}
Var scalar(Tape& t, double x) { return t.input({x}); }

void check_normalized(std::span<const double> w, double tol = 1e-6) {
  double total = 0;
  for (double v : w) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    total += v;
  }
  CHECK(std::abs(total - 1.0) < tol);
}

std::vector<double> random_memory(Rng& rng, std::size_t n, std::size_t m) {
  std::vector<double> v(n * m);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

std::vector<double> random_weighting(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace

TEST_CASE("content weighting: orthonormal rows, large beta") {
  Tape t;
  std::vector<double> m(5 * 5, 0.0);
  for (int i = 0; i < 5; ++i) m[i * 5 + i] = 1.0;
  auto w = content_weighting(t, mat(t, m, 5, 5), vec(t, one_hot(5, 3)), scalar(t, 100.0)).value();
  CHECK(w[3] > 0.99);
  check_normalized(w);
}

TEST_CASE("content weighting: beta 0 is uniform") {
  Tape t;
  Rng rng(3);
  auto w = content_weighting(t, mat(t, random_memory(rng, 6, 4), 6, 4),
                             vec(t, {0.3, -0.2, 0.9, 0.1}), scalar(t, 0.0))
               .value();
  for (double v : w) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("content weighting: equal cosines split evenly") {
  Tape t;
  const double r = 1.0 / std::sqrt(2.0);
  auto w = content_weighting(t, mat(t, {1, 0, 0, 1}, 2, 2), vec(t, {r, r}), scalar(t, 2.0)).value();
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("content weighting: zero key and zero memory stay finite") {
  Tape t;
  auto w = content_weighting(t, mat(t, std::vector<double>(8, 0.0), 4, 2), vec(t, {0, 0}),
                             scalar(t, 5.0))
               .value();
  check_normalized(w);
}

TEST_CASE("interpolation") {
  Tape t;
  Var wc = vec(t, {1, 0}), wp = vec(t, {0, 1});
  auto g1 = interpolate(t, wc, wp, scalar(t, 1.0)).value();
  auto g0 = interpolate(t, wc, wp, scalar(t, 0.0)).value();
  auto gh = interpolate(t, wc, wp, scalar(t, 0.5)).value();
  CHECK(g1[0] == 1.0);
  CHECK(g1[1] == 0.0);
  CHECK(g0[0] == 0.0);
  CHECK(g0[1] == 1.0);
  CHECK(gh[0] == 0.5);
  CHECK(gh[1] == 0.5);
}

TEST_CASE("shift: one-hot kernel is an exact rotation") {
  for (std::size_t n : {3u, 5u, 8u}) {
    for (std::size_t i = 0; i < n; ++i) {
      Tape t;
      auto w = shift_weighting(t, vec(t, one_hot(n, i)), vec(t, {0, 0, 1}), 1).value();
      const auto want = one_hot(n, (i + 1) % n);
      for (std::size_t j = 0; j < n; ++j) CHECK(w[j] == want[j]);
      auto back = shift_weighting(t, vec(t, one_hot(n, i)), vec(t, {1, 0, 0}), 1).value();
      const auto want_back = one_hot(n, (i + n - 1) % n);
      for (std::size_t j = 0; j < n; ++j) CHECK(back[j] == want_back[j]);
    }
  }
}

TEST_CASE("shift: dispersion example 0.1 / 0.8 / 0.1") {
  Tape t;
  auto w = shift_weighting(t, vec(t, one_hot(6, 2)), vec(t, {0.1, 0.8, 0.1}), 1).value();
  CHECK(w[1] == 0.1);
  CHECK(w[2] == 0.8);
  CHECK(w[3] == 0.1);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == 0.0);
  CHECK(w[5] == 0.0);
}

TEST_CASE("shift: uniform weighting is a fixed point and mass is preserved") {
  Tape t;
  Rng rng(5);
  auto w = shift_weighting(t, vec(t, std::vector<double>(7, 1.0 / 7)), vec(t, {0.2, 0.3, 0.5}), 1)
               .value();
  for (double v : w) CHECK(v == doctest::Approx(1.0 / 7).epsilon(1e-14));
  for (int rep = 0; rep < 100; ++rep) {
    const auto wg = random_weighting(rng, 9);
    const auto s = random_weighting(rng, 3);
    auto out = shift_weighting(t, vec(t, wg), vec(t, s), 1).value();
    const double before = std::accumulate(wg.begin(), wg.end(), 0.0);
    const double after = std::accumulate(out.begin(), out.end(), 0.0);
    CHECK(std::abs(after - before) < 1e-12);
  }
}

TEST_CASE("sharpen") {
  Tape t;
  const std::vector<double> w{0.1, 0.8, 0.1};
  auto id = sharpen_weighting(t, vec(t, w), scalar(t, 1.0)).value();
  for (int i = 0; i < 3; ++i) CHECK(std::abs(id[i] - w[i]) < 1e-15);
  auto sq = sharpen_weighting(t, vec(t, w), scalar(t, 2.0)).value();
  CHECK(sq[0] == doctest::Approx(0.01 / 0.66).epsilon(1e-12));
  CHECK(sq[1] == doctest::Approx(0.64 / 0.66).epsilon(1e-12));
  CHECK(sq[0] == doctest::Approx(0.01515).epsilon(1e-3));
  CHECK(sq[1] == doctest::Approx(0.9697).epsilon(1e-4));
  auto big = sharpen_weighting(t, vec(t, {0.2, 0.45, 0.35}), scalar(t, 500.0)).value();
  CHECK(big[1] > 1.0 - 1e-12);
  check_normalized(big);
}

TEST_CASE("shift from scalar") {
  SUBCASE("6.7") {
    auto s = shift_from_scalar(6.7, 16);
    CHECK(s[6] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(s[7] == doctest::Approx(0.7).epsilon(1e-12));
    double rest = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      if (i != 6 && i != 7) rest += s[i];
    }
    CHECK(rest == 0.0);
  }
  SUBCASE("1.0") {
    auto s = shift_from_scalar(1.0, 8);
    CHECK(s[1] == 1.0);
    CHECK(std::accumulate(s.begin(), s.end(), 0.0) == 1.0);
  }
  SUBCASE("-0.5") {
    auto s = shift_from_scalar(-0.5, 8);
    CHECK(s[7] == 0.5);  // offset -1
    CHECK(s[0] == 0.5);
  }
}

TEST_CASE("scalar shift op agrees with shift_from_scalar") {
  Tape t;
  for (double x : {-1.0, -0.5, -0.2, 0.0, 0.3, 0.99, 1.0}) {
    auto got = t.scalar_shift(scalar(t, x), 8).value();
    auto want = shift_from_scalar(x, 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("read") {
  Tape t;
  Rng rng(9);
  const auto m = random_memory(rng, 5, 3);
  Var mv = mat(t, m, 5, 3);
  auto r = read_memory(t, mv, vec(t, one_hot(5, 2))).value();
  for (int j = 0; j < 3; ++j) CHECK(r[j] == m[2 * 3 + j]);
  auto mean = read_memory(t, mv, vec(t, std::vector<double>(5, 0.2))).value();
  for (int j = 0; j < 3; ++j) {
    double c = 0;
    for (int i = 0; i < 5; ++i) c += m[i * 3 + j];
    CHECK(mean[j] == doctest::Approx(c / 5).epsilon(1e-14));
  }
  auto r2 = read_memory(t, mat(t, {1, 0, 0, 1}, 2, 2), vec(t, {0.25, 0.75})).value();
  CHECK(r2[0] == 0.25);
  CHECK(r2[1] == 0.75);
}

TEST_CASE("read vector is a convex combination") {
  Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    Tape t;
    const auto m = random_memory(rng, 6, 4);
    auto r = read_memory(t, mat(t, m, 6, 4), vec(t, random_weighting(rng, 6))).value();
    for (int j = 0; j < 4; ++j) {
      double lo = 1e9, hi = -1e9;
      for (int i = 0; i < 6; ++i) {
        lo = std::min(lo, m[i * 4 + j]);
        hi = std::max(hi, m[i * 4 + j]);
      }
      CHECK(r[j] >= lo - 1e-15);
      CHECK(r[j] <= hi + 1e-15);
    }
  }
}

TEST_CASE("write") {
  Rng rng(4);
  const auto m = random_memory(rng, 4, 3);
  SUBCASE("zero erase and add is the identity") {
    Tape t;
    WriteRequest req{vec(t, random_weighting(rng, 4)), vec(t, {0, 0, 0}), vec(t, {0, 0, 0})};
    auto out = write_memory(t, mat(t, m, 4, 3), {&req, 1}).value();
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(std::abs(out[i] - m[i]) <= 1e-12);
  }
  SUBCASE("full erase then add replaces one row") {
    Tape t;
    const std::vector<double> v{0.5, -2.0, 7.0};
    WriteRequest req{vec(t, one_hot(4, 1)), vec(t, {1, 1, 1}), vec(t, v)};
    auto out = write_memory(t, mat(t, m, 4, 3), {&req, 1}).value();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(out[i * 3 + j] == (i == 1 ? v[j] : m[i * 3 + j]));
    }
  }
  SUBCASE("two heads on disjoint rows equal sequential application in either order") {
    Tape t;
    Var mv = mat(t, m, 4, 3);
    WriteRequest a{vec(t, one_hot(4, 0)), vec(t, {0.3, 0.9, 0.1}), vec(t, {1, 2, 3})};
    WriteRequest b{vec(t, one_hot(4, 2)), vec(t, {0.5, 0.2, 0.7}), vec(t, {-1, 0, 4})};
    WriteRequest both[] = {a, b};
    auto joint = write_memory(t, mv, both).value();
    auto ab = write_memory(t, write_memory(t, mv, {&a, 1}), {&b, 1}).value();
    auto ba = write_memory(t, write_memory(t, mv, {&b, 1}), {&a, 1}).value();
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(joint[i] == doctest::Approx(ab[i]).epsilon(1e-14));
      CHECK(joint[i] == doctest::Approx(ba[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("write head order permutation changes memory by < 1e-12") {
  Rng rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    Tape t;
    Var mv = mat(t, random_memory(rng, 6, 4), 6, 4);
    std::vector<WriteRequest> heads;
    for (int h = 0; h < 3; ++h) {
      std::vector<double> e(4), a(4);
      for (auto& x : e) x = rng.uniform();
      for (auto& x : a) x = rng.uniform(-1, 1);
      heads.push_back({vec(t, random_weighting(rng, 6)), vec(t, e), vec(t, a)});
    }
    auto ref = write_memory(t, mv, heads).value();
    std::vector<WriteRequest> perm{heads[2], heads[0], heads[1]};
    auto got = write_memory(t, mv, perm).value();
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref[i] - got[i]) < 1e-12);
  }
}

TEST_CASE("interface layout slices are disjoint and cover the vector") {
  for (auto mode : {ShiftMode::kSoftmax, ShiftMode::kScalar}) {
    InterfaceLayout layout(20, 2, 3, 1, mode, 8);
    auto segs = layout.segments();
    std::size_t pos = 0;
    for (const auto& s : segs) {
      CHECK(s.offset == pos);
      pos = s.end();
    }
    CHECK(pos == layout.width());
    const std::size_t shift = mode == ShiftMode::kSoftmax ? 3 : 1;
    CHECK(layout.width() == 2 * (20 + 1 + 1 + shift + 1) + 3 * (20 + 1 + 1 + shift + 1 + 40) + 8);
  }
}

TEST_CASE("squash head params") {
  InterfaceLayout layout(4, 0, 1, 1, ShiftMode::kSoftmax, 0);
  const HeadSlices& h = layout.heads()[0];
  SUBCASE("zeros") {
    Tape t;
    HeadParams p = squash_head_params(t, t.constant(0.0, Shape::vector(layout.width())), h, layout, 8);
    CHECK(p.gate.scalar() == 0.5);
    for (double v : p.shift.value()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(p.gamma.scalar() == doctest::Approx(1 + std::log(2.0)).epsilon(1e-15));
    for (double v : p.erase.value()) CHECK(v == 0.5);
    CHECK(p.strength.scalar() == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-15));
  }
  SUBCASE("large gate logit saturates") {
    Tape t;
    std::vector<double> raw(layout.width(), 0.0);
    raw[h.gate.offset] = 40.0;
    HeadParams p = squash_head_params(t, vec(t, raw), h, layout, 8);
    CHECK(p.gate.scalar() > 1 - 1e-15);
  }
  SUBCASE("property: invariants hold for random raw vectors") {
    Rng rng(12);
    int bad = 0;
    for (int rep = 0; rep < 10000; ++rep) {
      Tape t;
      std::vector<double> raw(layout.width());
      for (auto& x : raw) x = rng.uniform(-20, 20);
      HeadParams p = squash_head_params(t, vec(t, raw), h, layout, 8);
      double ssum = 0;
      bool ok = p.strength.scalar() > 0 && p.gate.scalar() >= 0 && p.gate.scalar() <= 1 &&
                p.gamma.scalar() >= 1;
      for (double v : p.shift.value()) {
        ok = ok && v >= 0;
        ssum += v;
      }
      ok = ok && std::abs(ssum - 1) < 1e-12;
      for (double v : p.erase.value()) ok = ok && v >= 0 && v <= 1;
      if (!ok) ++bad;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("three addressing modes") {
  Rng rng(31);
  Tape t;
  Var mem = mat(t, random_memory(rng, 8, 4), 8, 4);
  Var key = vec(t, {0.5, -0.1, 0.3, 0.9});
  Var beta = scalar(t, 3.0);
  Var prev = vec(t, random_weighting(rng, 8));
  auto content = content_weighting(t, mem, key, beta).value();
  auto run = [&](double g, std::vector<double> s) {
    HeadParams p;
    p.key = key;
    p.strength = beta;
    p.gate = scalar(t, g);
    p.shift = vec(t, s);
    p.shift_origin = 1;
    p.gamma = scalar(t, 1.0);
    return address(t, mem, prev, p).sharpened.value();
  };
  auto a = run(1.0, {0, 1, 0});
  for (int i = 0; i < 8; ++i) CHECK(a[i] == doctest::Approx(content[i]).epsilon(1e-13));
  auto b = run(1.0, {0, 0, 1});
  for (int i = 0; i < 8; ++i) CHECK(b[(i + 1) % 8] == doctest::Approx(content[i]).epsilon(1e-13));
  auto c = run(0.0, {0, 0, 1});
  auto pv = prev.value();
  for (int i = 0; i < 8; ++i) CHECK(c[(i + 1) % 8] == doctest::Approx(pv[i]).epsilon(1e-13));
}

TEST_CASE("pipeline stages satisfy normalization for random inputs") {
  Rng rng(77);
  for (int rep = 0; rep < 300; ++rep) {
    Tape t;
    Var mem = mat(t, random_memory(rng, 10, 5), 10, 5);
    HeadParams p;
    std::vector<double> k(5);
    for (auto& x : k) x = rng.uniform(-2, 2);
    p.key = vec(t, k);
    p.strength = scalar(t, rng.uniform(0, 50));
    p.gate = scalar(t, rng.uniform());
    p.shift = vec(t, random_weighting(rng, 3));
    p.shift_origin = 1;
    p.gamma = scalar(t, 1 + rng.uniform(0, 30));
    auto tr = address(t, mem, vec(t, random_weighting(rng, 10)), p);
    check_normalized(tr.content.value());
    check_normalized(tr.gated.value());
    check_normalized(tr.shifted.value());
    check_normalized(tr.sharpened.value());
  }
}

// --- NTM step behaviour -----------------------------------------------------

TEST_CASE("same-step write is visible to a read with the same weighting") {
  Rng rng(2);
  Tape t;
  Var mem = mat(t, random_memory(rng, 6, 3), 6, 3);
  Var w = vec(t, one_hot(6, 4));
  const std::vector<double> v{0.7, -0.3, 1.5};
  WriteRequest req{w, vec(t, {1, 1, 1}), vec(t, v)};
  Var next = write_memory(t, mem, {&req, 1});
  auto r = read_memory(t, next, w).value();
  for (int j = 0; j < 3; ++j) CHECK(r[j] == v[j]);
}

TEST_CASE("weighting advances one location per step with +1 shift and closed gate") {
  Rng rng(6);
  Tape t;
  Var mem = mat(t, random_memory(rng, 8, 4), 8, 4);
  HeadParams p;
  p.key = vec(t, {1, 0, 0, 0});
  p.strength = scalar(t, 1.0);
  p.gate = scalar(t, 0.0);
  p.shift = vec(t, {0, 0, 1});
  p.shift_origin = 1;
  p.gamma = scalar(t, 1.0);
  Var w = vec(t, one_hot(8, 3));
  for (std::size_t step = 1; step <= 2; ++step) {
    w = address(t, mem, w, p).sharpened;
    auto v = w.value();
    CHECK(v[3 + step] == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("NTM model: initial state is deterministic and normalized") {
  ModelConfig mc;
  mc.hidden = {8};
  mc.memory_rows = 10;
  mc.memory_width = 4;
  mc.read_heads = 2;
  mc.write_heads = 2;
  NtmModel m(mc);
  Tape t;
  NtmState a = m.initial_state(t);
  NtmState b = m.initial_state(t);
  CHECK(a.weightings.size() == 4);
  for (std::size_t h = 0; h < a.weightings.size(); ++h) {
    check_normalized(a.weightings[h].value());
    CHECK(std::equal(a.weightings[h].value().begin(), a.weightings[h].value().end(),
                     b.weightings[h].value().begin()));
  }
  auto ma = a.memory.value(), mb = b.memory.value();
  CHECK(std::equal(ma.begin(), ma.end(), mb.begin()));
  for (double x : ma) CHECK(std::abs(x) < 1.0);
}

TEST_CASE("NTM model: a zero-input step with near-zero erase and add leaves memory unchanged") {
  ModelConfig mc;
  apply_model_name(mc, "ntm-ff");
  mc.hidden = {8};
  mc.memory_rows = 8;
  mc.memory_width = 4;
  NtmModel m(mc);
  // Zero interface weights; push erase and add pre-activations far negative / to zero.
  for (std::size_t p = 0; p < m.params().size(); ++p) {
    if (m.params()[p].name == "ctrl.iface.W") {
      std::fill(m.params()[p].value.begin(), m.params()[p].value.end(), 0.0);
    }
  }
  Parameter& bias = m.params().at("ctrl.iface.b");
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
  for (const auto& h : m.layout().heads()) {
    if (h.kind != HeadKind::kWrite) continue;
    for (std::size_t j = 0; j < h.erase.length; ++j) bias.value[h.erase.offset + j] = -40.0;
  }
  Tape t;
  NtmState s = m.initial_state(t);
  const std::vector<double> before(s.memory.value().begin(), s.memory.value().end());
  m.step(t, s, t.constant(0.0, Shape::vector(mc.input_width)));
  auto after = s.memory.value();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(after[i] - before[i]) < 1e-9);
}

TEST_CASE("NTM model: all trace weightings are normalized at every step") {
  Episode e = generate_episode(default_task_config(TaskKind::kCopy), 5);
  ModelConfig mc;
  mc.hidden = {16};
  mc.memory_rows = 16;
  mc.memory_width = 6;
  mc.read_heads = 2;
  mc.write_heads = 1;
  mc.input_width = e.input_width;
  mc.output_width = e.output_width;
  auto m = make_model(mc);
  Tape t(false);
  TraceLog log;
  m->forward(t, e, &log);
  CHECK(log.steps == e.steps);
  for (const auto& head : log.read_weightings) {
    CHECK(head.size() == e.steps);
    for (const auto& w : head) check_normalized(w);
  }
  for (const auto& head : log.write_weightings) {
    for (const auto& w : head) check_normalized(w);
  }
}

TEST_CASE("NTM model: one optimizer-style step moves the initial reads") {
  ModelConfig mc;
  mc.hidden = {8};
  mc.memory_rows = 8;
  mc.memory_width = 4;
  NtmModel m(mc);
  Episode e = generate_episode(default_task_config(TaskKind::kCopy), 3);
  Tape t;
  t.backward(m.forward(t, e).loss);
  Parameter& r0 = m.params().at("read0.r0");
  double g = 0;
  for (double x : r0.grad) g += std::abs(x);
  CHECK(g > 0.0);
}
