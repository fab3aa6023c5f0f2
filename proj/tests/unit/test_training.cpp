#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ntm/checkpoint.hpp"
#include "ntm/config.hpp"
#include "ntm/optimizer.hpp"
#include "ntm/training.hpp"

using namespace ntm;
namespace fs = std::filesystem;

namespace {

ParameterStore single(double grad) {
  ParameterStore s;
  auto& p = s.add("p", Shape::scalar());
  p.grad[0] = grad;
  return s;
}

TrainConfig tiny_config(const std::string& dir) {
  TrainConfig c;
  c.task = default_task_config(TaskKind::kCopy);
  c.task.min_length = 1;
  c.task.max_length = 4;
  c.model.hidden = {8};
  c.model.memory_rows = 8;
  c.model.memory_width = 4;
  c.episodes = 30;
  c.seed = 5;
  c.output_dir = dir;
  c.sync_widths();
  return c;
}

std::string temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ntm_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("clip gradients") {
  ParameterStore s;
  auto& p = s.add("p", Shape::vector(4));
  p.grad = {3.0, -57.0, 10.0, 1e9};
  clip_gradients(s, 10.0);
  CHECK(p.grad == std::vector<double>{3.0, -10.0, 10.0, 10.0});
  const auto once = p.grad;
  clip_gradients(s, 10.0);
  CHECK(p.grad == once);
  CHECK_THROWS_AS(clip_gradients(s, 0.0), ConfigError);
}

TEST_CASE("rmsprop: first step from zero state") {
  ParameterStore s = single(1.0);
  RmsProp opt(s, {});
  opt.update(s);
  const double want = -1e-4 / std::sqrt(0.05 - 0.0025 + 1e-4);
  CHECK(s.at("p").value[0] == doctest::Approx(want).epsilon(1e-15));
  CHECK(opt.slots()[0].delta[0] == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("rmsprop: zero gradient decays momentum geometrically") {
  ParameterStore s = single(1.0);
  RmsProp opt(s, {});
  opt.update(s);
  s.at("p").grad[0] = 0.0;
  double prev = opt.slots()[0].delta[0];
  double prev_theta = s.at("p").value[0];
  for (int i = 0; i < 50; ++i) {
    opt.update(s);
    const double d = opt.slots()[0].delta[0];
    CHECK(d == doctest::Approx(0.9 * prev).epsilon(1e-15));
    prev = d;
  }
  // theta converges: the remaining movement is the geometric tail of delta.
  const double theta = s.at("p").value[0];
  const double tail = opt.slots()[0].delta[0] * 0.9 / (1 - 0.9);
  for (int i = 0; i < 400; ++i) opt.update(s);
  CHECK(s.at("p").value[0] == doctest::Approx(theta + tail).epsilon(1e-12));
  (void)prev_theta;
}

TEST_CASE("rmsprop: constant gradient gives a bounded step") {
  ParameterStore s = single(0.3);
  RmsProp opt(s, {});
  for (int i = 0; i < 2000; ++i) opt.update(s);
  // n - m^2 -> 0, so the step tends to -lr * g / sqrt(eps) / (1 - momentum).
  const double limit = -1e-4 * 0.3 / std::sqrt(1e-4) / (1 - 0.9);
  CHECK(opt.slots()[0].delta[0] == doctest::Approx(limit).epsilon(1e-3));
}

TEST_CASE("rmsprop: elementwise, so permuting parameters permutes updates") {
  ParameterStore a, b;
  a.add("x", Shape::vector(2)).grad = {0.5, -2.0};
  a.add("y", Shape::scalar()).grad = {1.5};
  b.add("y", Shape::scalar()).grad = {1.5};
  b.add("x", Shape::vector(2)).grad = {0.5, -2.0};
  RmsProp oa(a, {}), ob(b, {});
  for (int i = 0; i < 3; ++i) {
    oa.update(a);
    ob.update(b);
  }
  CHECK(a.at("x").value == b.at("x").value);
  CHECK(a.at("y").value == b.at("y").value);
}

TEST_CASE("config parsing") {
  TrainConfig c = parse_train_config(
      "# comment\n"
      "task = repeat-copy\n"
      "model = lstm\n"
      "hidden = 3x16\n"
      "learning_rate = 3e-5\n"
      "episodes = 12\n");
  CHECK(c.task.kind == TaskKind::kRepeatCopy);
  CHECK(c.model.kind == ModelKind::kLstm);
  CHECK(c.model.hidden == std::vector<std::size_t>{16, 16, 16});
  CHECK(c.optimizer.learning_rate == 3e-5);
  CHECK(c.model.input_width == 10);
  CHECK(c.model.output_width == 9);
  TrainConfig back = parse_train_config(format_train_config(c));
  CHECK(format_train_config(back) == format_train_config(c));
  CHECK_THROWS_AS(parse_train_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("learning_rate = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("clip = 0\n"), ConfigError);
  CHECK_THROWS_AS(load_train_config("/nonexistent/file.cfg"), ConfigError);
  CHECK(parse_layer_list("64,32") == std::vector<std::size_t>{64, 32});
}

TEST_CASE("zero training episodes leave the initialization untouched") {
  const std::string dir = temp_dir("zero");
  TrainConfig c = tiny_config(dir);
  c.episodes = 0;
  train(c);
  Checkpoint ck = load_checkpoint(dir + "/checkpoint.bin");
  auto fresh = make_model(c.model);
  for (std::size_t p = 0; p < fresh->params().size(); ++p) {
    CHECK(ck.params[p].value == fresh->params()[p].value);
  }
}

TEST_CASE("identical seeds give identical training logs") {
  const std::string a = temp_dir("det_a"), b = temp_dir("det_b");
  train(tiny_config(a));
  train(tiny_config(b));
  CHECK(slurp(a + "/train.csv") == slurp(b + "/train.csv"));
  Checkpoint ca = load_checkpoint(a + "/checkpoint.bin");
  Checkpoint cb = load_checkpoint(b + "/checkpoint.bin");
  for (std::size_t p = 0; p < ca.params.size(); ++p) CHECK(ca.params[p].value == cb.params[p].value);
}

TEST_CASE("checkpoint round trip and resume") {
  const std::string dir = temp_dir("resume");
  TrainConfig c = tiny_config(dir);
  Trainer straight(c);
  auto first = straight.run(10);
  straight.save(dir + "/mid.bin");
  auto rest = straight.run(10);

  Checkpoint ck = load_checkpoint(dir + "/mid.bin");
  CHECK(ck.episodes_done == 10);
  Trainer resumed = Trainer::resume(dir + "/mid.bin");
  for (std::size_t p = 0; p < ck.params.size(); ++p) {
    // Bitwise parameter equality after reload.
    CHECK(std::memcmp(ck.params[p].value.data(), resumed.model().params()[p].value.data(),
                      ck.params[p].value.size() * sizeof(double)) == 0);
  }
  auto again = resumed.run(10);
  REQUIRE(again.size() == rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    CHECK(again[i].bits_per_seq == rest[i].bits_per_seq);
    CHECK(again[i].median_window == rest[i].median_window);
    CHECK(again[i].episode == rest[i].episode);
  }
}

TEST_CASE("corrupt checkpoints name the failing field") {
  const std::string dir = temp_dir("corrupt");
  TrainConfig c = tiny_config(dir);
  Trainer t(c);
  t.save(dir + "/ok.bin");
  const std::string bytes = slurp(dir + "/ok.bin");
  {
    std::ofstream(dir + "/magic.bin", std::ios::binary) << "NOTACKPT" << bytes.substr(8);
  }
  {
    std::ofstream(dir + "/short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  }
  try {
    load_checkpoint(dir + "/magic.bin");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/short.bin"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir + "/missing.bin"), FormatError);
}

TEST_CASE("state reset: an episode's loss does not depend on the previous episode") {
  TrainConfig c = tiny_config(temp_dir("reset"));
  auto model = make_model(c.model);
  std::vector<Episode> eps;
  for (std::uint64_t s = 0; s < 6; ++s) eps.push_back(generate_episode(c.task, s));
  auto forward_order = evaluate_episodes(*model, eps, 1).costs;
  std::vector<Episode> rev(eps.rbegin(), eps.rend());
  auto reverse_order = evaluate_episodes(*model, rev, 1).costs;
  for (std::size_t i = 0; i < eps.size(); ++i) CHECK(forward_order[i] == reverse_order[eps.size() - 1 - i]);
}

TEST_CASE("parallel evaluation merges by episode index") {
  TrainConfig c = tiny_config(temp_dir("par"));
  auto model = make_model(c.model);
  auto one = evaluate(*model, c.task, 13, 99, 1);
  auto four = evaluate(*model, c.task, 13, 99, 4);
  CHECK(one.costs == four.costs);
  CHECK(one.median == four.median);
}

TEST_CASE("evaluation at training lengths is close to the training loss right after training") {
  TrainConfig c = tiny_config(temp_dir("close"));
  c.task.min_length = c.task.max_length = 1;
  Trainer t(c);
  auto rows = t.run(400);
  double tail = 0;
  for (std::size_t i = rows.size() - 100; i < rows.size(); ++i) tail += rows[i].bits_per_seq;
  tail /= 100;
  auto stats = evaluate(t.model(), c.task, 200, 7, 1);
  CHECK(stats.mean == doctest::Approx(tail).epsilon(0.25));
}

TEST_CASE("median") {
  CHECK(median_of({}) == 0.0);
  CHECK(median_of({3, 1, 2}) == 2.0);
  CHECK(median_of({4, 1, 3, 2}) == 2.5);
}

TEST_CASE("log rows") {
  LogRow r{4, 5, 1.5, 2.25};
  CHECK(format_log_row(r) == "4,5,1.5,2.25");
}
