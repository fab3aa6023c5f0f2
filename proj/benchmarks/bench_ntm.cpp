#include <benchmark/benchmark.h>

#include <vector>

#include "ntm/addressing.hpp"
#include "ntm/model.hpp"
#include "ntm/rng.hpp"
#include "ntm/tasks.hpp"

using namespace ntm;

namespace {

ModelConfig desk_model(const char* name, std::vector<std::size_t> hidden) {
  ModelConfig mc;
  apply_model_name(mc, name);
  mc.hidden = std::move(hidden);
  mc.memory_rows = 64;
  mc.memory_width = 10;
  const auto ch = default_task_config(TaskKind::kCopy).channels();
  mc.input_width = ch.input_width;
  mc.output_width = ch.output_width;
  return mc;
}

void run_episode(benchmark::State& state, const ModelConfig& mc, bool backward) {
  auto model = make_model(mc);
  const Episode e = gen_copy(1, state.range(0), state.range(0));
  Tape tape(backward);
  for (auto _ : state) {
    tape.reset();
    auto fwd = model->forward(tape, e);
    if (backward) {
      model->params().zero_grad();
      tape.backward(fwd.loss);
    }
    benchmark::DoNotOptimize(fwd.loss.scalar());
  }
  state.counters["steps/s"] =
      benchmark::Counter(static_cast<double>(e.steps), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_NtmLstmTrainStep(benchmark::State& state) {
  run_episode(state, desk_model("ntm-lstm", {64}), true);
}
void BM_NtmLstmForward(benchmark::State& state) {
  run_episode(state, desk_model("ntm-lstm", {64}), false);
}
void BM_NtmFfTrainStep(benchmark::State& state) {
  run_episode(state, desk_model("ntm-ff", {64}), true);
}
void BM_LstmBaselineTrainStep(benchmark::State& state) {
  run_episode(state, desk_model("lstm", {64, 64, 64}), true);
}

void BM_Addressing(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t m = 20;
  Rng rng(1);
  std::vector<double> mem(n * m), key(m), prev(n, 1.0 / static_cast<double>(n));
  for (auto& x : mem) x = rng.uniform(-1, 1);
  for (auto& x : key) x = rng.uniform(-1, 1);
  Tape tape(false);
  for (auto _ : state) {
    tape.reset();
    HeadParams hp;
    hp.key = tape.input(key, Shape::vector(m));
    hp.strength = tape.input({5.0});
    hp.gate = tape.input({0.7});
    hp.shift = tape.input({0.1, 0.8, 0.1});
    hp.shift_origin = 1;
    hp.gamma = tape.input({2.0});
    auto tr = address(tape, tape.input(mem, {n, m}), tape.input(prev, Shape::vector(n)), hp);
    benchmark::DoNotOptimize(tr.sharpened.value().data());
  }
}

}  // namespace

BENCHMARK(BM_NtmLstmTrainStep)->Arg(5)->Arg(10)->Arg(20);
BENCHMARK(BM_NtmLstmForward)->Arg(10)->Arg(20);
BENCHMARK(BM_NtmFfTrainStep)->Arg(10);
BENCHMARK(BM_LstmBaselineTrainStep)->Arg(10);
BENCHMARK(BM_Addressing)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
