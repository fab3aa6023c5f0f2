#include "ntm/model_check.hpp"

#include "ntm/rng.hpp"

namespace ntm {

Episode random_episode(std::size_t input_width, std::size_t output_width, std::size_t steps,
                       std::uint64_t seed) {
  Rng rng(seed);
  Episode e;
  e.task = TaskKind::kCopy;
  e.seed = seed;
  e.steps = steps;
  e.input_width = input_width;
  e.output_width = output_width;
  e.inputs.resize(steps * input_width);
  for (auto& v : e.inputs) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  e.targets.resize(steps * output_width);
  for (auto& v : e.targets) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  e.score_mask.assign(steps, 1);
  e.meta.length = steps;
  e.validate();
  return e;
}

void randomize_parameters(ParameterStore& store, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (auto& v : store[p].value) v = rng.uniform(-scale, scale);
  }
}

GradientCheckReport check_model_gradients(const ModelConfig& config, std::size_t steps,
                                          std::uint64_t seed, double eps, double tol) {
  auto model = make_model(config);
  randomize_parameters(model->params(), 0.5, derive_seed(seed, 0));
  const Episode episode =
      random_episode(config.input_width, config.output_width, steps, derive_seed(seed, 1));
  SequenceModel* m = model.get();
  LossFn loss = [m, &episode](Tape& tape) { return m->forward(tape, episode).loss; };
  return gradient_check(loss, model->params(), eps, tol);
}

}  // namespace ntm
