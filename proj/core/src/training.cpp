#include "ntm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ntm/checkpoint.hpp"
#include "ntm/rng.hpp"

namespace ntm {

std::string format_log_row(const LogRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g,%.9g", row.episode, row.sequences,
                row.bits_per_seq, row.median_window);
  return buf;
}

std::uint64_t training_episode_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, index);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      model_(nullptr),
      tape_(std::make_unique<Tape>()) {
  config_.validate();
  model_ = make_model(config_.model);
  optimizer_ = RmsProp(model_->params(), config_.optimizer);
}

Trainer::Trainer(Trainer&&) noexcept = default;
Trainer& Trainer::operator=(Trainer&&) noexcept = default;
Trainer::~Trainer() = default;

Trainer Trainer::resume(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Trainer t(ck.config);
  assign_parameters(t.model_->params(), ck.params);
  if (ck.optimizer) t.optimizer_ = std::move(*ck.optimizer);
  t.episodes_done_ = ck.episodes_done;
  t.window_.assign(ck.recent_costs.begin(), ck.recent_costs.end());
  return t;
}

LogRow Trainer::train_episode() {
  const std::size_t index = episodes_done_;
  const std::uint64_t seed = training_episode_seed(config_.seed, index);
  const Episode episode = generate_episode(config_.task, seed);

  ParameterStore& params = model_->params();
  params.zero_grad();
  tape_->reset();
  double bits = 0.0;
  try {
    EpisodeForward fwd = model_->forward(*tape_, episode);
    bits = fwd.loss_bits();
    tape_->backward(fwd.loss);
  } catch (const NumericError& e) {
    throw TrainingDiverged(std::string("episode ") + std::to_string(index) + ": " + e.what(),
                           index, seed);
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (double g : params[p].grad) {
      if (!std::isfinite(g)) {
        throw TrainingDiverged("episode " + std::to_string(index) + ": non-finite gradient in '" +
                                   params[p].name + "'",
                               index, seed);
      }
    }
  }
  clip_gradients(params, config_.clip);
  optimizer_.update(params);
  tape_->reset();

  ++episodes_done_;
  window_.push_back(bits);
  while (window_.size() > config_.median_window) window_.pop_front();

  LogRow row;
  row.episode = index;
  row.sequences = episodes_done_;
  row.bits_per_seq = bits;
  row.median_window = median_of({window_.begin(), window_.end()});
  return row;
}

std::vector<LogRow> Trainer::run(std::size_t count,
                                 const std::function<bool(const LogRow&)>& on_row) {
  std::vector<LogRow> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    rows.push_back(train_episode());
    if (on_row && !on_row(rows.back())) break;
  }
  return rows;
}

void Trainer::save(const std::string& path) const {
  save_checkpoint(path, config_, episodes_done_, model_->params(), &optimizer_,
                  {window_.begin(), window_.end()});
}

// ---------------------------------------------------------------------------
// train()

TrainResult train(const TrainConfig& config, const std::string& resume_from) {
  namespace fs = std::filesystem;
  Trainer trainer = resume_from.empty() ? Trainer(config) : Trainer::resume(resume_from);
  const TrainConfig& cfg = resume_from.empty() ? trainer.config() : config;

  fs::create_directories(cfg.output_dir);
  TrainResult result;
  result.log_path = (fs::path(cfg.output_dir) / "train.csv").string();
  result.checkpoint_path = (fs::path(cfg.output_dir) / "checkpoint.bin").string();

  const bool append = !resume_from.empty() && fs::exists(result.log_path);
  std::ofstream log(result.log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw ConfigError("cannot write training log '" + result.log_path + "'");
  if (!append) log << kTrainLogHeader << '\n';

  const std::size_t target = cfg.episodes;
  const std::size_t start = trainer.episodes_done();
  try {
    while (trainer.episodes_done() < target) {
      LogRow row = trainer.train_episode();
      log << format_log_row(row) << '\n';
      result.log.push_back(row);
      if (cfg.checkpoint_every > 0 && trainer.episodes_done() % cfg.checkpoint_every == 0) {
        log.flush();
        trainer.save(result.checkpoint_path);
      }
    }
  } catch (const TrainingDiverged& e) {
    log.flush();
    std::ofstream diag(fs::path(cfg.output_dir) / "diverged.txt");
    diag << "error: " << e.what() << '\n'
         << "episode: " << e.episode() << '\n'
         << "episode_seed: " << e.episode_seed() << '\n'
         << "task: " << to_string(cfg.task.kind) << '\n';
    throw;
  }
  log.flush();
  if (start < target || !fs::exists(result.checkpoint_path)) trainer.save(result.checkpoint_path);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

std::size_t evaluation_threads() {
  if (const char* env = std::getenv("NTM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

double episode_cost(SequenceModel& model, Tape& tape, const Episode& episode) {
  tape.reset();
  EpisodeForward fwd = model.forward(tape, episode);
  return bits_per_sequence(scored_probabilities(fwd.logits, episode), episode);
}

}  // namespace

EvalStats evaluate_episodes(const SequenceModel& model, const std::vector<Episode>& episodes,
                            std::size_t threads) {
  EvalStats stats;
  stats.costs.assign(episodes.size(), 0.0);
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(episodes.size(), 1));

  auto worker = [&](std::size_t first) {
    auto replica = clone_model(model);
    Tape tape(/*record_gradients=*/false);
    for (std::size_t i = first; i < episodes.size(); i += threads) {
      stats.costs[i] = episode_cost(*replica, tape, episodes[i]);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  if (!stats.costs.empty()) {
    double total = 0.0;
    for (double c : stats.costs) total += c;
    stats.mean = total / static_cast<double>(stats.costs.size());
    stats.median = median_of(stats.costs);
  }
  return stats;
}

EvalStats evaluate(const SequenceModel& model, const TaskConfig& task, std::size_t episodes,
                   std::uint64_t seed, std::size_t threads) {
  task.validate();
  std::vector<Episode> list;
  list.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) list.push_back(generate_episode(task, derive_seed(seed, i)));
  return evaluate_episodes(model, list, threads);
}

}  // namespace ntm
