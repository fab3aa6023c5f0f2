#pragma once

// Episode-level BPTT training: one episode per update, gradients clipped
// elementwise, then an RMSProp step.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ntm/config.hpp"
#include "ntm/model.hpp"
#include "ntm/optimizer.hpp"

namespace ntm {

/// One line of the training log (train.csv).
struct LogRow {
  std::size_t episode = 0;    // 0-based index of the episode just trained
  std::size_t sequences = 0;  // sequences seen so far (batch size 1)
  double bits_per_seq = 0.0;
  double median_window = 0.0;  // median over the last median_window episodes
};

inline constexpr const char* kTrainLogHeader = "episode,sequences,bits_per_seq,median_window";
std::string format_log_row(const LogRow& row);

/// Raised when an episode produces a non-finite value during training.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::size_t episode, std::uint64_t seed)
      : NumericError(what), episode_(episode), seed_(seed) {}
  std::size_t episode() const { return episode_; }
  std::uint64_t episode_seed() const { return seed_; }

 private:
  std::size_t episode_;
  std::uint64_t seed_;
};

/// Seed of training episode `index` in a run seeded with `seed`.
std::uint64_t training_episode_seed(std::uint64_t seed, std::size_t index);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  static Trainer resume(const std::string& checkpoint_path);

  Trainer(Trainer&&) noexcept;
  Trainer& operator=(Trainer&&) noexcept;
  ~Trainer();

  const TrainConfig& config() const { return config_; }
  SequenceModel& model() { return *model_; }
  const SequenceModel& model() const { return *model_; }
  RmsProp& optimizer() { return optimizer_; }
  std::size_t episodes_done() const { return episodes_done_; }

  /// Trains on the next episode of the stream and returns its log row.
  LogRow train_episode();

  /// Trains `count` more episodes. `on_row` is called after each; returning
  /// false stops early.
  std::vector<LogRow> run(std::size_t count,
                          const std::function<bool(const LogRow&)>& on_row = {});

  void save(const std::string& path) const;

 private:
  TrainConfig config_;
  std::unique_ptr<SequenceModel> model_;
  RmsProp optimizer_;
  std::unique_ptr<Tape> tape_;
  std::size_t episodes_done_ = 0;
  std::deque<double> window_;
};

struct TrainResult {
  std::vector<LogRow> log;
  std::string log_path;
  std::string checkpoint_path;
};

/// Full training run per `config`: writes <output_dir>/train.csv and
/// <output_dir>/checkpoint.bin (every checkpoint_every episodes and at the
/// end). On divergence the last good checkpoint is kept, a diagnostic is
/// written to <output_dir>/diverged.txt, and TrainingDiverged is rethrown.
/// If `resume_from` is non-empty, training continues from that checkpoint.
TrainResult train(const TrainConfig& config, const std::string& resume_from = {});

struct EvalStats {
  double mean = 0.0;
  double median = 0.0;
  std::vector<double> costs;  // bits per sequence, in episode order
};

/// Evaluation parallelism: NTM_THREADS if set, else hardware concurrency.
std::size_t evaluation_threads();

/// Bits-per-sequence over `episodes` fresh episodes (seeds derived from
/// `seed`), without gradients. Episodes are spread over `threads` model
/// replicas; results are merged by episode index.
EvalStats evaluate(const SequenceModel& model, const TaskConfig& task, std::size_t episodes,
                   std::uint64_t seed, std::size_t threads = 1);

/// Same, over an explicit episode list.
EvalStats evaluate_episodes(const SequenceModel& model, const std::vector<Episode>& episodes,
                            std::size_t threads = 1);

double median_of(std::vector<double> values);

}  // namespace ntm
