#pragma once

// Seeded episode generators for the five algorithmic tasks, the builders
// they share with tests, and the analytic reference predictors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ntm/errors.hpp"

namespace ntm {

enum class TaskKind { kCopy, kRepeatCopy, kAssocRecall, kNGram, kPrioritySort };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// Task-specific annotations carried with an episode.
struct EpisodeMeta {
  std::size_t length = 0;   // copy / repeat copy sequence length
  std::size_t repeats = 0;  // repeat copy
  double repeat_input = 0;  // normalized repeat value fed to the network
  std::size_t items = 0;    // associative recall
  std::size_t query = 0;    // 0-based index of the query item
  std::vector<double> priorities;  // priority sort, in input order
};

/// One supervised sequence. `inputs` has one row per step; `targets` has
/// one row per scored step, in step order.
struct Episode {
  TaskKind task = TaskKind::kCopy;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t input_width = 0;
  std::size_t output_width = 0;
  std::vector<double> inputs;          // steps x input_width
  std::vector<double> targets;         // scored_steps() x output_width
  std::vector<std::uint8_t> score_mask;  // steps
  EpisodeMeta meta;

  std::size_t scored_steps() const;
  std::span<const double> input_row(std::size_t t) const {
    return {inputs.data() + t * input_width, input_width};
  }
  std::span<const double> target_row(std::size_t k) const {
    return {targets.data() + k * output_width, output_width};
  }
  /// Throws FormatError if sizes are inconsistent.
  void validate() const;
};

using BitVector = std::vector<double>;

/// Channel counts per task.
struct ChannelLayout {
  std::size_t input_width;
  std::size_t output_width;
};

struct TaskConfig {
  TaskKind kind = TaskKind::kCopy;
  std::size_t width = 8;  // bits per data vector (6 for associative recall)
  std::size_t min_length = 1;
  std::size_t max_length = 20;
  std::size_t min_repeats = 1;
  std::size_t max_repeats = 10;
  // Repeat-count normalization is frozen from this range even when the
  // sampled range is overridden for evaluation.
  std::size_t norm_min_repeats = 1;
  std::size_t norm_max_repeats = 10;
  std::size_t item_length = 3;
  std::size_t min_items = 2;
  std::size_t max_items = 6;
  std::size_t ngram_length = 200;
  std::size_t sort_inputs = 20;
  std::size_t sort_outputs = 16;

  ChannelLayout channels() const;
  void validate() const;
};

/// Defaults for a task (paper-scale ranges).
TaskConfig default_task_config(TaskKind kind);

Episode generate_episode(const TaskConfig& config, std::uint64_t seed);

// --- copy ------------------------------------------------------------------
// Input channels: `width` data bits + delimiter. L data steps, one delimiter
// step, then L silent steps during which the L vectors are the targets.
Episode make_copy_episode(const std::vector<BitVector>& sequence);
Episode gen_copy(std::uint64_t seed, std::size_t min_length, std::size_t max_length,
                 std::size_t width = 8);

// --- repeat copy -----------------------------------------------------------
// Input channels: data, delimiter, repeat scalar. The delimiter step carries
// the normalized repeat count. Targets: data + end marker; k * L copies then
// one end-marker step.
struct RepeatNormalization {
  double mean;
  double stddev;
  /// Moments of the discrete uniform distribution on {lo..hi}.
  static RepeatNormalization from_range(std::size_t lo, std::size_t hi);
  double apply(std::size_t repeats) const;
};
Episode make_repeat_copy_episode(const std::vector<BitVector>& sequence, std::size_t repeats,
                                 const RepeatNormalization& norm);
Episode gen_repeat_copy(std::uint64_t seed, const TaskConfig& config);

// --- associative recall ----------------------------------------------------
// Input channels: data, item delimiter, query delimiter. Each item is an
// item-delimiter step followed by its vectors; then a query delimiter, the
// query item, and a closing query delimiter. Targets: the item after the
// query.
using Item = std::vector<BitVector>;
Episode make_assoc_recall_episode(const std::vector<Item>& items, std::size_t query);
Episode gen_assoc_recall(std::uint64_t seed, const TaskConfig& config);
/// Reference answer: the item that follows the query.
const Item& assoc_recall_oracle(const std::vector<Item>& items, std::size_t query);

// --- dynamic n-grams -------------------------------------------------------
inline constexpr std::size_t kNGramContext = 5;
inline constexpr std::size_t kNGramContexts = 1u << kNGramContext;

/// P(next bit = 1 | 5-bit context). Context index packs the five previous
/// bits with the oldest bit as the most significant.
struct NGramTable {
  std::array<double, kNGramContexts> prob{};
};

/// sin^2(pi u / 2) maps U(0,1) onto Beta(1/2, 1/2).
double sample_beta_half(double u);
NGramTable sample_ngram_table(std::uint64_t seed);
/// First 5 bits Bernoulli(1/2), the rest from `table`.
std::vector<int> sample_ngram_bits(const NGramTable& table, std::size_t length,
                                   std::uint64_t seed);
/// One input bit per step; step t's target is bit t + 1. Steps whose
/// target has a full 5-bit context are scored.
Episode make_ngram_episode(const std::vector<int>& bits);
std::pair<Episode, NGramTable> gen_ngram(std::uint64_t seed, std::size_t length = 200);

std::size_t ngram_context(std::span<const int> bits, std::size_t end);

struct NGramCounts {
  std::size_t zeros = 0;
  std::size_t ones = 0;
};
/// Occurrences of `context` in `history` followed by a bit that is itself
/// still inside `history`.
NGramCounts ngram_counts(std::span<const int> history, std::size_t context);
/// (N1 + 1/2) / (N1 + N0 + 1).
double optimal_estimator(std::span<const int> history, std::size_t context);
/// Bayes-optimal P(bit = 1) for every scored step of an n-gram episode,
/// computed with running counts.
std::vector<double> optimal_predictions(std::span<const int> bits);
std::vector<int> episode_bits(const Episode& ngram_episode);

// --- priority sort ---------------------------------------------------------
// Input channels: data + priority. All vectors are shown, then `keep` silent
// steps emit the highest-priority vectors in descending priority order.
Episode make_priority_sort_episode(const std::vector<BitVector>& vectors,
                                   const std::vector<double>& priorities, std::size_t keep);
Episode gen_priority_sort(std::uint64_t seed, const TaskConfig& config);
/// Indices of the `keep` highest priorities, descending; ties by index.
std::vector<std::size_t> priority_sort_order(const std::vector<double>& priorities,
                                             std::size_t keep);

// --- scoring ---------------------------------------------------------------
inline constexpr double kProbabilityClamp = 1e-12;

/// -sum over scored rows and channels of t log2 p + (1 - t) log2 (1 - p).
/// `probabilities` has one row per scored step.
double bits_per_sequence(std::span<const double> probabilities, const Episode& episode);

}  // namespace ntm
