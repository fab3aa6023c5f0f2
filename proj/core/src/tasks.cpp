#include "ntm/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ntm/rng.hpp"

namespace ntm {
namespace {

BitVector random_bits(Rng& rng, std::size_t width) {
  BitVector v(width);
  for (auto& b : v) b = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return v;
}

void check_range(std::size_t lo, std::size_t hi, std::string_view what) {
  if (lo == 0 || lo > hi) {
    throw ConfigError(std::string(what) + " range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] is empty or starts at zero");
  }
}

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

std::size_t common_width(const std::vector<BitVector>& vs) {
  if (vs.empty()) throw ConfigError("empty vector sequence");
  const std::size_t w = vs.front().size();
  for (const auto& v : vs) {
    if (v.size() != w) throw ConfigError("vectors in a sequence must share one width");
  }
  if (w == 0) throw ConfigError("zero-width vectors");
  return w;
}

/// Appends a row of zeros and returns a pointer to it.
double* push_row(std::vector<double>& data, std::size_t width) {
  data.resize(data.size() + width, 0.0);
  return data.data() + data.size() - width;
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kRepeatCopy: return "repeat-copy";
    case TaskKind::kAssocRecall: return "assoc-recall";
    case TaskKind::kNGram: return "ngram";
    case TaskKind::kPrioritySort: return "priority-sort";
  }
  return "unknown";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "copy") return TaskKind::kCopy;
  if (text == "repeat-copy" || text == "repeat_copy") return TaskKind::kRepeatCopy;
  if (text == "assoc-recall" || text == "assoc_recall") return TaskKind::kAssocRecall;
  if (text == "ngram" || text == "n-gram") return TaskKind::kNGram;
  if (text == "priority-sort" || text == "priority_sort" || text == "sort") {
    return TaskKind::kPrioritySort;
  }
  throw ConfigError("unknown task '" + text + "'");
}

std::size_t Episode::scored_steps() const {
  return static_cast<std::size_t>(std::count(score_mask.begin(), score_mask.end(), 1));
}

void Episode::validate() const {
  if (score_mask.size() != steps) throw FormatError("episode: mask length differs from steps");
  if (inputs.size() != steps * input_width) throw FormatError("episode: input size mismatch");
  if (targets.size() != scored_steps() * output_width) {
    throw FormatError("episode: target size mismatch");
  }
}

ChannelLayout TaskConfig::channels() const {
  switch (kind) {
    case TaskKind::kCopy: return {width + 1, width};
    case TaskKind::kRepeatCopy: return {width + 2, width + 1};
    case TaskKind::kAssocRecall: return {width + 2, width};
    case TaskKind::kNGram: return {1, 1};
    case TaskKind::kPrioritySort: return {width + 1, width};
  }
  return {0, 0};
}

void TaskConfig::validate() const {
  if (kind != TaskKind::kNGram && width == 0) throw ConfigError("task width must be positive");
  switch (kind) {
    case TaskKind::kCopy:
      check_range(min_length, max_length, "length");
      break;
    case TaskKind::kRepeatCopy:
      check_range(min_length, max_length, "length");
      check_range(min_repeats, max_repeats, "repeat");
      check_range(norm_min_repeats, norm_max_repeats, "repeat normalization");
      if (norm_min_repeats == norm_max_repeats) {
        throw ConfigError("repeat normalization range needs two distinct values");
      }
      break;
    case TaskKind::kAssocRecall:
      check_range(min_items, max_items, "item");
      if (min_items < 2) throw ConfigError("associative recall needs at least 2 items");
      if (item_length == 0) throw ConfigError("item length must be positive");
      break;
    case TaskKind::kNGram:
      if (ngram_length <= kNGramContext + 1) throw ConfigError("n-gram sequence too short");
      break;
    case TaskKind::kPrioritySort:
      if (sort_outputs == 0 || sort_outputs > sort_inputs) {
        throw ConfigError("priority sort must keep between 1 and sort_inputs vectors");
      }
      break;
  }
}

TaskConfig default_task_config(TaskKind kind) {
  TaskConfig c;
  c.kind = kind;
  switch (kind) {
    case TaskKind::kCopy:
      c.min_length = 1;
      c.max_length = 20;
      break;
    case TaskKind::kRepeatCopy:
      c.min_length = 1;
      c.max_length = 10;
      break;
    case TaskKind::kAssocRecall:
      c.width = 6;
      break;
    case TaskKind::kNGram:
    case TaskKind::kPrioritySort:
      break;
  }
  return c;
}

Episode generate_episode(const TaskConfig& config, std::uint64_t seed) {
  config.validate();
  switch (config.kind) {
    case TaskKind::kCopy:
      return gen_copy(seed, config.min_length, config.max_length, config.width);
    case TaskKind::kRepeatCopy:
      return gen_repeat_copy(seed, config);
    case TaskKind::kAssocRecall:
      return gen_assoc_recall(seed, config);
    case TaskKind::kNGram:
      return gen_ngram(seed, config.ngram_length).first;
    case TaskKind::kPrioritySort:
      return gen_priority_sort(seed, config);
  }
  throw ConfigError("unknown task");
}

// ---------------------------------------------------------------------------
// Copy

Episode make_copy_episode(const std::vector<BitVector>& sequence) {
  const std::size_t w = common_width(sequence);
  const std::size_t len = sequence.size();
  Episode e;
  e.task = TaskKind::kCopy;
  e.input_width = w + 1;
  e.output_width = w;
  e.steps = 2 * len + 1;
  e.meta.length = len;
  for (const auto& v : sequence) {
    std::copy(v.begin(), v.end(), push_row(e.inputs, e.input_width));
    e.score_mask.push_back(0);
  }
  push_row(e.inputs, e.input_width)[w] = 1.0;
  e.score_mask.push_back(0);
  for (const auto& v : sequence) {
    push_row(e.inputs, e.input_width);
    e.score_mask.push_back(1);
    e.targets.insert(e.targets.end(), v.begin(), v.end());
  }
  return e;
}

Episode gen_copy(std::uint64_t seed, std::size_t min_length, std::size_t max_length,
                 std::size_t width) {
  check_range(min_length, max_length, "length");
  Rng rng(seed);
  const std::size_t len = draw(rng, min_length, max_length);
  std::vector<BitVector> seq;
  for (std::size_t i = 0; i < len; ++i) seq.push_back(random_bits(rng, width));
  Episode e = make_copy_episode(seq);
  e.seed = seed;
  return e;
}

// ---------------------------------------------------------------------------
// Repeat copy

RepeatNormalization RepeatNormalization::from_range(std::size_t lo, std::size_t hi) {
  const auto a = static_cast<double>(lo);
  const auto n = static_cast<double>(hi - lo + 1);
  return {a + (n - 1.0) / 2.0, std::sqrt((n * n - 1.0) / 12.0)};
}

double RepeatNormalization::apply(std::size_t repeats) const {
  return (static_cast<double>(repeats) - mean) / stddev;
}

Episode make_repeat_copy_episode(const std::vector<BitVector>& sequence, std::size_t repeats,
                                 const RepeatNormalization& norm) {
  const std::size_t w = common_width(sequence);
  const std::size_t len = sequence.size();
  Episode e;
  e.task = TaskKind::kRepeatCopy;
  e.input_width = w + 2;
  e.output_width = w + 1;
  e.steps = len + 1 + repeats * len + 1;
  e.meta.length = len;
  e.meta.repeats = repeats;
  e.meta.repeat_input = norm.apply(repeats);
  for (const auto& v : sequence) {
    std::copy(v.begin(), v.end(), push_row(e.inputs, e.input_width));
    e.score_mask.push_back(0);
  }
  double* delim = push_row(e.inputs, e.input_width);
  delim[w] = 1.0;
  delim[w + 1] = e.meta.repeat_input;
  e.score_mask.push_back(0);
  for (std::size_t r = 0; r < repeats; ++r) {
    for (const auto& v : sequence) {
      push_row(e.inputs, e.input_width);
      e.score_mask.push_back(1);
      std::copy(v.begin(), v.end(), push_row(e.targets, e.output_width));
    }
  }
  push_row(e.inputs, e.input_width);
  e.score_mask.push_back(1);
  push_row(e.targets, e.output_width)[w] = 1.0;
  return e;
}

Episode gen_repeat_copy(std::uint64_t seed, const TaskConfig& config) {
  check_range(config.min_length, config.max_length, "length");
  check_range(config.min_repeats, config.max_repeats, "repeat");
  Rng rng(seed);
  const std::size_t len = draw(rng, config.min_length, config.max_length);
  const std::size_t repeats = draw(rng, config.min_repeats, config.max_repeats);
  std::vector<BitVector> seq;
  for (std::size_t i = 0; i < len; ++i) seq.push_back(random_bits(rng, config.width));
  Episode e = make_repeat_copy_episode(
      seq, repeats,
      RepeatNormalization::from_range(config.norm_min_repeats, config.norm_max_repeats));
  e.seed = seed;
  return e;
}

// ---------------------------------------------------------------------------
// Associative recall

const Item& assoc_recall_oracle(const std::vector<Item>& items, std::size_t query) {
  if (query + 1 >= items.size()) throw ConfigError("query item has no successor");
  return items[query + 1];
}

Episode make_assoc_recall_episode(const std::vector<Item>& items, std::size_t query) {
  if (items.size() < 2) throw ConfigError("associative recall needs at least 2 items");
  const Item& answer = assoc_recall_oracle(items, query);
  std::vector<BitVector> all;
  for (const auto& item : items) all.insert(all.end(), item.begin(), item.end());
  const std::size_t w = common_width(all);

  Episode e;
  e.task = TaskKind::kAssocRecall;
  e.input_width = w + 2;
  e.output_width = w;
  e.meta.items = items.size();
  e.meta.query = query;
  auto emit = [&](const BitVector* v, int delimiter) {
    double* row = push_row(e.inputs, e.input_width);
    if (v) std::copy(v->begin(), v->end(), row);
    if (delimiter >= 0) row[w + static_cast<std::size_t>(delimiter)] = 1.0;
    e.score_mask.push_back(0);
  };
  for (const auto& item : items) {
    emit(nullptr, 0);
    for (const auto& v : item) emit(&v, -1);
  }
  emit(nullptr, 1);
  for (const auto& v : items[query]) emit(&v, -1);
  emit(nullptr, 1);
  for (const auto& v : answer) {
    push_row(e.inputs, e.input_width);
    e.score_mask.push_back(1);
    e.targets.insert(e.targets.end(), v.begin(), v.end());
  }
  e.steps = e.score_mask.size();
  return e;
}

Episode gen_assoc_recall(std::uint64_t seed, const TaskConfig& config) {
  check_range(config.min_items, config.max_items, "item");
  Rng rng(seed);
  const std::size_t n = draw(rng, std::max<std::size_t>(config.min_items, 2), config.max_items);
  std::vector<Item> items(n);
  for (auto& item : items) {
    for (std::size_t j = 0; j < config.item_length; ++j) {
      item.push_back(random_bits(rng, config.width));
    }
  }
  const std::size_t query = draw(rng, 0, n - 2);
  Episode e = make_assoc_recall_episode(items, query);
  e.seed = seed;
  return e;
}

// ---------------------------------------------------------------------------
// Dynamic n-grams

double sample_beta_half(double u) {
  const double s = std::sin(std::numbers::pi * u / 2.0);
  return s * s;
}

NGramTable sample_ngram_table(std::uint64_t seed) {
  Rng rng(seed);
  NGramTable t;
  for (auto& p : t.prob) p = sample_beta_half(rng.uniform());
  return t;
}

std::size_t ngram_context(std::span<const int> bits, std::size_t end) {
  if (end < kNGramContext || end > bits.size()) throw ConfigError("n-gram context out of range");
  std::size_t c = 0;
  for (std::size_t i = end - kNGramContext; i < end; ++i) {
    c = (c << 1) | static_cast<std::size_t>(bits[i] != 0);
  }
  return c;
}

std::vector<int> sample_ngram_bits(const NGramTable& table, std::size_t length,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> bits;
  bits.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double p = i < kNGramContext ? 0.5 : table.prob[ngram_context(bits, i)];
    bits.push_back(rng.uniform() < p ? 1 : 0);
  }
  return bits;
}

Episode make_ngram_episode(const std::vector<int>& bits) {
  if (bits.size() <= kNGramContext + 1) throw ConfigError("n-gram sequence too short");
  Episode e;
  e.task = TaskKind::kNGram;
  e.input_width = 1;
  e.output_width = 1;
  e.steps = bits.size() - 1;
  e.meta.length = bits.size();
  for (std::size_t t = 0; t + 1 < bits.size(); ++t) {
    e.inputs.push_back(bits[t] ? 1.0 : 0.0);
    const bool scored = t + 1 >= kNGramContext;
    e.score_mask.push_back(scored ? 1 : 0);
    if (scored) e.targets.push_back(bits[t + 1] ? 1.0 : 0.0);
  }
  return e;
}

std::pair<Episode, NGramTable> gen_ngram(std::uint64_t seed, std::size_t length) {
  const NGramTable table = sample_ngram_table(derive_seed(seed, 0));
  const std::vector<int> bits = sample_ngram_bits(table, length, derive_seed(seed, 1));
  Episode e = make_ngram_episode(bits);
  e.seed = seed;
  return {std::move(e), table};
}

NGramCounts ngram_counts(std::span<const int> history, std::size_t context) {
  NGramCounts counts;
  for (std::size_t j = kNGramContext; j < history.size(); ++j) {
    if (ngram_context(history, j) == context) {
      if (history[j]) {
        ++counts.ones;
      } else {
        ++counts.zeros;
      }
    }
  }
  return counts;
}

double optimal_estimator(std::span<const int> history, std::size_t context) {
  if (history.size() < kNGramContext) throw ConfigError("history shorter than the context");
  const NGramCounts c = ngram_counts(history, context);
  return (static_cast<double>(c.ones) + 0.5) / (static_cast<double>(c.ones + c.zeros) + 1.0);
}

std::vector<double> optimal_predictions(std::span<const int> bits) {
  std::array<std::size_t, kNGramContexts> zeros{};
  std::array<std::size_t, kNGramContexts> ones{};
  std::vector<double> out;
  for (std::size_t j = kNGramContext; j < bits.size(); ++j) {
    const std::size_t c = ngram_context(bits, j);
    out.push_back((static_cast<double>(ones[c]) + 0.5) /
                  (static_cast<double>(ones[c] + zeros[c]) + 1.0));
    if (bits[j]) {
      ++ones[c];
    } else {
      ++zeros[c];
    }
  }
  return out;
}

std::vector<int> episode_bits(const Episode& e) {
  if (e.task != TaskKind::kNGram) throw ConfigError("episode_bits: not an n-gram episode");
  std::vector<int> bits;
  for (std::size_t t = 0; t < e.steps; ++t) bits.push_back(e.inputs[t] != 0.0);
  bits.push_back(e.targets.back() != 0.0);
  return bits;
}

// ---------------------------------------------------------------------------
// Priority sort

std::vector<std::size_t> priority_sort_order(const std::vector<double>& priorities,
                                             std::size_t keep) {
  if (keep > priorities.size()) throw ConfigError("priority sort keeps more than it receives");
  std::vector<std::size_t> idx(priorities.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return priorities[a] > priorities[b];
  });
  idx.resize(keep);
  return idx;
}

Episode make_priority_sort_episode(const std::vector<BitVector>& vectors,
                                   const std::vector<double>& priorities, std::size_t keep) {
  const std::size_t w = common_width(vectors);
  if (priorities.size() != vectors.size()) throw ConfigError("one priority per vector required");
  Episode e;
  e.task = TaskKind::kPrioritySort;
  e.input_width = w + 1;
  e.output_width = w;
  e.meta.priorities = priorities;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    double* row = push_row(e.inputs, e.input_width);
    std::copy(vectors[i].begin(), vectors[i].end(), row);
    row[w] = priorities[i];
    e.score_mask.push_back(0);
  }
  for (std::size_t idx : priority_sort_order(priorities, keep)) {
    push_row(e.inputs, e.input_width);
    e.score_mask.push_back(1);
    e.targets.insert(e.targets.end(), vectors[idx].begin(), vectors[idx].end());
  }
  e.steps = e.score_mask.size();
  return e;
}

Episode gen_priority_sort(std::uint64_t seed, const TaskConfig& config) {
  Rng rng(seed);
  std::vector<BitVector> vectors;
  std::vector<double> priorities;
  for (std::size_t i = 0; i < config.sort_inputs; ++i) {
    vectors.push_back(random_bits(rng, config.width));
    priorities.push_back(rng.uniform(-1.0, 1.0));
  }
  Episode e = make_priority_sort_episode(vectors, priorities, config.sort_outputs);
  e.seed = seed;
  return e;
}

// ---------------------------------------------------------------------------
// Scoring

double bits_per_sequence(std::span<const double> probabilities, const Episode& episode) {
  if (probabilities.size() != episode.targets.size()) {
    throw ConfigError("bits_per_sequence: " + std::to_string(probabilities.size()) +
                      " predictions for " + std::to_string(episode.targets.size()) + " targets");
  }
  double bits = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double t = episode.targets[i];
    bits -= t * std::log2(p) + (1.0 - t) * std::log2(1.0 - p);
  }
  return bits;
}

}  // namespace ntm
