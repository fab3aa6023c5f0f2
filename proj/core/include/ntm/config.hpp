#pragma once

// Training configuration and its text file form.
//
// A config file holds `key = value` lines; `#` starts a comment. Keys:
//
//   task              copy | repeat-copy | assoc-recall | ngram | priority-sort
//   model             ntm-lstm | ntm-ff | lstm
//   hidden            comma-separated layer widths, e.g. 100 or 3x256 or 64,64
//   memory_rows       N
//   memory_width      M
//   heads             sets read_heads and write_heads together
//   read_heads, write_heads
//   shift_range       R (offsets -R..R)
//   shift_mode        softmax | scalar
//   width             data bits per vector
//   min_length, max_length, min_repeats, max_repeats,
//   norm_min_repeats, norm_max_repeats, item_length, min_items, max_items,
//   ngram_length, sort_inputs, sort_outputs
//   learning_rate, momentum, decay, epsilon, clip
//   episodes          number of training sequences
//   checkpoint_every  episodes between checkpoints (0 = only at the end)
//   median_window     episodes in the running median column of the log
//   seed              episode stream seed
//   init_seed         parameter initialization seed
//   output_dir        where train.csv and checkpoints go
//
// Unknown keys are an error.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "ntm/model.hpp"
#include "ntm/optimizer.hpp"
#include "ntm/tasks.hpp"

namespace ntm {

struct TrainConfig {
  TaskConfig task = default_task_config(TaskKind::kCopy);
  ModelConfig model;
  RmsPropConfig optimizer;
  double clip = 10.0;
  std::size_t episodes = 1000;
  std::size_t checkpoint_every = 0;
  std::size_t median_window = 100;
  std::uint64_t seed = 1;
  std::string output_dir = "run";

  /// Fills model input/output widths from the task's channel layout.
  void sync_widths();
  void validate() const;
};

/// Applies one key/value. Throws ConfigError for unknown keys or bad values.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);

/// Parses a config file on top of `base`.
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});

/// Canonical `key = value` rendering; parse_train_config() reads it back.
std::string format_train_config(const TrainConfig& config);

std::vector<std::size_t> parse_layer_list(const std::string& text);

}  // namespace ntm
