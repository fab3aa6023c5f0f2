#include "ntm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ntm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

std::string join_layers(const std::vector<std::size_t>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(layers[i]);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> parse_layer_list(const std::string& text) {
  const std::string t = trim(text);
  // "3x256" shorthand.
  if (auto x = t.find('x'); x != std::string::npos) {
    const std::size_t count = to_size("hidden", trim(t.substr(0, x)));
    const std::size_t width = to_size("hidden", trim(t.substr(x + 1)));
    return std::vector<std::size_t>(count, width);
  }
  std::vector<std::size_t> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size("hidden", trim(item)));
  if (out.empty()) throw ConfigError("'hidden' is empty");
  return out;
}

void TrainConfig::sync_widths() {
  const ChannelLayout c = task.channels();
  model.input_width = c.input_width;
  model.output_width = c.output_width;
}

void TrainConfig::validate() const {
  task.validate();
  model.validate();
  optimizer.validate();
  if (!(clip > 0)) throw ConfigError("clip bound must be positive");
  const ChannelLayout c = task.channels();
  if (c.input_width != model.input_width || c.output_width != model.output_width) {
    throw ConfigError("model widths do not match the task channel layout");
  }
  if (median_window == 0) throw ConfigError("median_window must be positive");
}

void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "task") {
    const TaskKind kind = parse_task_kind(v);
    if (kind != c.task.kind) c.task = default_task_config(kind);
  } else if (key == "model") {
    apply_model_name(c.model, v);
  } else if (key == "hidden") {
    c.model.hidden = parse_layer_list(v);
  } else if (key == "memory_rows") {
    c.model.memory_rows = to_size(key, v);
  } else if (key == "memory_width") {
    c.model.memory_width = to_size(key, v);
  } else if (key == "heads") {
    c.model.read_heads = c.model.write_heads = to_size(key, v);
  } else if (key == "read_heads") {
    c.model.read_heads = to_size(key, v);
  } else if (key == "write_heads") {
    c.model.write_heads = to_size(key, v);
  } else if (key == "shift_range") {
    c.model.shift_range = to_size(key, v);
  } else if (key == "shift_mode") {
    if (v == "softmax") {
      c.model.shift_mode = ShiftMode::kSoftmax;
    } else if (v == "scalar") {
      c.model.shift_mode = ShiftMode::kScalar;
    } else {
      throw ConfigError("shift_mode must be softmax or scalar");
    }
  } else if (key == "width") {
    c.task.width = to_size(key, v);
  } else if (key == "min_length") {
    c.task.min_length = to_size(key, v);
  } else if (key == "max_length") {
    c.task.max_length = to_size(key, v);
  } else if (key == "min_repeats") {
    c.task.min_repeats = to_size(key, v);
  } else if (key == "max_repeats") {
    c.task.max_repeats = to_size(key, v);
  } else if (key == "norm_min_repeats") {
    c.task.norm_min_repeats = to_size(key, v);
  } else if (key == "norm_max_repeats") {
    c.task.norm_max_repeats = to_size(key, v);
  } else if (key == "item_length") {
    c.task.item_length = to_size(key, v);
  } else if (key == "min_items") {
    c.task.min_items = to_size(key, v);
  } else if (key == "max_items") {
    c.task.max_items = to_size(key, v);
  } else if (key == "ngram_length") {
    c.task.ngram_length = to_size(key, v);
  } else if (key == "sort_inputs") {
    c.task.sort_inputs = to_size(key, v);
  } else if (key == "sort_outputs") {
    c.task.sort_outputs = to_size(key, v);
  } else if (key == "learning_rate") {
    c.optimizer.learning_rate = to_double(key, v);
  } else if (key == "momentum") {
    c.optimizer.momentum = to_double(key, v);
  } else if (key == "decay") {
    c.optimizer.decay = to_double(key, v);
  } else if (key == "epsilon") {
    c.optimizer.epsilon = to_double(key, v);
  } else if (key == "clip") {
    c.clip = to_double(key, v);
  } else if (key == "episodes") {
    c.episodes = to_size(key, v);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = to_size(key, v);
  } else if (key == "median_window") {
    c.median_window = to_size(key, v);
  } else if (key == "seed") {
    c.seed = to_u64(key, v);
  } else if (key == "init_seed") {
    c.model.init_seed = to_u64(key, v);
  } else if (key == "output_dir") {
    c.output_dir = v;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig parse_train_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.sync_widths();
  base.validate();
  return base;
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), std::move(base));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  const auto& t = c.task;
  const auto& m = c.model;
  out << "task = " << to_string(t.kind) << '\n'
      << "model = " << m.name() << '\n'
      << "hidden = " << join_layers(m.hidden) << '\n'
      << "memory_rows = " << m.memory_rows << '\n'
      << "memory_width = " << m.memory_width << '\n'
      << "read_heads = " << m.read_heads << '\n'
      << "write_heads = " << m.write_heads << '\n'
      << "shift_range = " << m.shift_range << '\n'
      << "shift_mode = " << (m.shift_mode == ShiftMode::kSoftmax ? "softmax" : "scalar") << '\n'
      << "width = " << t.width << '\n'
      << "min_length = " << t.min_length << '\n'
      << "max_length = " << t.max_length << '\n'
      << "min_repeats = " << t.min_repeats << '\n'
      << "max_repeats = " << t.max_repeats << '\n'
      << "norm_min_repeats = " << t.norm_min_repeats << '\n'
      << "norm_max_repeats = " << t.norm_max_repeats << '\n'
      << "item_length = " << t.item_length << '\n'
      << "min_items = " << t.min_items << '\n'
      << "max_items = " << t.max_items << '\n'
      << "ngram_length = " << t.ngram_length << '\n'
      << "sort_inputs = " << t.sort_inputs << '\n'
      << "sort_outputs = " << t.sort_outputs << '\n'
      << "learning_rate = " << c.optimizer.learning_rate << '\n'
      << "momentum = " << c.optimizer.momentum << '\n'
      << "decay = " << c.optimizer.decay << '\n'
      << "epsilon = " << c.optimizer.epsilon << '\n'
      << "clip = " << c.clip << '\n'
      << "episodes = " << c.episodes << '\n'
      << "checkpoint_every = " << c.checkpoint_every << '\n'
      << "median_window = " << c.median_window << '\n'
      << "seed = " << c.seed << '\n'
      << "init_seed = " << m.init_seed << '\n'
      << "output_dir = " << c.output_dir << '\n';
  return out.str();
}

}  // namespace ntm
