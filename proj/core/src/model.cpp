#include "ntm/model.hpp"

#include <cmath>
#include <numbers>

namespace ntm {
namespace {

// Initial weightings start mostly on location 0 (softmax weight 0.9);
// uniform starting weightings are a fixed point of every shift.
double initial_focus_logit(std::size_t rows) {
  return rows > 1 ? std::log(9.0 * static_cast<double>(rows - 1)) : 0.0;
}

constexpr double kMemoryBiasScale = 1e-6;

std::vector<double> to_vector(Var v) { return {v.value().begin(), v.value().end()}; }

std::vector<double> sigmoid_values(Var v) {
  std::vector<double> out;
  for (double z : v.value()) out.push_back(1.0 / (1.0 + std::exp(-z)));
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (input_width == 0 || output_width == 0) throw ConfigError("model input/output width is zero");
  if (hidden.empty()) throw ConfigError("model needs at least one hidden layer");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer width is zero");
  }
  if (kind == ModelKind::kNtm) {
    if (memory_rows == 0 || memory_width == 0) throw ConfigError("memory shape has a zero side");
    if (write_heads == 0 && read_heads == 0) throw ConfigError("NTM needs at least one head");
  }
}

std::string ModelConfig::name() const {
  if (kind == ModelKind::kLstm) return "lstm";
  return controller == ControllerKind::kLstm ? "ntm-lstm" : "ntm-ff";
}

void apply_model_name(ModelConfig& config, const std::string& name) {
  if (name == "ntm-lstm") {
    config.kind = ModelKind::kNtm;
    config.controller = ControllerKind::kLstm;
  } else if (name == "ntm-ff") {
    config.kind = ModelKind::kNtm;
    config.controller = ControllerKind::kFeedforward;
  } else if (name == "lstm") {
    config.kind = ModelKind::kLstm;
    config.controller = ControllerKind::kLstm;
  } else {
    throw ConfigError("unknown model '" + name + "' (expected ntm-lstm, ntm-ff or lstm)");
  }
}

double EpisodeForward::loss_bits() const { return loss.scalar() / std::numbers::ln2; }

Var scored_loss(Tape& tape, const std::vector<Var>& logits, const Episode& episode) {
  std::vector<Var> scored;
  for (std::size_t t = 0; t < episode.steps; ++t) {
    if (episode.score_mask[t]) scored.push_back(logits[t]);
  }
  if (scored.empty()) return tape.constant(0.0, Shape::scalar());
  return tape.sigmoid_cross_entropy(tape.concat(scored), episode.targets);
}

std::vector<double> scored_probabilities(const std::vector<Var>& logits, const Episode& episode) {
  std::vector<double> out;
  out.reserve(episode.targets.size());
  for (std::size_t t = 0; t < episode.steps; ++t) {
    if (!episode.score_mask[t]) continue;
    for (double z : logits[t].value()) out.push_back(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// NtmModel

NtmModel::NtmModel(const ModelConfig& config) : SequenceModel(config) {
  config.validate();
  if (config.kind != ModelKind::kNtm) throw ConfigError("NtmModel needs an NTM configuration");
  Rng rng(config.init_seed);
  const std::size_t n = config.memory_rows, m = config.memory_width;
  layout_ = InterfaceLayout(m, config.read_heads, config.write_heads, config.shift_range,
                            config.shift_mode, config.output_width);

  ControllerConfig cc;
  cc.kind = config.controller;
  cc.input_width = config.input_width + config.read_heads * m;
  cc.hidden = config.hidden;
  cc.interface_width = layout_.width();
  controller_ = Controller(params_, "ctrl", cc, rng);

  memory_bias_ = &params_.add("memory.bias", {n, m});
  for (auto& v : memory_bias_->value) v = rng.uniform(-kMemoryBiasScale, kMemoryBiasScale);
  for (std::size_t h = 0; h < config.read_heads + config.write_heads; ++h) {
    const bool is_read = h < config.read_heads;
    const std::string name = is_read ? "read" + std::to_string(h)
                                     : "write" + std::to_string(h - config.read_heads);
    auto& w = params_.add(name + ".w0", Shape::vector(n));
    w.value[0] = initial_focus_logit(n);
    weighting_bias_.push_back(&w);
    if (is_read) read_bias_.push_back(&params_.add(name + ".r0", Shape::vector(m)));
  }
  if (config.read_heads > 0) {
    read_to_output_ = &params_.add("out.read.W", {config.output_width, config.read_heads * m});
    init_uniform_fan_in(*read_to_output_, config.read_heads * m, rng);
  }
}

NtmState NtmModel::initial_state(Tape& tape) const {
  NtmState s;
  s.memory = tape.tanh(tape.parameter(*memory_bias_));
  for (auto* w : weighting_bias_) s.weightings.push_back(tape.softmax(tape.parameter(*w)));
  for (auto* r : read_bias_) s.reads.push_back(tape.parameter(*r));
  s.controller = controller_.initial_state(tape);
  return s;
}

NtmModel::StepOutput NtmModel::step(Tape& tape, NtmState& state, Var x) const {
  if (x.size() != config_.input_width) {
    throw ConfigError("NTM input width " + std::to_string(x.size()) + ", expected " +
                      std::to_string(config_.input_width));
  }
  std::vector<Var> parts{x};
  parts.insert(parts.end(), state.reads.begin(), state.reads.end());
  Var x_aug = parts.size() == 1 ? x : tape.concat(parts);
  Var iface = controller_.step(tape, state.controller, x_aug);

  StepOutput out;
  std::vector<WriteRequest> writes;
  const auto heads = layout_.heads();
  for (std::size_t h = 0; h < heads.size(); ++h) {
    HeadParams p = squash_head_params(tape, iface, heads[h], layout_, config_.memory_rows);
    Var w = address(tape, state.memory, state.weightings[h], p).sharpened;
    out.weightings.push_back(w);
    if (heads[h].kind == HeadKind::kWrite) {
      writes.push_back({w, p.erase, p.add});
      out.adds.push_back(p.add);
      out.erases.push_back(p.erase);
    }
  }
  if (!writes.empty()) state.memory = write_memory(tape, state.memory, writes);

  state.reads.clear();
  for (std::size_t h = 0; h < layout_.read_heads(); ++h) {
    state.reads.push_back(read_memory(tape, state.memory, out.weightings[h]));
  }
  state.weightings = out.weightings;

  const Segment& seg = layout_.output();
  Var logits = tape.slice(iface, seg.offset, seg.length);
  if (read_to_output_ != nullptr) {
    Var reads = state.reads.size() == 1 ? state.reads.front() : tape.concat(state.reads);
    logits = tape.add(logits, tape.matmul(tape.parameter(*read_to_output_), reads));
  }
  out.logits = logits;
  return out;
}

EpisodeForward NtmModel::forward(Tape& tape, const Episode& episode, TraceLog* trace) {
  if (episode.input_width != config_.input_width || episode.output_width != config_.output_width) {
    throw ConfigError("episode channels (" + std::to_string(episode.input_width) + " in, " +
                      std::to_string(episode.output_width) + " out) do not match model " +
                      config_.name());
  }
  NtmState state = initial_state(tape);
  const std::size_t nr = layout_.read_heads(), nw = layout_.write_heads();
  if (trace) {
    *trace = TraceLog{};
    trace->steps = episode.steps;
    trace->memory_rows = config_.memory_rows;
    trace->read_weightings.resize(nr);
    trace->write_weightings.resize(nw);
    trace->adds.resize(nw);
    trace->reads.resize(nr);
  }
  EpisodeForward fwd;
  for (std::size_t t = 0; t < episode.steps; ++t) {
    Var x = tape.input(episode.input_row(t), Shape::vector(episode.input_width));
    StepOutput s;
    try {
      s = step(tape, state, x);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(t));
    }
    fwd.logits.push_back(s.logits);
    if (trace) {
      trace->inputs.emplace_back(episode.input_row(t).begin(), episode.input_row(t).end());
      trace->outputs.push_back(sigmoid_values(s.logits));
      for (std::size_t h = 0; h < nr; ++h) {
        trace->read_weightings[h].push_back(to_vector(s.weightings[h]));
        trace->reads[h].push_back(to_vector(state.reads[h]));
      }
      for (std::size_t h = 0; h < nw; ++h) {
        trace->write_weightings[h].push_back(to_vector(s.weightings[nr + h]));
        trace->adds[h].push_back(to_vector(s.adds[h]));
      }
    }
  }
  fwd.loss = scored_loss(tape, fwd.logits, episode);
  return fwd;
}

// ---------------------------------------------------------------------------
// LstmModel

LstmModel::LstmModel(const ModelConfig& config) : SequenceModel(config) {
  config.validate();
  if (config.kind != ModelKind::kLstm) throw ConfigError("LstmModel needs an LSTM configuration");
  Rng rng(config.init_seed);
  stack_ = LstmStack(params_, "lstm", config.input_width, config.hidden, rng);
  output_weights_ = &params_.add("out.W", {config.output_width, stack_.output_width()});
  output_bias_ = &params_.add("out.b", Shape::vector(config.output_width));
  init_uniform_fan_in(*output_weights_, stack_.output_width(), rng);
}

Var LstmModel::step(Tape& tape, ControllerState& state, Var x) const {
  Var h = stack_.step(tape, state, x);
  return tape.add(tape.matmul(tape.parameter(*output_weights_), h),
                  tape.parameter(*output_bias_));
}

EpisodeForward LstmModel::forward(Tape& tape, const Episode& episode, TraceLog* trace) {
  if (episode.input_width != config_.input_width || episode.output_width != config_.output_width) {
    throw ConfigError("episode channels do not match model " + config_.name());
  }
  ControllerState state = initial_state(tape);
  if (trace) {
    *trace = TraceLog{};
    trace->steps = episode.steps;
  }
  EpisodeForward fwd;
  for (std::size_t t = 0; t < episode.steps; ++t) {
    Var x = tape.input(episode.input_row(t), Shape::vector(episode.input_width));
    Var y;
    try {
      y = step(tape, state, x);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(t));
    }
    fwd.logits.push_back(y);
    if (trace) {
      trace->inputs.emplace_back(episode.input_row(t).begin(), episode.input_row(t).end());
      trace->outputs.push_back(sigmoid_values(y));
    }
  }
  fwd.loss = scored_loss(tape, fwd.logits, episode);
  return fwd;
}

// ---------------------------------------------------------------------------

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config) {
  if (config.kind == ModelKind::kNtm) return std::make_unique<NtmModel>(config);
  return std::make_unique<LstmModel>(config);
}

std::unique_ptr<SequenceModel> clone_model(const SequenceModel& model) {
  auto out = make_model(model.config());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    out->params()[i].value = model.params()[i].value;
  }
  return out;
}

}  // namespace ntm
