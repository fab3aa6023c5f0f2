#include "ntm/controllers.hpp"

#include <cmath>

namespace ntm {

std::string to_string(ControllerKind kind) {
  return kind == ControllerKind::kLstm ? "lstm" : "feedforward";
}

ControllerKind parse_controller_kind(const std::string& text) {
  if (text == "lstm") return ControllerKind::kLstm;
  if (text == "feedforward" || text == "ff") return ControllerKind::kFeedforward;
  throw ConfigError("unknown controller kind '" + text + "'");
}

void init_uniform_fan_in(Parameter& p, std::size_t fan_in, Rng& rng) {
  const double bound = 0.1 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : p.value) v = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// LstmStack

LstmStack::LstmStack(ParameterStore& store, const std::string& prefix, std::size_t input_width,
                     const std::vector<std::size_t>& hidden, Rng& rng) {
  if (hidden.empty()) throw ConfigError("LSTM stack needs at least one layer");
  std::size_t in = input_width;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::size_t h = hidden[l];
    if (h == 0) throw ConfigError("LSTM layer width must be positive");
    const std::string name = prefix + ".l" + std::to_string(l);
    LstmLayerParams layer;
    layer.input = in;
    layer.hidden = h;
    layer.weights = &store.add(name + ".W", {4 * h, in + h});
    layer.bias = &store.add(name + ".b", Shape::vector(4 * h));
    layer.h0 = &store.add(name + ".h0", Shape::vector(h));
    layer.c0 = &store.add(name + ".c0", Shape::vector(h));
    init_uniform_fan_in(*layer.weights, in + h, rng);
    for (std::size_t j = h; j < 2 * h; ++j) layer.bias->value[j] = 1.0;
    layers_.push_back(layer);
    in = h;
  }
}

ControllerState LstmStack::initial_state(Tape& tape) const {
  ControllerState s;
  for (const auto& layer : layers_) {
    s.hidden.push_back(tape.parameter(*layer.h0));
    s.cell.push_back(tape.parameter(*layer.c0));
  }
  return s;
}

Var LstmStack::step(Tape& tape, ControllerState& state, Var x) const {
  if (state.hidden.size() != layers_.size()) {
    throw ConfigError("LSTM state has " + std::to_string(state.hidden.size()) +
                      " layers, stack has " + std::to_string(layers_.size()));
  }
  if (x.size() != input_width()) {
    throw ConfigError("LSTM input width " + std::to_string(x.size()) + ", expected " +
                      std::to_string(input_width()));
  }
  Var below = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const std::size_t h = layer.hidden;
    Var joined = tape.concat({below, state.hidden[l]});
    Var z = tape.add(tape.matmul(tape.parameter(*layer.weights), joined),
                     tape.parameter(*layer.bias));
    Var gates = tape.sigmoid(tape.slice(z, 0, 3 * h));
    Var in_gate = tape.slice(gates, 0, h);
    Var forget_gate = tape.slice(gates, h, h);
    Var out_gate = tape.slice(gates, 2 * h, h);
    Var candidate = tape.tanh(tape.slice(z, 3 * h, h));
    Var cell = tape.add(tape.mul(forget_gate, state.cell[l]), tape.mul(in_gate, candidate));
    Var hidden = tape.mul(out_gate, tape.tanh(cell));
    state.cell[l] = cell;
    state.hidden[l] = hidden;
    below = hidden;
  }
  return below;
}

// ---------------------------------------------------------------------------
// FeedforwardNet

FeedforwardNet::FeedforwardNet(ParameterStore& store, const std::string& prefix,
                               std::size_t input_width, const std::vector<std::size_t>& hidden,
                               Rng& rng)
    : input_width_(input_width) {
  if (hidden.empty()) throw ConfigError("feedforward controller needs at least one layer");
  std::size_t in = input_width;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string name = prefix + ".l" + std::to_string(l);
    Layer layer;
    layer.weights = &store.add(name + ".W", {hidden[l], in});
    layer.bias = &store.add(name + ".b", Shape::vector(hidden[l]));
    init_uniform_fan_in(*layer.weights, in, rng);
    layers_.push_back(layer);
    in = hidden[l];
  }
}

std::size_t FeedforwardNet::output_width() const {
  return layers_.empty() ? input_width_ : layers_.back().bias->shape.rows;
}

Var FeedforwardNet::forward(Tape& tape, Var x) const {
  if (x.size() != input_width_) {
    throw ConfigError("feedforward input width " + std::to_string(x.size()) + ", expected " +
                      std::to_string(input_width_));
  }
  Var h = x;
  for (const auto& layer : layers_) {
    h = tape.tanh(tape.add(tape.matmul(tape.parameter(*layer.weights), h),
                           tape.parameter(*layer.bias)));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Controller

Controller::Controller(ParameterStore& store, const std::string& prefix,
                       const ControllerConfig& config, Rng& rng)
    : config_(config) {
  if (config.interface_width == 0) throw ConfigError("controller interface width is zero");
  if (config.kind == ControllerKind::kLstm) {
    lstm_ = LstmStack(store, prefix, config.input_width, config.hidden, rng);
  } else {
    feedforward_ = FeedforwardNet(store, prefix, config.input_width, config.hidden, rng);
  }
  const std::size_t top = hidden_width();
  interface_weights_ = &store.add(prefix + ".iface.W", {config.interface_width, top});
  interface_bias_ = &store.add(prefix + ".iface.b", Shape::vector(config.interface_width));
  init_uniform_fan_in(*interface_weights_, top, rng);
}

std::size_t Controller::hidden_width() const {
  return config_.kind == ControllerKind::kLstm ? lstm_.output_width()
                                               : feedforward_.output_width();
}

ControllerState Controller::initial_state(Tape& tape) const {
  if (config_.kind == ControllerKind::kLstm) return lstm_.initial_state(tape);
  return {};
}

Var Controller::step(Tape& tape, ControllerState& state, Var x_aug) const {
  Var top = config_.kind == ControllerKind::kLstm ? lstm_.step(tape, state, x_aug)
                                                  : feedforward_.forward(tape, x_aug);
  return tape.add(tape.matmul(tape.parameter(*interface_weights_), top),
                  tape.parameter(*interface_bias_));
}

}  // namespace ntm
