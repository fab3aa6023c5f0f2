#pragma once

// Controllers: a stacked LSTM and a tanh feedforward network. Both end in
// an affine "interface" map from the top hidden layer to the vector that
// the NTM splits into head parameters and external output.

#include <cstddef>
#include <string>
#include <vector>

#include "ntm/autodiff.hpp"
#include "ntm/rng.hpp"

namespace ntm {

enum class ControllerKind { kLstm, kFeedforward };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& text);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kLstm;
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden;  // one entry per layer
  std::size_t interface_width = 0;
};

/// Per-episode recurrent state: (h, c) for each LSTM layer. Empty for
/// feedforward controllers.
struct ControllerState {
  std::vector<Var> hidden;
  std::vector<Var> cell;
};

/// Uniform in +-0.1 / sqrt(fan_in).
void init_uniform_fan_in(Parameter& p, std::size_t fan_in, Rng& rng);

/// One LSTM layer with forget gates and no peepholes. Gate rows of the
/// weight matrix are ordered input, forget, output, candidate; the matrix
/// acts on [x ; h_prev].
struct LstmLayerParams {
  Parameter* weights = nullptr;  // 4H x (I + H)
  Parameter* bias = nullptr;     // 4H, forget part starts at +1
  Parameter* h0 = nullptr;       // learned initial hidden state
  Parameter* c0 = nullptr;       // learned initial cell state
  std::size_t input = 0;
  std::size_t hidden = 0;
};

class LstmStack {
 public:
  LstmStack() = default;
  /// Registers `<prefix>.l<k>.{W,b,h0,c0}` in `store`.
  LstmStack(ParameterStore& store, const std::string& prefix, std::size_t input_width,
            const std::vector<std::size_t>& hidden, Rng& rng);

  std::size_t input_width() const { return layers_.empty() ? 0 : layers_.front().input; }
  std::size_t output_width() const { return layers_.empty() ? 0 : layers_.back().hidden; }
  std::size_t layer_count() const { return layers_.size(); }
  const LstmLayerParams& layer(std::size_t i) const { return layers_[i]; }

  /// State equal to the learned bias vectors.
  ControllerState initial_state(Tape& tape) const;
  /// Advances every layer one step; returns the top layer's hidden vector.
  Var step(Tape& tape, ControllerState& state, Var x) const;

 private:
  std::vector<LstmLayerParams> layers_;
};

class FeedforwardNet {
 public:
  FeedforwardNet() = default;
  FeedforwardNet(ParameterStore& store, const std::string& prefix, std::size_t input_width,
                 const std::vector<std::size_t>& hidden, Rng& rng);

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const;
  Var forward(Tape& tape, Var x) const;

 private:
  struct Layer {
    Parameter* weights = nullptr;
    Parameter* bias = nullptr;
  };
  std::size_t input_width_ = 0;
  std::vector<Layer> layers_;
};

/// Controller = hidden network + affine interface map.
class Controller {
 public:
  Controller() = default;
  Controller(ParameterStore& store, const std::string& prefix, const ControllerConfig& config,
             Rng& rng);

  const ControllerConfig& config() const { return config_; }
  std::size_t hidden_width() const;

  ControllerState initial_state(Tape& tape) const;
  /// Consumes [x ; reads] and returns the raw interface vector. `state` is
  /// advanced for LSTM controllers and untouched for feedforward ones.
  Var step(Tape& tape, ControllerState& state, Var x_aug) const;

 private:
  ControllerConfig config_;
  LstmStack lstm_;
  FeedforwardNet feedforward_;
  Parameter* interface_weights_ = nullptr;
  Parameter* interface_bias_ = nullptr;
};

}  // namespace ntm
