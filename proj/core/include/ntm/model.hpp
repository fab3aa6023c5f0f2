#pragma once

// Sequence models run over whole episodes: the Neural Turing Machine
// (LSTM or feedforward controller) and the stacked-LSTM baseline.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ntm/addressing.hpp"
#include "ntm/autodiff.hpp"
#include "ntm/controllers.hpp"
#include "ntm/tasks.hpp"

namespace ntm {

enum class ModelKind { kNtm, kLstm };

struct ModelConfig {
  ModelKind kind = ModelKind::kNtm;
  ControllerKind controller = ControllerKind::kLstm;
  std::vector<std::size_t> hidden = {100};
  std::size_t input_width = 9;
  std::size_t output_width = 8;
  std::size_t memory_rows = 128;   // N
  std::size_t memory_width = 20;   // M
  std::size_t read_heads = 1;
  std::size_t write_heads = 1;
  std::size_t shift_range = 1;
  ShiftMode shift_mode = ShiftMode::kSoftmax;
  std::uint64_t init_seed = 1;

  void validate() const;
  /// "ntm-lstm", "ntm-ff" or "lstm".
  std::string name() const;
};

/// Parses "ntm-lstm" / "ntm-ff" / "lstm" into kind + controller.
void apply_model_name(ModelConfig& config, const std::string& name);

/// Per-step values recorded for diagnostics. Rows are time steps.
struct TraceLog {
  std::size_t steps = 0;
  std::size_t memory_rows = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;  // sigmoid probabilities
  // [head][step] -> N-vector; read heads and write heads separately.
  std::vector<std::vector<std::vector<double>>> read_weightings;
  std::vector<std::vector<std::vector<double>>> write_weightings;
  std::vector<std::vector<std::vector<double>>> adds;   // [write head][step] -> M
  std::vector<std::vector<std::vector<double>>> reads;  // [read head][step] -> M
};

/// Result of running a model over one episode on a tape.
struct EpisodeForward {
  std::vector<Var> logits;  // one per step, output_width each
  Var loss;                 // cross-entropy in nats over scored steps
  double loss_bits() const;
};

/// Mutable per-episode NTM state (all tape nodes).
struct NtmState {
  Var memory;
  std::vector<Var> weightings;  // read heads, then write heads
  std::vector<Var> reads;
  ControllerState controller;
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  /// Unrolls the model over the episode from the learned initial state and
  /// attaches the scored cross-entropy loss.
  virtual EpisodeForward forward(Tape& tape, const Episode& episode,
                                 TraceLog* trace = nullptr) = 0;

 protected:
  explicit SequenceModel(ModelConfig config) : config_(std::move(config)) {}

  ModelConfig config_;
  ParameterStore params_;
};

class NtmModel final : public SequenceModel {
 public:
  explicit NtmModel(const ModelConfig& config);

  const InterfaceLayout& layout() const { return layout_; }
  const Controller& controller() const { return controller_; }

  /// Memory, weightings and reads reset to their learned biases.
  NtmState initial_state(Tape& tape) const;

  struct StepOutput {
    Var logits;
    std::vector<Var> weightings;  // read heads, then write heads
    std::vector<Var> adds;        // write heads
    std::vector<Var> erases;      // write heads
  };
  /// One time step: controller, addressing against the previous memory,
  /// writes, then reads from the updated memory.
  StepOutput step(Tape& tape, NtmState& state, Var x) const;

  EpisodeForward forward(Tape& tape, const Episode& episode, TraceLog* trace = nullptr) override;

 private:
  InterfaceLayout layout_;
  Controller controller_;
  Parameter* memory_bias_ = nullptr;
  std::vector<Parameter*> weighting_bias_;  // per head
  std::vector<Parameter*> read_bias_;       // per read head
  Parameter* read_to_output_ = nullptr;     // O x (R * M)
};

class LstmModel final : public SequenceModel {
 public:
  explicit LstmModel(const ModelConfig& config);

  const LstmStack& stack() const { return stack_; }
  ControllerState initial_state(Tape& tape) const { return stack_.initial_state(tape); }
  /// Output pre-activation for one step.
  Var step(Tape& tape, ControllerState& state, Var x) const;

  EpisodeForward forward(Tape& tape, const Episode& episode, TraceLog* trace = nullptr) override;

 private:
  LstmStack stack_;
  Parameter* output_weights_ = nullptr;
  Parameter* output_bias_ = nullptr;
};

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config);

/// Fresh model with the same configuration and a copy of the parameters.
std::unique_ptr<SequenceModel> clone_model(const SequenceModel& model);

/// Cross-entropy of sigmoid(logits) on the scored steps, in nats.
Var scored_loss(Tape& tape, const std::vector<Var>& logits, const Episode& episode);

/// Sigmoid probabilities of the scored steps, row-major.
std::vector<double> scored_probabilities(const std::vector<Var>& logits, const Episode& episode);

}  // namespace ntm
