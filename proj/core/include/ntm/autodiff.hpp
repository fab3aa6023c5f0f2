#pragma once

// Define-by-run reverse-mode differentiation over small dense arrays.
//
// A Tape records every primitive applied during one episode. Values live in
// an arena owned by the tape, so handles (Var) are plain indices and nodes
// are cheap to create. Parameter nodes alias the ParameterStore buffers
// directly: backward() accumulates straight into the store's gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ntm/errors.hpp"

namespace ntm {

using Real = double;

/// Row-major matrix shape. Vectors are columns (rows x 1), scalars are 1 x 1.
struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  static constexpr Shape scalar() { return {1, 1}; }
  static constexpr Shape vector(std::size_t n) { return {n, 1}; }

  constexpr std::size_t size() const { return rows * cols; }
  constexpr bool is_scalar() const { return rows == 1 && cols == 1; }
  constexpr bool is_vector() const { return cols == 1; }
  friend constexpr bool operator==(Shape, Shape) = default;
};

std::string to_string(Shape s);

enum class Op : std::uint8_t {
  kInput,
  kParameter,
  kMatMul,
  kMatMulTN,
  kAdd,
  kSub,
  kMul,
  kScale,
  kOneMinus,
  kSigmoid,
  kTanh,
  kSoftplus,
  kSoftmax,
  kPower,
  kSharpen,
  kNormalize,
  kConcat,
  kSlice,
  kCosineSim,
  kCircularConv,
  kOuter,
  kSum,
  kSigmoidCrossEntropy,
  kScalarShift,
};

std::string_view op_name(Op op);

// ---------------------------------------------------------------------------
// Parameters

struct Parameter {
  std::string name;
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
};

/// Named trainable arrays in registration order. Shapes are frozen at
/// registration; entries never move, so Parameter references stay valid.
class ParameterStore {
 public:
  Parameter& add(std::string name, Shape shape);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  Parameter& operator[](std::size_t i) { return *entries_[i]; }
  const Parameter& operator[](std::size_t i) const { return *entries_[i]; }

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;
  void zero_grad();

  /// Deep copy (values and gradients).
  ParameterStore clone() const;

 private:
  std::vector<std::unique_ptr<Parameter>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Tape

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape
/// has not been reset.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  std::int32_t id() const { return id_; }
  Tape& tape() const { return *tape_; }

  Shape shape() const;
  std::size_t size() const { return shape().size(); }
  std::span<const Real> value() const;
  Real scalar() const;
  /// Gradient after backward(); empty if the node did not require one.
  std::span<const Real> grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

class Tape {
 public:
  /// With `record_gradients` false no gradient buffers are allocated and
  /// backward() is unavailable. Used for evaluation.
  explicit Tape(bool record_gradients = true);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool records_gradients() const { return record_gradients_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Drops every node; arena capacity is kept for the next episode.
  void reset();

  // Leaves.
  Var input(std::span<const Real> values, Shape shape);
  Var input(std::initializer_list<Real> values);
  Var constant(Real value, Shape shape);
  Var parameter(Parameter& p);

  // Linear algebra.
  Var matmul(Var a, Var b);     ///< a * b
  Var matmul_tn(Var a, Var b);  ///< transpose(a) * b
  Var outer(Var u, Var v);      ///< u * transpose(v), u and v vectors

  // Elementwise (identical shapes).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, Var s);  ///< s is a scalar node
  Var one_minus(Var x);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var softplus(Var x);

  // Normalizations over all elements of x.
  Var softmax(Var x);
  /// x / sum(x). Requires x >= 0; the denominator is floored at a tiny
  /// positive value.
  Var normalize(Var x);
  /// Elementwise x^gamma for x >= 0, gamma a scalar node. The derivative
  /// at x == 0 is taken as 0.
  Var power(Var x, Var gamma);
  /// normalize(power(w, gamma)) evaluated in the log domain so that large
  /// exponents cannot underflow the whole vector.
  Var sharpen(Var w, Var gamma);

  // Structure.
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var slice(Var x, std::size_t offset, std::size_t length);
  Var sum(Var x);

  // Memory addressing.
  /// Cosine similarity of every row of `memory` (N x M) with `key` (M),
  /// u.v / (|u||v| + 1e-8). Returns an N-vector.
  Var cosine_similarity(Var memory, Var key);
  /// Circular convolution y(i) = sum_j kernel(j) * w((i - (j - origin)) mod N).
  /// kernel entry j encodes the shift offset j - origin.
  Var circular_conv(Var w, Var kernel, std::size_t origin);
  /// Length-n shift kernel (index = offset mod n) from a scalar x: mass
  /// 1 - frac(x) at floor(x) and frac(x) at floor(x) + 1.
  Var scalar_shift(Var x, std::size_t n);

  /// Sum over elements of softplus(z) - t * z, the cross-entropy (nats) of
  /// sigmoid(z) against targets t. `mask` (if non-empty) has one weight per
  /// row of z and scales that row's contribution.
  Var sigmoid_cross_entropy(Var logits, std::span<const Real> targets,
                            std::span<const Real> row_mask = {});

  /// Reverse sweep from a scalar node. Parameter gradients are added to the
  /// store buffers; the caller zeroes them beforehand.
  void backward(Var loss);

 private:
  friend class Var;

  struct Node {
    Op op;
    bool needs_grad = false;
    Shape shape;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::int32_t extra_begin = 0;  // concat parents in extra_parents_
    std::int32_t extra_count = 0;
    std::size_t aux = 0;           // slice offset, conv origin, ...
    Real* value = nullptr;
    Real* grad = nullptr;
    const Real* data = nullptr;    // targets (cross-entropy)
    const Real* mask = nullptr;
  };

  class Arena {
   public:
    Real* allocate(std::size_t n);
    void reset();

   private:
    struct Block {
      std::unique_ptr<Real[]> data;
      std::size_t size;
    };
    std::vector<Block> blocks_;
    std::size_t current_ = 0;
    std::size_t offset_ = 0;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  void check_owned(Var v) const;
  Var push(Node n, bool allocate_value = true);
  void finish(const Node& n) const;
  void backward_node(const Node& n);
  const Real* copy_data(std::span<const Real> values);

  bool record_gradients_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> extra_parents_;
  Arena values_;
};

}  // namespace ntm
