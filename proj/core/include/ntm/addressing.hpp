#pragma once

// Memory access for the NTM: content addressing, gated interpolation,
// circular shift, sharpening, and the erase/add write. Every function here
// records differentiable operations on a Tape.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ntm/autodiff.hpp"

namespace ntm {

enum class HeadKind { kRead, kWrite };

/// How a head emits its shift weighting.
enum class ShiftMode {
  kSoftmax,  ///< softmax over the 2R + 1 offsets -R..+R
  kScalar,   ///< one scalar in [-R, R], spread over two neighbouring offsets
};

/// Offsets into the controller's interface vector.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t end() const { return offset + length; }
};

struct HeadSlices {
  HeadKind kind = HeadKind::kRead;
  Segment key;
  Segment strength;
  Segment gate;
  Segment shift;
  Segment gamma;
  Segment erase;  // write heads only
  Segment add;    // write heads only
};

/// Maps the controller's raw interface vector onto per-head parameter
/// pre-activations plus the external-output segment. Read heads come first,
/// then write heads, then the output segment.
class InterfaceLayout {
 public:
  InterfaceLayout() = default;
  InterfaceLayout(std::size_t memory_width, std::size_t read_heads, std::size_t write_heads,
                  std::size_t shift_range, ShiftMode shift_mode, std::size_t output_width);

  std::span<const HeadSlices> heads() const { return heads_; }
  std::size_t read_heads() const { return read_heads_; }
  std::size_t write_heads() const { return heads_.size() - read_heads_; }
  const Segment& output() const { return output_; }
  std::size_t width() const { return width_; }
  std::size_t shift_range() const { return shift_range_; }
  ShiftMode shift_mode() const { return shift_mode_; }

  /// Every slice, in order of offset. Used to check coverage.
  std::vector<Segment> segments() const;

 private:
  std::vector<HeadSlices> heads_;
  std::size_t read_heads_ = 0;
  Segment output_;
  std::size_t width_ = 0;
  std::size_t shift_range_ = 1;
  ShiftMode shift_mode_ = ShiftMode::kSoftmax;
};

/// Squashed per-head emission. erase/add are invalid Vars for read heads.
struct HeadParams {
  Var key;       // M
  Var strength;  // beta > 0
  Var gate;      // g in (0, 1)
  Var shift;     // kernel; see shift_origin
  std::size_t shift_origin = 0;
  Var gamma;     // >= 1
  Var erase;     // M, entries in (0, 1)
  Var add;       // M
};

inline constexpr double kStrengthFloor = 1e-6;

/// k = raw, beta = softplus + 1e-6, g = sigmoid, s = softmax (or scalar kernel),
/// gamma = 1 + softplus, e = sigmoid, a = raw.
HeadParams squash_head_params(Tape& tape, Var interface, const HeadSlices& slices,
                              const InterfaceLayout& layout, std::size_t memory_rows);

/// softmax_i(beta * cos(k, M(i))).
Var content_weighting(Tape& tape, Var memory, Var key, Var strength);

/// g * content + (1 - g) * previous.
Var interpolate(Tape& tape, Var content, Var previous, Var gate);

/// Circular convolution of w with a shift kernel whose entry j is offset
/// j - origin.
Var shift_weighting(Tape& tape, Var w, Var kernel, std::size_t origin);

/// w^gamma / sum(w^gamma).
Var sharpen_weighting(Tape& tape, Var w, Var gamma);

/// The whole addressing pipeline: content -> interpolate -> shift -> sharpen.
struct AddressingTrace {
  Var content;
  Var gated;
  Var shifted;
  Var sharpened;
};
AddressingTrace address(Tape& tape, Var memory, Var previous, const HeadParams& head);

/// r = sum_i w(i) * M(i).
Var read_memory(Tape& tape, Var memory, Var w);

struct WriteRequest {
  Var weighting;
  Var erase;
  Var add;
};

/// All erases, then all adds:
///   M~(i) = M(i) * prod_h (1 - w_h(i) e_h),  M'(i) = M~(i) + sum_h w_h(i) a_h.
Var write_memory(Tape& tape, Var memory, std::span<const WriteRequest> heads);

/// Length-n shift kernel (index = offset mod n) for a scalar shift x:
/// 1 - frac(x) at floor(x), frac(x) at floor(x) + 1.
std::vector<double> shift_from_scalar(double x, std::size_t n);

}  // namespace ntm
