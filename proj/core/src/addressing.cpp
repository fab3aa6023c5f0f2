#include "ntm/addressing.hpp"

#include <algorithm>
#include <cmath>

namespace ntm {

InterfaceLayout::InterfaceLayout(std::size_t memory_width, std::size_t read_heads,
                                 std::size_t write_heads, std::size_t shift_range,
                                 ShiftMode shift_mode, std::size_t output_width)
    : read_heads_(read_heads), shift_range_(shift_range), shift_mode_(shift_mode) {
  if (memory_width == 0) throw ConfigError("interface layout: memory width must be positive");
  std::size_t cursor = 0;
  auto take = [&cursor](std::size_t n) {
    Segment s{cursor, n};
    cursor += n;
    return s;
  };
  const std::size_t shift_width = shift_mode == ShiftMode::kSoftmax ? 2 * shift_range + 1 : 1;
  for (std::size_t h = 0; h < read_heads + write_heads; ++h) {
    HeadSlices s;
    s.kind = h < read_heads ? HeadKind::kRead : HeadKind::kWrite;
    s.key = take(memory_width);
    s.strength = take(1);
    s.gate = take(1);
    s.shift = take(shift_width);
    s.gamma = take(1);
    if (s.kind == HeadKind::kWrite) {
      s.erase = take(memory_width);
      s.add = take(memory_width);
    }
    heads_.push_back(s);
  }
  output_ = take(output_width);
  width_ = cursor;
}

std::vector<Segment> InterfaceLayout::segments() const {
  std::vector<Segment> out;
  for (const auto& h : heads_) {
    out.insert(out.end(), {h.key, h.strength, h.gate, h.shift, h.gamma});
    if (h.kind == HeadKind::kWrite) out.insert(out.end(), {h.erase, h.add});
  }
  if (output_.length > 0) out.push_back(output_);
  std::sort(out.begin(), out.end(),
            [](const Segment& a, const Segment& b) { return a.offset < b.offset; });
  return out;
}

HeadParams squash_head_params(Tape& tape, Var interface, const HeadSlices& slices,
                              const InterfaceLayout& layout, std::size_t memory_rows) {
  if (interface.size() != layout.width()) {
    throw ConfigError("interface vector has width " + std::to_string(interface.size()) +
                      ", layout expects " + std::to_string(layout.width()));
  }
  auto cut = [&](const Segment& s) { return tape.slice(interface, s.offset, s.length); };

  HeadParams p;
  p.key = cut(slices.key);
  p.strength = tape.add(tape.softplus(cut(slices.strength)),
                        tape.constant(kStrengthFloor, Shape::scalar()));
  p.gate = tape.sigmoid(cut(slices.gate));
  if (layout.shift_mode() == ShiftMode::kSoftmax) {
    p.shift = tape.softmax(cut(slices.shift));
    p.shift_origin = layout.shift_range();
  } else {
    const auto range = static_cast<double>(layout.shift_range());
    Var x = tape.scale(tape.tanh(cut(slices.shift)), tape.constant(range, Shape::scalar()));
    p.shift = tape.scalar_shift(x, memory_rows);
    p.shift_origin = 0;
  }
  p.gamma = tape.add(tape.softplus(cut(slices.gamma)), tape.constant(1.0, Shape::scalar()));
  if (slices.kind == HeadKind::kWrite) {
    p.erase = tape.sigmoid(cut(slices.erase));
    p.add = cut(slices.add);
  }
  return p;
}

Var content_weighting(Tape& tape, Var memory, Var key, Var strength) {
  Var similarity = tape.cosine_similarity(memory, key);
  return tape.softmax(tape.scale(similarity, strength));
}

Var interpolate(Tape& tape, Var content, Var previous, Var gate) {
  return tape.add(tape.scale(content, gate), tape.scale(previous, tape.one_minus(gate)));
}

Var shift_weighting(Tape& tape, Var w, Var kernel, std::size_t origin) {
  return tape.circular_conv(w, kernel, origin);
}

Var sharpen_weighting(Tape& tape, Var w, Var gamma) { return tape.sharpen(w, gamma); }

AddressingTrace address(Tape& tape, Var memory, Var previous, const HeadParams& head) {
  AddressingTrace t;
  t.content = content_weighting(tape, memory, head.key, head.strength);
  t.gated = interpolate(tape, t.content, previous, head.gate);
  t.shifted = shift_weighting(tape, t.gated, head.shift, head.shift_origin);
  t.sharpened = sharpen_weighting(tape, t.shifted, head.gamma);
  return t;
}

Var read_memory(Tape& tape, Var memory, Var w) { return tape.matmul_tn(memory, w); }

Var write_memory(Tape& tape, Var memory, std::span<const WriteRequest> heads) {
  Var out = memory;
  for (const auto& h : heads) {
    out = tape.mul(out, tape.one_minus(tape.outer(h.weighting, h.erase)));
  }
  for (const auto& h : heads) {
    out = tape.add(out, tape.outer(h.weighting, h.add));
  }
  return out;
}

std::vector<double> shift_from_scalar(double x, std::size_t n) {
  if (n == 0) throw ConfigError("shift_from_scalar: empty kernel");
  if (!std::isfinite(x)) throw NumericError("shift_from_scalar: non-finite shift");
  std::vector<double> kernel(n, 0.0);
  const double lo = std::floor(x);
  const double frac = x - lo;
  const auto m = static_cast<long long>(n);
  const auto base = static_cast<long long>(lo);
  kernel[static_cast<std::size_t>(((base % m) + m) % m)] += 1.0 - frac;
  kernel[static_cast<std::size_t>((((base + 1) % m) + m) % m)] += frac;
  return kernel;
}

}  // namespace ntm
