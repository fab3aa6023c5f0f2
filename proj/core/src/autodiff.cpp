#include "ntm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace ntm {
namespace {

constexpr Real kCosineEps = 1e-8;
constexpr Real kNormalizeFloor = 1e-300;
constexpr std::size_t kBlockSize = 1 << 16;

Real sigmoid_of(Real x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

Real softplus_of(Real x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Neumaier summation.
class CompensatedSum {
 public:
  void add(Real x) {
    const Real t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  Real value() const { return sum_ + comp_; }

 private:
  Real sum_ = 0.0;
  Real comp_ = 0.0;
};

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace

std::string to_string(Shape s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParameter: return "parameter";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulTN: return "matmul_tn";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kOneMinus: return "one_minus";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kSoftmax: return "softmax";
    case Op::kPower: return "power";
    case Op::kSharpen: return "sharpen";
    case Op::kNormalize: return "normalize";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kCosineSim: return "cosine_similarity";
    case Op::kCircularConv: return "circular_conv";
    case Op::kOuter: return "outer";
    case Op::kSum: return "sum";
    case Op::kSigmoidCrossEntropy: return "sigmoid_cross_entropy";
    case Op::kScalarShift: return "scalar_shift";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(std::string name, Shape shape) {
  if (index_.contains(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->shape = shape;
  p->value.assign(shape.size(), 0.0);
  p->grad.assign(shape.size(), 0.0);
  index_.emplace(std::move(name), entries_.size());
  entries_.push_back(std::move(p));
  return *entries_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : entries_[it->second].get();
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : entries_[it->second].get();
}

Parameter& ParameterStore::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterStore::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) std::fill(e->grad.begin(), e->grad.end(), 0.0);
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& e : entries_) {
    auto& p = out.add(e->name, e->shape);
    p.value = e->value;
    p.grad = e->grad;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Var

Shape Var::shape() const { return tape_->node(*this).shape; }

std::span<const Real> Var::value() const {
  const auto& n = tape_->node(*this);
  return {n.value, n.shape.size()};
}

Real Var::scalar() const {
  const auto& n = tape_->node(*this);
  if (!n.shape.is_scalar()) {
    throw ConfigError("scalar() on node of shape " + to_string(n.shape));
  }
  return n.value[0];
}

std::span<const Real> Var::grad() const {
  const auto& n = tape_->node(*this);
  if (n.grad == nullptr) return {};
  return {n.grad, n.shape.size()};
}

// ---------------------------------------------------------------------------
// Arena

Real* Tape::Arena::allocate(std::size_t n) {
  if (n == 0) n = 1;
  while (current_ < blocks_.size()) {
    auto& block = blocks_[current_];
    if (block.size - offset_ >= n) {
      Real* p = block.data.get() + offset_;
      offset_ += n;
      return p;
    }
    ++current_;
    offset_ = 0;
  }
  const std::size_t size = std::max(kBlockSize, n);
  blocks_.push_back({std::make_unique<Real[]>(size), size});
  current_ = blocks_.size() - 1;
  offset_ = n;
  return blocks_.back().data.get();
}

void Tape::Arena::reset() {
  current_ = 0;
  offset_ = 0;
}

// ---------------------------------------------------------------------------
// Tape bookkeeping

Tape::Tape(bool record_gradients) : record_gradients_(record_gradients) {
  nodes_.reserve(1024);
}

void Tape::reset() {
  nodes_.clear();
  extra_parents_.clear();
  values_.reset();
}

Tape::Node& Tape::node(Var v) { return nodes_[static_cast<std::size_t>(v.id_)]; }

const Tape::Node& Tape::node(Var v) const {
  return nodes_[static_cast<std::size_t>(v.id_)];
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw ConfigError("variable does not belong to this tape");
  }
}

Var Tape::push(Node n, bool allocate_value) {
  const std::size_t size = n.shape.size();
  if (allocate_value) {
    n.value = values_.allocate(size);
  }
  if (n.needs_grad && n.grad == nullptr) {
    n.grad = values_.allocate(size);
    std::fill_n(n.grad, size, 0.0);
  }
  nodes_.push_back(n);
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

void Tape::finish(const Node& n) const {
  const std::size_t size = n.shape.size();
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::isfinite(n.value[i])) {
      throw NumericError(std::string(op_name(n.op)) + " produced a non-finite value");
    }
  }
}

const Real* Tape::copy_data(std::span<const Real> values) {
  Real* p = values_.allocate(values.size());
  std::copy(values.begin(), values.end(), p);
  return p;
}

// ---------------------------------------------------------------------------
// Leaves

Var Tape::input(std::span<const Real> values, Shape shape) {
  if (values.size() != shape.size()) {
    throw ConfigError("input: " + std::to_string(values.size()) + " values for shape " +
                      to_string(shape));
  }
  Node n{.op = Op::kInput, .shape = shape};
  Var v = push(n);
  std::copy(values.begin(), values.end(), node(v).value);
  finish(node(v));
  return v;
}

Var Tape::input(std::initializer_list<Real> values) {
  return input(std::span<const Real>(values.begin(), values.size()), Shape::vector(values.size()));
}

Var Tape::constant(Real value, Shape shape) {
  Node n{.op = Op::kInput, .shape = shape};
  Var v = push(n);
  std::fill_n(node(v).value, shape.size(), value);
  finish(node(v));
  return v;
}

Var Tape::parameter(Parameter& p) {
  Node n{.op = Op::kParameter, .needs_grad = record_gradients_, .shape = p.shape};
  n.value = p.value.data();
  if (record_gradients_) n.grad = p.grad.data();
  Var v = push(n, /*allocate_value=*/false);
  finish(node(v));
  return v;
}

// ---------------------------------------------------------------------------
// Forward primitives

Var Tape::matmul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  const Shape sa = node(a).shape;
  const Shape sb = node(b).shape;
  if (sa.cols != sb.rows) {
    throw ConfigError("matmul: inner dimensions differ (" + to_string(sa) + " * " +
                      to_string(sb) + ")");
  }
  Node n{.op = Op::kMatMul,
         .needs_grad = node(a).needs_grad || node(b).needs_grad,
         .shape = {sa.rows, sb.cols},
         .a = a.id_,
         .b = b.id_};
  Var out = push(n);
  const Real* av = node(a).value;
  const Real* bv = node(b).value;
  Real* y = node(out).value;
  const std::size_t r = sa.rows, k = sa.cols, c = sb.cols;
  if (c == 1) {
    for (std::size_t i = 0; i < r; ++i) {
      const Real* row = av + i * k;
      Real acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * bv[p];
      y[i] = acc;
    }
  } else {
    std::fill_n(y, r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const Real aip = av[i * k + p];
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] += aip * bv[p * c + j];
      }
    }
  }
  finish(node(out));
  return out;
}

Var Tape::matmul_tn(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  const Shape sa = node(a).shape;
  const Shape sb = node(b).shape;
  if (sa.rows != sb.rows) {
    throw ConfigError("matmul_tn: row counts differ (" + to_string(sa) + "^T * " +
                      to_string(sb) + ")");
  }
  Node n{.op = Op::kMatMulTN,
         .needs_grad = node(a).needs_grad || node(b).needs_grad,
         .shape = {sa.cols, sb.cols},
         .a = a.id_,
         .b = b.id_};
  Var out = push(n);
  const Real* av = node(a).value;
  const Real* bv = node(b).value;
  Real* y = node(out).value;
  const std::size_t k = sa.rows, r = sa.cols, c = sb.cols;
  std::fill_n(y, r * c, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < r; ++i) {
      const Real api = av[p * r + i];
      for (std::size_t j = 0; j < c; ++j) y[i * c + j] += api * bv[p * c + j];
    }
  }
  finish(node(out));
  return out;
}

Var Tape::outer(Var u, Var v) {
  check_owned(u);
  check_owned(v);
  const Shape su = node(u).shape;
  const Shape sv = node(v).shape;
  if (!su.is_vector() || !sv.is_vector()) {
    throw ConfigError("outer: operands must be vectors");
  }
  Node n{.op = Op::kOuter,
         .needs_grad = node(u).needs_grad || node(v).needs_grad,
         .shape = {su.rows, sv.rows},
         .a = u.id_,
         .b = v.id_};
  Var out = push(n);
  const Real* uv = node(u).value;
  const Real* vv = node(v).value;
  Real* y = node(out).value;
  for (std::size_t i = 0; i < su.rows; ++i) {
    for (std::size_t j = 0; j < sv.rows; ++j) y[i * sv.rows + j] = uv[i] * vv[j];
  }
  finish(node(out));
  return out;
}

namespace {

void require_same(Shape a, Shape b, std::string_view what) {
  if (a != b) {
    throw ConfigError(std::string(what) + ": shape mismatch (" + to_string(a) + " vs " +
                      to_string(b) + ")");
  }
}

}  // namespace

Var Tape::add(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  require_same(node(a).shape, node(b).shape, "add");
  Node n{.op = Op::kAdd,
         .needs_grad = node(a).needs_grad || node(b).needs_grad,
         .shape = node(a).shape,
         .a = a.id_,
         .b = b.id_};
  Var out = push(n);
  const Real* x = node(a).value;
  const Real* z = node(b).value;
  Real* y = node(out).value;
  for (std::size_t i = 0; i < n.shape.size(); ++i) y[i] = x[i] + z[i];
  finish(node(out));
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  require_same(node(a).shape, node(b).shape, "sub");
  Node n{.op = Op::kSub,
         .needs_grad = node(a).needs_grad || node(b).needs_grad,
         .shape = node(a).shape,
         .a = a.id_,
         .b = b.id_};
  Var out = push(n);
  const Real* x = node(a).value;
  const Real* z = node(b).value;
  Real* y = node(out).value;
  for (std::size_t i = 0; i < n.shape.size(); ++i) y[i] = x[i] - z[i];
  finish(node(out));
  return out;
}

Var Tape::mul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  require_same(node(a).shape, node(b).shape, "mul");
  Node n{.op = Op::kMul,
         .needs_grad = node(a).needs_grad || node(b).needs_grad,
         .shape = node(a).shape,
         .a = a.id_,
         .b = b.id_};
  Var out = push(n);
  const Real* x = node(a).value;
  const Real* z = node(b).value;
  Real* y = node(out).value;
  for (std::size_t i = 0; i < n.shape.size(); ++i) y[i] = x[i] * z[i];
  finish(node(out));
  return out;
}

Var Tape::scale(Var x, Var s) {
  check_owned(x);
  check_owned(s);
  if (!node(s).shape.is_scalar()) {
    throw ConfigError("scale: factor must be a scalar, got " + to_string(node(s).shape));
  }
  Node n{.op = Op::kScale,
         .needs_grad = node(x).needs_grad || node(s).needs_grad,
         .shape = node(x).shape,
         .a = x.id_,
         .b = s.id_};
  Var out = push(n);
  const Real* xv = node(x).value;
  const Real f = node(s).value[0];
  Real* y = node(out).value;
  for (std::size_t i = 0; i < n.shape.size(); ++i) y[i] = f * xv[i];
  finish(node(out));
  return out;
}

namespace {

template <typename F>
void map_values(const Real* x, Real* y, std::size_t n, F f) {
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

}  // namespace

Var Tape::one_minus(Var x) {
  check_owned(x);
  Node n{.op = Op::kOneMinus, .needs_grad = node(x).needs_grad, .shape = node(x).shape, .a = x.id_};
  Var out = push(n);
  map_values(node(x).value, node(out).value, n.shape.size(), [](Real v) { return 1.0 - v; });
  finish(node(out));
  return out;
}

Var Tape::sigmoid(Var x) {
  check_owned(x);
  Node n{.op = Op::kSigmoid, .needs_grad = node(x).needs_grad, .shape = node(x).shape, .a = x.id_};
  Var out = push(n);
  map_values(node(x).value, node(out).value, n.shape.size(), sigmoid_of);
  finish(node(out));
  return out;
}

Var Tape::tanh(Var x) {
  check_owned(x);
  Node n{.op = Op::kTanh, .needs_grad = node(x).needs_grad, .shape = node(x).shape, .a = x.id_};
  Var out = push(n);
  map_values(node(x).value, node(out).value, n.shape.size(), [](Real v) { return std::tanh(v); });
  finish(node(out));
  return out;
}

Var Tape::softplus(Var x) {
  check_owned(x);
  Node n{.op = Op::kSoftplus, .needs_grad = node(x).needs_grad, .shape = node(x).shape, .a = x.id_};
  Var out = push(n);
  map_values(node(x).value, node(out).value, n.shape.size(), softplus_of);
  finish(node(out));
  return out;
}

Var Tape::softmax(Var x) {
  check_owned(x);
  Node n{.op = Op::kSoftmax, .needs_grad = node(x).needs_grad, .shape = node(x).shape, .a = x.id_};
  Var out = push(n);
  const Real* xv = node(x).value;
  Real* y = node(out).value;
  const std::size_t size = n.shape.size();
  const Real mx = *std::max_element(xv, xv + size);
  Real total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    y[i] = std::exp(xv[i] - mx);
    total += y[i];
  }
  for (std::size_t i = 0; i < size; ++i) y[i] /= total;
  finish(node(out));
  return out;
}

Var Tape::normalize(Var x) {
  check_owned(x);
  Node n{.op = Op::kNormalize, .needs_grad = node(x).needs_grad, .shape = node(x).shape, .a = x.id_};
  Var out = push(n);
  const Real* xv = node(x).value;
  Real* y = node(out).value;
  const std::size_t size = n.shape.size();
  Real total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    if (xv[i] < 0) throw NumericError("normalize: negative input");
    total += xv[i];
  }
  total = std::max(total, kNormalizeFloor);
  for (std::size_t i = 0; i < size; ++i) y[i] = xv[i] / total;
  finish(node(out));
  return out;
}

Var Tape::power(Var x, Var gamma) {
  check_owned(x);
  check_owned(gamma);
  if (!node(gamma).shape.is_scalar()) throw ConfigError("power: exponent must be a scalar");
  Node n{.op = Op::kPower,
         .needs_grad = node(x).needs_grad || node(gamma).needs_grad,
         .shape = node(x).shape,
         .a = x.id_,
         .b = gamma.id_};
  Var out = push(n);
  const Real* xv = node(x).value;
  const Real g = node(gamma).value[0];
  Real* y = node(out).value;
  for (std::size_t i = 0; i < n.shape.size(); ++i) {
    if (xv[i] < 0) throw NumericError("power: negative base");
    y[i] = std::pow(xv[i], g);
  }
  finish(node(out));
  return out;
}

Var Tape::sharpen(Var w, Var gamma) {
  check_owned(w);
  check_owned(gamma);
  if (!node(gamma).shape.is_scalar()) throw ConfigError("sharpen: exponent must be a scalar");
  Node n{.op = Op::kSharpen,
         .needs_grad = node(w).needs_grad || node(gamma).needs_grad,
         .shape = node(w).shape,
         .a = w.id_,
         .b = gamma.id_};
  Var out = push(n);
  const Real* wv = node(w).value;
  const Real g = node(gamma).value[0];
  Real* y = node(out).value;
  const std::size_t size = n.shape.size();
  Real mx = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < size; ++i) {
    if (wv[i] < 0) throw NumericError("sharpen: negative weighting");
    if (wv[i] > 0) mx = std::max(mx, g * std::log(wv[i]));
  }
  if (!std::isfinite(mx)) throw NumericError("sharpen: all-zero weighting");
  Real total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    y[i] = wv[i] > 0 ? std::exp(g * std::log(wv[i]) - mx) : 0.0;
    total += y[i];
  }
  for (std::size_t i = 0; i < size; ++i) y[i] /= total;
  finish(node(out));
  return out;
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat: no operands");
  std::size_t total = 0;
  bool needs_grad = false;
  const auto begin = static_cast<std::int32_t>(extra_parents_.size());
  for (Var p : parts) {
    check_owned(p);
    if (!node(p).shape.is_vector()) throw ConfigError("concat: operands must be vectors");
    total += node(p).shape.size();
    needs_grad = needs_grad || node(p).needs_grad;
    extra_parents_.push_back(p.id_);
  }
  Node n{.op = Op::kConcat,
         .needs_grad = needs_grad,
         .shape = Shape::vector(total),
         .extra_begin = begin,
         .extra_count = static_cast<std::int32_t>(parts.size())};
  Var out = push(n);
  Real* y = node(out).value;
  for (Var p : parts) {
    const auto& src = node(p);
    y = std::copy_n(src.value, src.shape.size(), y);
  }
  return out;
}

Var Tape::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::slice(Var x, std::size_t offset, std::size_t length) {
  check_owned(x);
  const std::size_t size = node(x).shape.size();
  if (offset + length > size || length == 0) {
    throw ConfigError("slice [" + std::to_string(offset) + ", +" + std::to_string(length) +
                      ") out of range for size " + std::to_string(size));
  }
  Node n{.op = Op::kSlice,
         .needs_grad = node(x).needs_grad,
         .shape = Shape::vector(length),
         .a = x.id_,
         .aux = offset};
  Var out = push(n);
  std::copy_n(node(x).value + offset, length, node(out).value);
  return out;
}

Var Tape::sum(Var x) {
  check_owned(x);
  Node n{.op = Op::kSum, .needs_grad = node(x).needs_grad, .shape = Shape::scalar(), .a = x.id_};
  Var out = push(n);
  const Real* xv = node(x).value;
  CompensatedSum total;
  for (std::size_t i = 0; i < node(x).shape.size(); ++i) total.add(xv[i]);
  node(out).value[0] = total.value();
  finish(node(out));
  return out;
}

Var Tape::cosine_similarity(Var memory, Var key) {
  check_owned(memory);
  check_owned(key);
  const Shape sm = node(memory).shape;
  const Shape sk = node(key).shape;
  if (!sk.is_vector() || sk.rows != sm.cols) {
    throw ConfigError("cosine_similarity: key " + to_string(sk) + " does not match memory " +
                      to_string(sm));
  }
  Node n{.op = Op::kCosineSim,
         .needs_grad = node(memory).needs_grad || node(key).needs_grad,
         .shape = Shape::vector(sm.rows),
         .a = memory.id_,
         .b = key.id_};
  Var out = push(n);
  const Real* m = node(memory).value;
  const Real* k = node(key).value;
  Real* y = node(out).value;
  Real kk = 0.0;
  for (std::size_t j = 0; j < sm.cols; ++j) kk += k[j] * k[j];
  const Real knorm = std::sqrt(kk);
  for (std::size_t i = 0; i < sm.rows; ++i) {
    const Real* row = m + i * sm.cols;
    Real dot = 0.0, rr = 0.0;
    for (std::size_t j = 0; j < sm.cols; ++j) {
      dot += row[j] * k[j];
      rr += row[j] * row[j];
    }
    y[i] = dot / (std::sqrt(rr) * knorm + kCosineEps);
  }
  finish(node(out));
  return out;
}

Var Tape::circular_conv(Var w, Var kernel, std::size_t origin) {
  check_owned(w);
  check_owned(kernel);
  const Shape sw = node(w).shape;
  const Shape sk = node(kernel).shape;
  if (!sw.is_vector() || !sk.is_vector()) throw ConfigError("circular_conv: operands must be vectors");
  if (origin >= sk.rows) throw ConfigError("circular_conv: origin outside kernel");
  Node n{.op = Op::kCircularConv,
         .needs_grad = node(w).needs_grad || node(kernel).needs_grad,
         .shape = sw,
         .a = w.id_,
         .b = kernel.id_,
         .aux = origin};
  Var out = push(n);
  const Real* wv = node(w).value;
  const Real* kv = node(kernel).value;
  Real* y = node(out).value;
  const std::size_t len = sw.rows;
  std::fill_n(y, len, 0.0);
  for (std::size_t j = 0; j < sk.rows; ++j) {
    const auto offset = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(origin);
    const Real kj = kv[j];
    for (std::size_t i = 0; i < len; ++i) {
      y[i] += kj * wv[wrap(static_cast<std::ptrdiff_t>(i) - offset, len)];
    }
  }
  finish(node(out));
  return out;
}

Var Tape::scalar_shift(Var x, std::size_t length) {
  check_owned(x);
  if (!node(x).shape.is_scalar()) throw ConfigError("scalar_shift: input must be a scalar");
  if (length == 0) throw ConfigError("scalar_shift: empty kernel");
  Node n{.op = Op::kScalarShift,
         .needs_grad = node(x).needs_grad,
         .shape = Shape::vector(length),
         .a = x.id_};
  Var out = push(n);
  const Real xv = node(x).value[0];
  const Real lo = std::floor(xv);
  const Real frac = xv - lo;
  Real* y = node(out).value;
  std::fill_n(y, length, 0.0);
  const auto base = static_cast<std::ptrdiff_t>(lo);
  y[wrap(base, length)] += 1.0 - frac;
  y[wrap(base + 1, length)] += frac;
  finish(node(out));
  return out;
}

Var Tape::sigmoid_cross_entropy(Var logits, std::span<const Real> targets,
                                std::span<const Real> row_mask) {
  check_owned(logits);
  const Shape s = node(logits).shape;
  if (targets.size() != s.size()) {
    throw ConfigError("sigmoid_cross_entropy: " + std::to_string(targets.size()) +
                      " targets for logits " + to_string(s));
  }
  if (!row_mask.empty() && row_mask.size() != s.rows) {
    throw ConfigError("sigmoid_cross_entropy: mask length differs from row count");
  }
  Node n{.op = Op::kSigmoidCrossEntropy,
         .needs_grad = node(logits).needs_grad,
         .shape = Shape::scalar(),
         .a = logits.id_};
  n.data = copy_data(targets);
  if (!row_mask.empty()) n.mask = copy_data(row_mask);
  Var out = push(n);
  const Real* z = node(logits).value;
  const Real* t = n.data;
  CompensatedSum total;
  for (std::size_t r = 0; r < s.rows; ++r) {
    const Real m = n.mask ? n.mask[r] : 1.0;
    if (m == 0.0) continue;
    for (std::size_t c = 0; c < s.cols; ++c) {
      const std::size_t i = r * s.cols + c;
      total.add(m * ((1.0 - t[i]) * softplus_of(z[i]) + t[i] * softplus_of(-z[i])));
    }
  }
  node(out).value[0] = total.value();
  finish(node(out));
  return out;
}

// ---------------------------------------------------------------------------
// Backward

void Tape::backward(Var loss) {
  check_owned(loss);
  if (!record_gradients_) throw ConfigError("backward on a tape that does not record gradients");
  const auto& ln = node(loss);
  if (!ln.shape.is_scalar()) {
    throw ConfigError("backward: loss must be scalar, got " + to_string(ln.shape));
  }
  if (!ln.needs_grad) return;
  ln.grad[0] += 1.0;
  for (auto i = static_cast<std::ptrdiff_t>(loss.id_); i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad) backward_node(n);
  }
}

void Tape::backward_node(const Node& n) {
  const std::size_t size = n.shape.size();
  const Real* dy = n.grad;
  Node* pa = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
  Node* pb = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)] : nullptr;
  Real* da = (pa && pa->needs_grad) ? pa->grad : nullptr;
  Real* db = (pb && pb->needs_grad) ? pb->grad : nullptr;

  switch (n.op) {
    case Op::kInput:
    case Op::kParameter:
      return;

    case Op::kMatMul: {
      const std::size_t r = pa->shape.rows, k = pa->shape.cols, c = pb->shape.cols;
      const Real* av = pa->value;
      const Real* bv = pb->value;
      if (c == 1) {
        for (std::size_t i = 0; i < r; ++i) {
          const Real g = dy[i];
          if (g == 0.0) continue;
          if (da) {
            Real* row = da + i * k;
            for (std::size_t p = 0; p < k; ++p) row[p] += g * bv[p];
          }
          if (db) {
            const Real* arow = av + i * k;
            for (std::size_t p = 0; p < k; ++p) db[p] += g * arow[p];
          }
        }
      } else {
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            Real acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const Real g = dy[i * c + j];
              acc += g * bv[p * c + j];
              if (db) db[p * c + j] += av[i * k + p] * g;
            }
            if (da) da[i * k + p] += acc;
          }
        }
      }
      return;
    }

    case Op::kMatMulTN: {
      const std::size_t k = pa->shape.rows, r = pa->shape.cols, c = pb->shape.cols;
      const Real* av = pa->value;
      const Real* bv = pb->value;
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t i = 0; i < r; ++i) {
          Real acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const Real g = dy[i * c + j];
            acc += bv[p * c + j] * g;
            if (db) db[p * c + j] += av[p * r + i] * g;
          }
          if (da) da[p * r + i] += acc;
        }
      }
      return;
    }

    case Op::kOuter: {
      const std::size_t r = pa->shape.rows, c = pb->shape.rows;
      for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const Real g = dy[i * c + j];
          acc += g * pb->value[j];
          if (db) db[j] += g * pa->value[i];
        }
        if (da) da[i] += acc;
      }
      return;
    }

    case Op::kAdd:
      for (std::size_t i = 0; i < size; ++i) {
        if (da) da[i] += dy[i];
        if (db) db[i] += dy[i];
      }
      return;

    case Op::kSub:
      for (std::size_t i = 0; i < size; ++i) {
        if (da) da[i] += dy[i];
        if (db) db[i] -= dy[i];
      }
      return;

    case Op::kMul:
      for (std::size_t i = 0; i < size; ++i) {
        if (da) da[i] += dy[i] * pb->value[i];
        if (db) db[i] += dy[i] * pa->value[i];
      }
      return;

    case Op::kScale: {
      const Real f = pb->value[0];
      Real acc = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        if (da) da[i] += f * dy[i];
        acc += dy[i] * pa->value[i];
      }
      if (db) db[0] += acc;
      return;
    }

    case Op::kOneMinus:
      if (da) for (std::size_t i = 0; i < size; ++i) da[i] -= dy[i];
      return;

    case Op::kSigmoid:
      if (da) {
        for (std::size_t i = 0; i < size; ++i) {
          const Real y = n.value[i];
          da[i] += dy[i] * y * (1.0 - y);
        }
      }
      return;

    case Op::kTanh:
      if (da) {
        for (std::size_t i = 0; i < size; ++i) {
          const Real y = n.value[i];
          da[i] += dy[i] * (1.0 - y * y);
        }
      }
      return;

    case Op::kSoftplus:
      if (da) for (std::size_t i = 0; i < size; ++i) da[i] += dy[i] * sigmoid_of(pa->value[i]);
      return;

    case Op::kSoftmax: {
      if (!da) return;
      Real dot = 0.0;
      for (std::size_t i = 0; i < size; ++i) dot += dy[i] * n.value[i];
      for (std::size_t i = 0; i < size; ++i) da[i] += n.value[i] * (dy[i] - dot);
      return;
    }

    case Op::kNormalize: {
      if (!da) return;
      Real total = 0.0;
      for (std::size_t i = 0; i < size; ++i) total += pa->value[i];
      if (total < kNormalizeFloor) {
        for (std::size_t i = 0; i < size; ++i) da[i] += dy[i] / kNormalizeFloor;
        return;
      }
      Real dot = 0.0;
      for (std::size_t i = 0; i < size; ++i) dot += dy[i] * n.value[i];
      for (std::size_t i = 0; i < size; ++i) da[i] += (dy[i] - dot) / total;
      return;
    }

    case Op::kPower: {
      const Real g = pb->value[0];
      Real dg = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        const Real x = pa->value[i];
        if (x > 0) {
          if (da) da[i] += dy[i] * g * std::pow(x, g - 1.0);
          dg += dy[i] * n.value[i] * std::log(x);
        } else if (da && g == 1.0) {
          da[i] += dy[i];
        }
      }
      if (db) db[0] += dg;
      return;
    }

    case Op::kSharpen: {
      const Real g = pb->value[0];
      Real dot = 0.0;
      for (std::size_t i = 0; i < size; ++i) dot += dy[i] * n.value[i];
      // y_i = w_i^g / Z; recover ln Z the same way the forward pass built it.
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t i = 0; i < size; ++i) {
        if (pa->value[i] > 0) mx = std::max(mx, g * std::log(pa->value[i]));
      }
      Real total = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        if (pa->value[i] > 0) total += std::exp(g * std::log(pa->value[i]) - mx);
      }
      const Real log_z = mx + std::log(total);
      Real dg = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        const Real w = pa->value[i];
        if (w <= 0) continue;
        const Real lw = std::log(w);
        const Real dz = n.value[i] * (dy[i] - dot);
        dg += dz * lw;
        if (da) {
          // dz / w without forming 1 / w: y_i / w_i = exp((g - 1) ln w_i - ln Z).
          da[i] += g * (dy[i] - dot) * std::exp((g - 1.0) * lw - log_z);
        }
      }
      if (db) db[0] += dg;
      return;
    }

    case Op::kConcat: {
      std::size_t offset = 0;
      for (std::int32_t p = 0; p < n.extra_count; ++p) {
        Node& src = nodes_[static_cast<std::size_t>(
            extra_parents_[static_cast<std::size_t>(n.extra_begin + p)])];
        const std::size_t len = src.shape.size();
        if (src.needs_grad) {
          for (std::size_t i = 0; i < len; ++i) src.grad[i] += dy[offset + i];
        }
        offset += len;
      }
      return;
    }

    case Op::kSlice:
      if (da) for (std::size_t i = 0; i < size; ++i) da[n.aux + i] += dy[i];
      return;

    case Op::kSum:
      if (da) for (std::size_t i = 0; i < pa->shape.size(); ++i) da[i] += dy[0];
      return;

    case Op::kCosineSim: {
      const std::size_t rows = pa->shape.rows, cols = pa->shape.cols;
      const Real* m = pa->value;
      const Real* k = pb->value;
      Real kk = 0.0;
      for (std::size_t j = 0; j < cols; ++j) kk += k[j] * k[j];
      const Real knorm = std::sqrt(kk);
      for (std::size_t i = 0; i < rows; ++i) {
        const Real g = dy[i];
        if (g == 0.0) continue;
        const Real* row = m + i * cols;
        Real dot = 0.0, rr = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          dot += row[j] * k[j];
          rr += row[j] * row[j];
        }
        const Real rnorm = std::sqrt(rr);
        const Real denom = rnorm * knorm + kCosineEps;
        const Real inv = 1.0 / denom;
        const Real coef = dot * inv * inv;
        // d/dk: row/d - dot/d^2 * |row| * k/|k|; d/drow symmetric.
        const Real kscale = knorm > 0 ? coef * rnorm / knorm : 0.0;
        const Real rscale = rnorm > 0 ? coef * knorm / rnorm : 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          if (db) db[j] += g * (row[j] * inv - kscale * k[j]);
          if (da) da[i * cols + j] += g * (k[j] * inv - rscale * row[j]);
        }
      }
      return;
    }

    case Op::kCircularConv: {
      const std::size_t len = pa->shape.rows, klen = pb->shape.rows;
      for (std::size_t j = 0; j < klen; ++j) {
        const auto offset = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(n.aux);
        const Real kj = pb->value[j];
        Real acc = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t src = wrap(static_cast<std::ptrdiff_t>(i) - offset, len);
          if (da) da[src] += kj * dy[i];
          acc += dy[i] * pa->value[src];
        }
        if (db) db[j] += acc;
      }
      return;
    }

    case Op::kScalarShift: {
      if (!da) return;
      const auto base = static_cast<std::ptrdiff_t>(std::floor(pa->value[0]));
      da[0] += dy[wrap(base + 1, size)] - dy[wrap(base, size)];
      return;
    }

    case Op::kSigmoidCrossEntropy: {
      if (!da) return;
      const Shape s = pa->shape;
      const Real g = dy[0];
      for (std::size_t r = 0; r < s.rows; ++r) {
        const Real m = n.mask ? n.mask[r] : 1.0;
        if (m == 0.0) continue;
        for (std::size_t c = 0; c < s.cols; ++c) {
          const std::size_t i = r * s.cols + c;
          da[i] += g * m * (sigmoid_of(pa->value[i]) - n.data[i]);
        }
      }
      return;
    }
  }
}

}  // namespace ntm
