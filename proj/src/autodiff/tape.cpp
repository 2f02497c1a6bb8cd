#include "pinntl/autodiff/tape.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <utility>

#include "pinntl/errors.hpp"

namespace pinntl::ad {

namespace {

// tanh through the vectorized exp, written into `out`. For small |x| the
// 1 - exp(-2|x|) form loses relative precision, so a short odd series takes
// over below 0.02.
void fast_tanh(const Matrix& x, Matrix& out) {
  out.resize(x.rows(), x.cols());
  out.array() = (-2.0 * x.array().abs()).exp();
  const auto a = x.array();
  const auto t = out.array();
  const auto x2 = a.square();
  out.array() = (a.abs() < 0.02)
                    .select(a * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 + x2 * (-17.0 / 315.0)))),
                            (1.0 - t) / (1.0 + t) * a.sign());
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError("operands belong to different tapes");
  }
  return a.tape();
}

Node make(Op op, std::initializer_list<std::int32_t> args) {
  Node n;
  n.op = op;
  std::size_t k = 0;
  for (auto a : args) n.args[k++] = a;
  return n;
}

Var unary(Op op, Var x, double scalar = 0.0) {
  if (!x.valid()) throw ContractError("invalid Var");
  Node n = make(op, {x.id()});
  n.scalar = scalar;
  return x.tape().emit(std::move(n));
}

Var binary_same_shape(Op op, Var a, Var b, const char* name) {
  Tape& t = same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), name, a.value(), b.value());
  return t.emit(make(op, {a.id(), b.id()}));
}

// Matrix-valued building blocks used by the raw (unrecorded) reverse sweep.
struct RawEmitter {
  using V = Matrix;
  const Tape& tape;

  const Matrix& arg(const Node& n, int k) const { return tape.node(n.args[k]).value; }
  const Matrix& self(std::int32_t id) const { return tape.node(id).value; }

  static V add(const V& a, const V& b) { return a + b; }
  static V sub(const V& a, const V& b) { return a - b; }
  static V mul(const V& a, const V& b) { return (a.array() * b.array()).matrix(); }
  static V div(const V& a, const V& b) { return (a.array() / b.array()).matrix(); }
  static V scale(const V& a, double s) { return s * a; }
  static V sin(const V& a) { return a.array().sin().matrix(); }
  static V cos(const V& a) { return a.array().cos().matrix(); }
  static V pow(const V& a, double p) { return a.array().pow(p).matrix(); }
  static V product3(const V& a, const V& b, const V& c, double s) {
    return (s * a.array() * b.array() * c.array()).matrix();
  }
  static V tanh_grad(const V& g, const V& y) {
    return (g.array() * (1.0 - y.array().square())).matrix();
  }
  static V matmul(const V& a, const V& b, bool ta, bool tb) {
    V r;
    if (!ta && !tb) r.noalias() = a * b;
    else if (ta && !tb) r.noalias() = a.transpose() * b;
    else if (!ta && tb) r.noalias() = a * b.transpose();
    else r.noalias() = a.transpose() * b.transpose();
    return r;
  }
  static V row_sum(const V& a) { return a.rowwise().sum(); }
  static V broadcast_cols(const V& a, Index cols) { return a.replicate(1, cols); }
  static V slice_rows(const V& a, Index start, Index count) { return a.middleRows(start, count); }
  static V pad_rows(const V& a, Index start, Index total) {
    V r = V::Zero(total, a.cols());
    r.middleRows(start, a.rows()) = a;
    return r;
  }
  static V sum(const V& a) { return V::Constant(1, 1, a.sum()); }
  static V broadcast_scalar(const V& a, Index rows, Index cols) {
    return V::Constant(rows, cols, a(0, 0));
  }
  static Index rows(const V& a) { return a.rows(); }
  static Index cols(const V& a) { return a.cols(); }

  static void accumulate(std::optional<V>& slot, V&& v) {
    if (slot) *slot += v;
    else slot = std::move(v);
  }
};

}  // namespace

// Var-valued building blocks: the same rules, recorded on the tape.
struct TapeEmitter {
  using V = Var;
  Tape& tape;

  Var arg(const Node& n, int k) const { return Var(&tape, n.args[k]); }
  Var self(std::int32_t id) const { return Var(&tape, id); }

  static V add(V a, V b) { return a + b; }
  static V sub(V a, V b) { return a - b; }
  static V mul(V a, V b) { return a * b; }
  static V div(V a, V b) { return a / b; }
  static V scale(V a, double s) { return ad::scale(a, s); }
  static V sin(V a) { return ad::sin(a); }
  static V cos(V a) { return ad::cos(a); }
  static V pow(V a, double p) { return ad::pow(a, p); }
  static V product3(V a, V b, V c, double s) { return ad::product3(a, b, c, s); }
  static V tanh_grad(V g, V y) { return ad::tanh_grad(g, y); }
  static V matmul(V a, V b, bool ta, bool tb) { return ad::matmul(a, b, ta, tb); }
  static V row_sum(V a) { return ad::row_sum(a); }
  static V broadcast_cols(V a, Index cols) { return ad::broadcast_cols(a, cols); }
  static V slice_rows(V a, Index start, Index count) { return ad::slice_rows(a, start, count); }
  static V pad_rows(V a, Index start, Index total) { return ad::pad_rows(a, start, total); }
  static V sum(V a) { return ad::sum(a); }
  static V broadcast_scalar(V a, Index rows, Index cols) {
    return ad::broadcast_scalar(a, rows, cols);
  }
  static Index rows(V a) { return a.rows(); }
  static Index cols(V a) { return a.cols(); }

  static void accumulate(std::optional<V>& slot, V&& v) {
    if (slot) slot = *slot + v;
    else slot = v;
  }
};

namespace {

// Reverse rule for one node. `out[k]` receives the adjoint contribution for
// operand k when `need[k]` is set.
template <class E>
void vjp_rule(E& e, std::int32_t id, const Node& n, const typename E::V& g,
              const std::array<bool, 3>& need, std::array<std::optional<typename E::V>, 3>& out) {
  switch (n.op) {
    case Op::Tanh:
      out[0] = e.tanh_grad(g, e.self(id));
      break;
    case Op::Sin:
      out[0] = e.mul(g, e.cos(e.arg(n, 0)));
      break;
    case Op::Cos:
      out[0] = e.scale(e.mul(g, e.sin(e.arg(n, 0))), -1.0);
      break;
    case Op::Exp:
      out[0] = e.mul(g, e.self(id));
      break;
    case Op::Square:
      out[0] = e.scale(e.mul(g, e.arg(n, 0)), 2.0);
      break;
    case Op::Pow:
      out[0] = e.scale(e.mul(g, e.pow(e.arg(n, 0), n.scalar - 1.0)), n.scalar);
      break;
    case Op::Scale:
      out[0] = e.scale(g, n.scalar);
      break;
    case Op::Shift:
      out[0] = g;
      break;
    case Op::Add:
      if (need[0]) out[0] = g;
      if (need[1]) out[1] = g;
      break;
    case Op::Sub:
      if (need[0]) out[0] = g;
      if (need[1]) out[1] = e.scale(g, -1.0);
      break;
    case Op::Mul:
      if (need[0]) out[0] = e.mul(g, e.arg(n, 1));
      if (need[1]) out[1] = e.mul(g, e.arg(n, 0));
      break;
    case Op::Div: {
      auto ga = e.div(g, e.arg(n, 1));
      if (need[1]) out[1] = e.scale(e.mul(ga, e.self(id)), -1.0);
      if (need[0]) out[0] = std::move(ga);
      break;
    }
    case Op::Product3:
      if (need[0]) out[0] = e.product3(g, e.arg(n, 1), e.arg(n, 2), n.scalar);
      if (need[1]) out[1] = e.product3(g, e.arg(n, 0), e.arg(n, 2), n.scalar);
      if (need[2]) out[2] = e.product3(g, e.arg(n, 0), e.arg(n, 1), n.scalar);
      break;
    case Op::TanhGrad:
      if (need[0]) out[0] = e.tanh_grad(g, e.arg(n, 1));
      if (need[1]) out[1] = e.product3(g, e.arg(n, 0), e.arg(n, 1), -2.0);
      break;
    case Op::MatMul: {
      const bool ta = n.trans_a, tb = n.trans_b;
      auto a = e.arg(n, 0);
      auto b = e.arg(n, 1);
      if (!ta && !tb) {
        if (need[0]) out[0] = e.matmul(g, b, false, true);
        if (need[1]) out[1] = e.matmul(a, g, true, false);
      } else if (ta && !tb) {
        if (need[0]) out[0] = e.matmul(b, g, false, true);
        if (need[1]) out[1] = e.matmul(a, g, false, false);
      } else if (!ta && tb) {
        if (need[0]) out[0] = e.matmul(g, b, false, false);
        if (need[1]) out[1] = e.matmul(g, a, true, false);
      } else {
        if (need[0]) out[0] = e.matmul(b, g, true, true);
        if (need[1]) out[1] = e.matmul(g, a, true, true);
      }
      break;
    }
    case Op::Affine:
      if (need[0]) out[0] = e.matmul(g, e.arg(n, 1), false, true);
      if (need[1]) out[1] = e.matmul(e.arg(n, 0), g, true, false);
      if (need[2]) out[2] = e.row_sum(g);
      break;
    case Op::SliceRows:
      out[0] = e.pad_rows(g, n.extent0, e.rows(e.arg(n, 0)));
      break;
    case Op::PadRows:
      out[0] = e.slice_rows(g, n.extent0, e.rows(e.arg(n, 0)));
      break;
    case Op::RowSum:
      out[0] = e.broadcast_cols(g, e.cols(e.arg(n, 0)));
      break;
    case Op::BroadcastCols:
      out[0] = e.row_sum(g);
      break;
    case Op::Sum: {
      auto x = e.arg(n, 0);
      out[0] = e.broadcast_scalar(g, e.rows(x), e.cols(x));
      break;
    }
    case Op::Mean: {
      auto x = e.arg(n, 0);
      const double inv = 1.0 / static_cast<double>(e.rows(x) * e.cols(x));
      out[0] = e.scale(e.broadcast_scalar(g, e.rows(x), e.cols(x)), inv);
      break;
    }
    case Op::BroadcastScalar:
      out[0] = e.sum(g);
      break;
    case Op::Input:
    case Op::Param:
    case Op::Const:
      break;
    case Op::Custom:
      throw CapabilityError("cannot differentiate through custom node");
  }
}

void add_opt(std::optional<Var>& acc, std::optional<Var> v) {
  if (!v) return;
  if (acc) acc = *acc + *v;
  else acc = v;
}

// Forward (tangent) rule for one node, recorded on the tape. `dt[k]` is the
// tangent of operand k, absent when it is identically zero.
std::optional<Var> jvp_rule(Tape& t, std::int32_t id, const Node& n,
                            const std::array<std::optional<Var>, 3>& dt) {
  auto arg = [&](int k) { return Var(&t, n.args[k]); };
  Var self(&t, id);
  std::optional<Var> r;
  switch (n.op) {
    case Op::Tanh:
      return tanh_grad(*dt[0], self);
    case Op::Sin:
      return *dt[0] * cos(arg(0));
    case Op::Cos:
      return scale(*dt[0] * sin(arg(0)), -1.0);
    case Op::Exp:
      return *dt[0] * self;
    case Op::Square:
      return scale(*dt[0] * arg(0), 2.0);
    case Op::Pow:
      return scale(*dt[0] * pow(arg(0), n.scalar - 1.0), n.scalar);
    case Op::Scale:
      return scale(*dt[0], n.scalar);
    case Op::Shift:
      return *dt[0];
    case Op::Add:
      add_opt(r, dt[0]);
      add_opt(r, dt[1]);
      return r;
    case Op::Sub:
      if (dt[0] && dt[1]) return *dt[0] - *dt[1];
      if (dt[0]) return *dt[0];
      return scale(*dt[1], -1.0);
    case Op::Mul:
      if (dt[0]) add_opt(r, *dt[0] * arg(1));
      if (dt[1]) add_opt(r, arg(0) * *dt[1]);
      return r;
    case Op::Div: {
      if (dt[0]) add_opt(r, *dt[0]);
      if (dt[1]) add_opt(r, scale(*dt[1] * self, -1.0));
      return *r / arg(1);
    }
    case Op::Product3:
      if (dt[0]) add_opt(r, product3(*dt[0], arg(1), arg(2), n.scalar));
      if (dt[1]) add_opt(r, product3(arg(0), *dt[1], arg(2), n.scalar));
      if (dt[2]) add_opt(r, product3(arg(0), arg(1), *dt[2], n.scalar));
      return r;
    case Op::TanhGrad:
      if (dt[0]) add_opt(r, tanh_grad(*dt[0], arg(1)));
      if (dt[1]) add_opt(r, product3(arg(0), arg(1), *dt[1], -2.0));
      return r;
    case Op::MatMul:
      if (dt[0]) add_opt(r, matmul(*dt[0], arg(1), n.trans_a, n.trans_b));
      if (dt[1]) add_opt(r, matmul(arg(0), *dt[1], n.trans_a, n.trans_b));
      return r;
    case Op::Affine:
      if (dt[0]) add_opt(r, matmul(*dt[0], arg(1)));
      if (dt[1]) add_opt(r, matmul(arg(0), *dt[1]));
      if (dt[2]) add_opt(r, broadcast_cols(*dt[2], arg(1).cols()));
      return r;
    case Op::SliceRows:
      return slice_rows(*dt[0], n.extent0, n.extent1);
    case Op::PadRows:
      return pad_rows(*dt[0], n.extent0, n.extent1);
    case Op::RowSum:
      return row_sum(*dt[0]);
    case Op::BroadcastCols:
      return broadcast_cols(*dt[0], n.extent0);
    case Op::Sum:
      return sum(*dt[0]);
    case Op::Mean:
      return mean(*dt[0]);
    case Op::BroadcastScalar:
      return broadcast_scalar(*dt[0], n.extent0, n.extent1);
    case Op::Input:
    case Op::Param:
    case Op::Const:
      return std::nullopt;
    case Op::Custom:
      throw CapabilityError("cannot differentiate through custom node");
  }
  return std::nullopt;
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::Input: return "input";
    case Op::Param: return "param";
    case Op::Const: return "const";
    case Op::Tanh: return "tanh";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Square: return "square";
    case Op::Pow: return "pow";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Product3: return "product3";
    case Op::TanhGrad: return "tanh_grad";
    case Op::MatMul: return "matmul";
    case Op::Affine: return "affine";
    case Op::SliceRows: return "slice_rows";
    case Op::PadRows: return "pad_rows";
    case Op::RowSum: return "row_sum";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::BroadcastScalar: return "broadcast_scalar";
    case Op::Custom: return "custom";
  }
  return "?";
}

bool is_leaf(Op op) noexcept { return op == Op::Input || op == Op::Param || op == Op::Const; }

int Node::arity() const noexcept {
  int k = 0;
  while (k < 3 && args[static_cast<std::size_t>(k)] >= 0) ++k;
  return k;
}

const Matrix& Var::value() const {
  if (!valid()) throw ContractError("invalid Var");
  return tape_->node(id_).value;
}

Var Tape::input(Matrix value, bool differentiable) {
  Node n;
  n.op = Op::Input;
  n.differentiable = differentiable;
  n.value = std::move(value);
  Var v = emit(std::move(n));
  inputs_.push_back(v.id());
  return v;
}

Var Tape::param(Matrix value, bool trainable) {
  Node n;
  n.op = Op::Param;
  n.differentiable = trainable;
  n.value = std::move(value);
  Var v = emit(std::move(n));
  params_.push_back(v.id());
  return v;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(value);
  return emit(std::move(n));
}

Var Tape::constant(Index rows, Index cols, double fill) {
  return constant(Matrix::Constant(rows, cols, fill));
}

Var Tape::custom(std::string name, std::vector<Var> args, CustomKernel kernel) {
  if (args.size() > 3) throw ContractError("custom node takes at most 3 operands");
  Node n;
  n.op = Op::Custom;
  for (std::size_t k = 0; k < args.size(); ++k) {
    check_owned(args[k]);
    n.args[k] = args[k].id();
  }
  n.extent0 = static_cast<Index>(kernels_.size());
  kernels_.push_back(std::move(kernel));
  kernel_names_.push_back(std::move(name));
  return emit(std::move(n));
}

const std::string& Tape::custom_name(const Node& n) const {
  return kernel_names_.at(static_cast<std::size_t>(n.extent0));
}

void Tape::check_owned(Var v) const {
  if (!v.valid() || &v.tape() != this || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::emit(Node n) {
  const int k = n.arity();
  for (int i = 0; i < k; ++i) {
    const auto a = n.args[static_cast<std::size_t>(i)];
    if (a < 0 || static_cast<std::size_t>(a) >= nodes_.size()) {
      throw ContractError("operand index out of range");
    }
    n.differentiable = n.differentiable || nodes_[static_cast<std::size_t>(a)].differentiable;
  }
  if (!is_leaf(n.op)) compute(n);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

void Tape::compute(Node& n) const {
  auto val = [&](int k) -> const Matrix& {
    return nodes_[static_cast<std::size_t>(n.args[static_cast<std::size_t>(k)])].value;
  };
  switch (n.op) {
    case Op::Input:
    case Op::Param:
    case Op::Const:
      return;
    case Op::Tanh:
      fast_tanh(val(0), n.value);
      return;
    case Op::Sin:
      n.value = val(0).array().sin().matrix();
      return;
    case Op::Cos:
      n.value = val(0).array().cos().matrix();
      return;
    case Op::Exp:
      n.value = val(0).array().exp().matrix();
      return;
    case Op::Square:
      n.value = val(0).array().square().matrix();
      return;
    case Op::Pow:
      n.value = val(0).array().pow(n.scalar).matrix();
      return;
    case Op::Scale:
      n.value = n.scalar * val(0);
      return;
    case Op::Shift:
      n.value = (val(0).array() + n.scalar).matrix();
      return;
    case Op::Add:
      n.value = val(0) + val(1);
      return;
    case Op::Sub:
      n.value = val(0) - val(1);
      return;
    case Op::Mul:
      n.value = (val(0).array() * val(1).array()).matrix();
      return;
    case Op::Div:
      n.value = (val(0).array() / val(1).array()).matrix();
      return;
    case Op::Product3:
      n.value = (n.scalar * val(0).array() * val(1).array() * val(2).array()).matrix();
      return;
    case Op::TanhGrad:
      n.value = (val(0).array() * (1.0 - val(1).array().square())).matrix();
      return;
    case Op::MatMul: {
      const Matrix& a = val(0);
      const Matrix& b = val(1);
      if (!n.trans_a && !n.trans_b) n.value.noalias() = a * b;
      else if (n.trans_a && !n.trans_b) n.value.noalias() = a.transpose() * b;
      else if (!n.trans_a && n.trans_b) n.value.noalias() = a * b.transpose();
      else n.value.noalias() = a.transpose() * b.transpose();
      return;
    }
    case Op::Affine:
      n.value.noalias() = val(0) * val(1);
      n.value.colwise() += val(2).col(0);
      return;
    case Op::SliceRows:
      n.value = val(0).middleRows(n.extent0, n.extent1);
      return;
    case Op::PadRows:
      n.value = RawEmitter::pad_rows(val(0), n.extent0, n.extent1);
      return;
    case Op::RowSum:
      n.value = val(0).rowwise().sum();
      return;
    case Op::BroadcastCols:
      n.value = val(0).replicate(1, n.extent0);
      return;
    case Op::Sum:
      n.value = Matrix::Constant(1, 1, val(0).sum());
      return;
    case Op::Mean:
      n.value = Matrix::Constant(1, 1, val(0).mean());
      return;
    case Op::BroadcastScalar:
      n.value = Matrix::Constant(n.extent0, n.extent1, val(0)(0, 0));
      return;
    case Op::Custom: {
      std::array<const Matrix*, 3> ptrs{};
      const int k = n.arity();
      for (int i = 0; i < k; ++i) ptrs[static_cast<std::size_t>(i)] = &val(i);
      n.value = kernels_[static_cast<std::size_t>(n.extent0)](
          std::span<const Matrix* const>(ptrs.data(), static_cast<std::size_t>(k)));
      return;
    }
  }
}

std::vector<char> Tape::descendants(std::span<const std::int32_t> seeds) const {
  std::vector<char> mark(nodes_.size(), 0);
  std::size_t first = nodes_.size();
  for (auto s : seeds) {
    mark[static_cast<std::size_t>(s)] = 1;
    first = std::min(first, static_cast<std::size_t>(s));
  }
  for (std::size_t i = first; i < nodes_.size(); ++i) {
    if (mark[i]) continue;
    const Node& n = nodes_[i];
    for (int k = 0; k < n.arity(); ++k) {
      if (mark[static_cast<std::size_t>(n.args[static_cast<std::size_t>(k)])]) {
        mark[i] = 1;
        break;
      }
    }
  }
  return mark;
}

std::vector<char> Tape::ancestors(std::span<const std::int32_t> roots) const {
  std::vector<char> mark(nodes_.size(), 0);
  std::size_t last = 0;
  for (auto r : roots) {
    mark[static_cast<std::size_t>(r)] = 1;
    last = std::max(last, static_cast<std::size_t>(r));
  }
  for (std::size_t i = last + 1; i-- > 0;) {
    if (!mark[i]) continue;
    const Node& n = nodes_[i];
    for (int k = 0; k < n.arity(); ++k) mark[static_cast<std::size_t>(n.args[static_cast<std::size_t>(k)])] = 1;
  }
  return mark;
}

std::vector<Var> Tape::grad(Var output, std::span<const Var> wrt) {
  check_owned(output);
  return grad(output, wrt, constant(output.rows(), output.cols(), 1.0));
}

std::vector<Var> Tape::grad(Var output, std::span<const Var> wrt, Var seed) {
  check_owned(output);
  check_owned(seed);
  require_shape(output.rows() == seed.rows() && output.cols() == seed.cols(), "grad seed",
                output.value(), seed.value());
  std::vector<std::int32_t> wrt_ids;
  for (const Var& w : wrt) {
    check_owned(w);
    wrt_ids.push_back(w.id());
  }
  const std::size_t n0 = nodes_.size();
  const std::int32_t root_id = output.id();
  const auto anc = ancestors(std::span<const std::int32_t>(&root_id, 1));
  const auto desc = descendants(wrt_ids);

  std::vector<std::optional<Var>> adj(n0);
  adj[static_cast<std::size_t>(root_id)] = seed;
  TapeEmitter e{*this};
  for (std::size_t i = static_cast<std::size_t>(root_id) + 1; i-- > 0;) {
    if (!adj[i] || !desc[i] || !anc[i]) continue;
    const Node& n = nodes_[i];
    if (is_leaf(n.op)) continue;
    std::array<bool, 3> need{};
    const int k = n.arity();
    for (int j = 0; j < k; ++j) need[static_cast<std::size_t>(j)] = desc[static_cast<std::size_t>(n.args[static_cast<std::size_t>(j)])] != 0;
    std::array<std::optional<Var>, 3> out;
    const Var g = *adj[i];
    vjp_rule(e, static_cast<std::int32_t>(i), n, g, need, out);
    for (int j = 0; j < k; ++j) {
      auto& o = out[static_cast<std::size_t>(j)];
      if (!need[static_cast<std::size_t>(j)] || !o) continue;
      TapeEmitter::accumulate(adj[static_cast<std::size_t>(n.args[static_cast<std::size_t>(j)])], std::move(*o));
    }
  }
  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    const auto& a = adj[static_cast<std::size_t>(w.id())];
    result.push_back(a ? *a : constant(w.rows(), w.cols(), 0.0));
  }
  return result;
}

std::vector<Var> Tape::jvp(std::span<const Var> outputs, Var input, Var tangent) {
  check_owned(input);
  check_owned(tangent);
  require_shape(input.rows() == tangent.rows() && input.cols() == tangent.cols(), "jvp tangent",
                input.value(), tangent.value());
  std::vector<std::int32_t> out_ids;
  for (const Var& o : outputs) {
    check_owned(o);
    out_ids.push_back(o.id());
  }
  const std::int32_t in_id = input.id();
  const auto anc = ancestors(out_ids);
  const auto desc = descendants(std::span<const std::int32_t>(&in_id, 1));
  std::size_t last = 0;
  for (auto o : out_ids) last = std::max(last, static_cast<std::size_t>(o));

  std::vector<std::optional<Var>> tan(last + 1);
  if (static_cast<std::size_t>(in_id) <= last) tan[static_cast<std::size_t>(in_id)] = tangent;
  for (std::size_t i = static_cast<std::size_t>(in_id) + 1; i <= last; ++i) {
    if (!anc[i] || !desc[i]) continue;
    const Node& n = nodes_[i];
    if (is_leaf(n.op)) continue;
    std::array<std::optional<Var>, 3> dt;
    bool any = false;
    for (int j = 0; j < n.arity(); ++j) {
      dt[static_cast<std::size_t>(j)] = tan[static_cast<std::size_t>(n.args[static_cast<std::size_t>(j)])];
      any = any || dt[static_cast<std::size_t>(j)].has_value();
    }
    if (!any) continue;
    tan[i] = jvp_rule(*this, static_cast<std::int32_t>(i), n, dt);
  }
  std::vector<Var> result;
  result.reserve(outputs.size());
  for (const Var& o : outputs) {
    const auto& t = tan[static_cast<std::size_t>(o.id())];
    result.push_back(t ? *t : constant(o.rows(), o.cols(), 0.0));
  }
  return result;
}

std::vector<Matrix> Tape::gradient(Var root, std::span<const Var> wrt) const {
  check_owned(root);
  if (root.rows() != 1 || root.cols() != 1) {
    throw ContractError("gradient requires a scalar (1x1) root, got " + std::to_string(root.rows()) +
                        "x" + std::to_string(root.cols()));
  }
  std::vector<std::int32_t> seeds;
  std::vector<char> keep(static_cast<std::size_t>(root.id()) + 1, 0);
  for (const Var& w : wrt) {
    check_owned(w);
    if (node(w).differentiable) seeds.push_back(w.id());
    if (static_cast<std::size_t>(w.id()) < keep.size()) keep[static_cast<std::size_t>(w.id())] = 1;
  }
  std::vector<Matrix> result;
  result.reserve(wrt.size());
  if (seeds.empty()) {
    for (const Var& w : wrt) result.push_back(Matrix::Zero(w.rows(), w.cols()));
    return result;
  }
  const std::int32_t root_id = root.id();
  const auto anc = ancestors(std::span<const std::int32_t>(&root_id, 1));
  const auto desc = descendants(seeds);

  std::vector<std::optional<Matrix>> adj(static_cast<std::size_t>(root_id) + 1);
  adj[static_cast<std::size_t>(root_id)] = Matrix::Ones(1, 1);
  RawEmitter e{*this};
  for (std::size_t i = static_cast<std::size_t>(root_id) + 1; i-- > 0;) {
    if (!adj[i] || !desc[i] || !anc[i]) continue;
    const Node& n = nodes_[i];
    if (is_leaf(n.op)) continue;
    std::array<bool, 3> need{};
    const int k = n.arity();
    for (int j = 0; j < k; ++j) need[static_cast<std::size_t>(j)] = desc[static_cast<std::size_t>(n.args[static_cast<std::size_t>(j)])] != 0;
    std::array<std::optional<Matrix>, 3> out;
    vjp_rule(e, static_cast<std::int32_t>(i), n, *adj[i], need, out);
    // Intermediate adjoints are no longer needed once propagated.
    if (!keep[i]) adj[i].reset();
    for (int j = 0; j < k; ++j) {
      auto& o = out[static_cast<std::size_t>(j)];
      if (!need[static_cast<std::size_t>(j)] || !o) continue;
      RawEmitter::accumulate(adj[static_cast<std::size_t>(n.args[static_cast<std::size_t>(j)])], std::move(*o));
    }
  }
  for (const Var& w : wrt) {
    const auto id = static_cast<std::size_t>(w.id());
    if (node(w).differentiable && id < adj.size() && adj[id]) result.push_back(*adj[id]);
    else result.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  return result;
}

void Tape::set_value(Var leaf, Matrix value) {
  check_owned(leaf);
  Node& n = nodes_[static_cast<std::size_t>(leaf.id())];
  if (!is_leaf(n.op)) throw ContractError("set_value on a non-leaf node");
  require_shape(n.value.rows() == value.rows() && n.value.cols() == value.cols(), "set_value",
                n.value, value);
  n.value = std::move(value);
}

void Tape::replay() {
  for (auto& n : nodes_) compute(n);
}

TapeStats Tape::stats(Var root) const {
  check_owned(root);
  const std::int32_t root_id = root.id();
  const auto anc = ancestors(std::span<const std::int32_t>(&root_id, 1));
  std::vector<std::int32_t> trainable;
  std::vector<std::int32_t> any_diff;
  for (auto p : params_) {
    if (nodes_[static_cast<std::size_t>(p)].differentiable) {
      trainable.push_back(p);
      any_diff.push_back(p);
    }
  }
  for (auto x : inputs_) {
    if (nodes_[static_cast<std::size_t>(x)].differentiable) any_diff.push_back(x);
  }
  const auto touched = descendants(trainable);
  const auto requiring = descendants(any_diff);
  TapeStats s;
  for (std::size_t i = 0; i < anc.size(); ++i) {
    if (!anc[i]) continue;
    ++s.node_count;
    if (touched[i]) ++s.nodes_touched_by_trainables;
    if (requiring[i]) ++s.nodes_requiring_grad;
  }
  return s;
}

// ---- op constructors ----

Var tanh(Var x) { return unary(Op::Tanh, x); }
Var sin(Var x) { return unary(Op::Sin, x); }
Var cos(Var x) { return unary(Op::Cos, x); }
Var exp(Var x) { return unary(Op::Exp, x); }
Var square(Var x) { return unary(Op::Square, x); }
Var pow(Var x, double exponent) { return unary(Op::Pow, x, exponent); }
Var scale(Var x, double factor) { return unary(Op::Scale, x, factor); }
Var shift(Var x, double offset) { return unary(Op::Shift, x, offset); }

Var product3(Var a, Var b, Var c, double factor) {
  Tape& t = same_tape(a, b);
  same_tape(a, c);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "product3", a.value(), b.value());
  require_shape(a.rows() == c.rows() && a.cols() == c.cols(), "product3", a.value(), c.value());
  Node n = make(Op::Product3, {a.id(), b.id(), c.id()});
  n.scalar = factor;
  return t.emit(std::move(n));
}

Var tanh_grad(Var g, Var y) { return binary_same_shape(Op::TanhGrad, g, y, "tanh_grad"); }

Var operator+(Var a, Var b) { return binary_same_shape(Op::Add, a, b, "add"); }
Var operator-(Var a, Var b) { return binary_same_shape(Op::Sub, a, b, "sub"); }
Var operator*(Var a, Var b) { return binary_same_shape(Op::Mul, a, b, "mul"); }
Var operator/(Var a, Var b) { return binary_same_shape(Op::Div, a, b, "div"); }
Var operator-(Var a) { return scale(a, -1.0); }
Var operator*(double s, Var a) { return scale(a, s); }
Var operator*(Var a, double s) { return scale(a, s); }
Var operator+(Var a, double s) { return shift(a, s); }
Var operator-(Var a, double s) { return shift(a, -s); }
Var operator-(double s, Var a) { return shift(scale(a, -1.0), s); }

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Tape& t = same_tape(a, b);
  const Index inner_a = trans_a ? a.rows() : a.cols();
  const Index inner_b = trans_b ? b.cols() : b.rows();
  require_shape(inner_a == inner_b, "matmul", a.value(), b.value());
  Node n = make(Op::MatMul, {a.id(), b.id()});
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return t.emit(std::move(n));
}

Var affine(Var weight, Var x, Var bias) {
  Tape& t = same_tape(weight, x);
  same_tape(weight, bias);
  require_shape(weight.cols() == x.rows(), "affine", weight.value(), x.value());
  require_shape(bias.rows() == weight.rows() && bias.cols() == 1, "affine bias", weight.value(),
                bias.value());
  return t.emit(make(Op::Affine, {weight.id(), x.id(), bias.id()}));
}

Var slice_rows(Var x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + std::to_string(x.rows()));
  }
  Node n = make(Op::SliceRows, {x.id()});
  n.extent0 = start;
  n.extent1 = count;
  return x.tape().emit(std::move(n));
}

Var pad_rows(Var x, Index start, Index total_rows) {
  if (start < 0 || start + x.rows() > total_rows) {
    throw ShapeError("pad_rows: block does not fit");
  }
  Node n = make(Op::PadRows, {x.id()});
  n.extent0 = start;
  n.extent1 = total_rows;
  return x.tape().emit(std::move(n));
}

Var row_sum(Var x) { return unary(Op::RowSum, x); }

Var broadcast_cols(Var x, Index cols) {
  if (x.cols() != 1) throw ShapeError("broadcast_cols expects a column vector");
  Node n = make(Op::BroadcastCols, {x.id()});
  n.extent0 = cols;
  return x.tape().emit(std::move(n));
}

Var sum(Var x) { return unary(Op::Sum, x); }

Var mean(Var x) {
  if (x.rows() * x.cols() == 0) throw ShapeError("mean of an empty matrix");
  return unary(Op::Mean, x);
}

Var broadcast_scalar(Var x, Index rows, Index cols) {
  if (x.rows() != 1 || x.cols() != 1) throw ShapeError("broadcast_scalar expects a 1x1 operand");
  Node n = make(Op::BroadcastScalar, {x.id()});
  n.extent0 = rows;
  n.extent1 = cols;
  return x.tape().emit(std::move(n));
}

Var mul_const(Var x, const Matrix& c) { return x * x.tape().constant(c); }

}  // namespace pinntl::ad
