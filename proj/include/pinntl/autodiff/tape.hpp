#pragma once

// Matrix-level recording tape.
//
// Every node holds a dense matrix value. Network activations are stored
// feature-major (one column per collocation point), so a layer is a single
// `affine` node over the whole batch. Reverse sweeps (`grad`) and tangent
// sweeps (`jvp`) are themselves recorded as ordinary nodes, which is what lets
// a loss contain input derivatives and still be differentiated with respect to
// the trainable parameters by `gradient`.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pinntl::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Op : std::uint8_t {
  Input,
  Param,
  Const,
  Tanh,
  Sin,
  Cos,
  Exp,
  Square,
  Pow,
  Scale,
  Shift,
  Add,
  Sub,
  Mul,
  Div,
  Product3,  // scalar * a ⊙ b ⊙ c
  TanhGrad,  // g ⊙ (1 - y²), the derivative factor of tanh given its output y
  MatMul,
  Affine,  // W·X + b·1ᵀ
  SliceRows,
  PadRows,
  RowSum,
  BroadcastCols,
  Sum,
  Mean,
  BroadcastScalar,
  Custom,  // forward-only user kernel
};

const char* op_name(Op op) noexcept;
bool is_leaf(Op op) noexcept;

struct Node {
  Op op = Op::Const;
  std::array<std::int32_t, 3> args{-1, -1, -1};
  double scalar = 0.0;
  Index extent0 = 0;
  Index extent1 = 0;
  bool trans_a = false;
  bool trans_b = false;
  // True when the value depends on a differentiable leaf.
  bool differentiable = false;
  Matrix value;

  int arity() const noexcept;
};

class Tape;

/// Lightweight handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr && id_ >= 0; }
  Tape& tape() const { return *tape_; }
  std::int32_t id() const noexcept { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

struct TapeStats {
  // Nodes the root depends on, leaves included.
  std::size_t node_count = 0;
  // Subset that also depends on a trainable parameter: the nodes a parameter
  // gradient sweep has to visit.
  std::size_t nodes_touched_by_trainables = 0;
  // Subset that depends on a trainable parameter or a differentiable input.
  // This is what an engine that does not prune input paths would traverse.
  std::size_t nodes_requiring_grad = 0;
};

using CustomKernel = std::function<Matrix(std::span<const Matrix* const>)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Matrix value, bool differentiable = true);
  Var param(Matrix value, bool trainable = true);
  Var constant(Matrix value);
  Var constant(Index rows, Index cols, double fill);

  /// Records a forward-only node. Differentiating through it raises CapabilityError.
  Var custom(std::string name, std::vector<Var> args, CustomKernel kernel);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::int32_t id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(Var v) const { return node(v.id()); }
  const std::vector<std::int32_t>& input_slots() const noexcept { return inputs_; }
  const std::vector<std::int32_t>& param_slots() const noexcept { return params_; }

  /// Vector-Jacobian product of `output` against each of `wrt`, recorded on
  /// the tape so the result can be differentiated again. `seed` must have the
  /// shape of `output`; entries of `wrt` that `output` does not depend on get
  /// a zero constant.
  std::vector<Var> grad(Var output, std::span<const Var> wrt, Var seed);
  /// Same with an all-ones seed.
  std::vector<Var> grad(Var output, std::span<const Var> wrt);

  /// Jacobian-vector products of `outputs` along `tangent` (shape of `input`),
  /// recorded on the tape. Applied to the result of `grad` this gives second
  /// derivatives by forward-over-reverse.
  std::vector<Var> jvp(std::span<const Var> outputs, Var input, Var tangent);

  /// Reverse sweep from a 1x1 root, evaluated directly without recording.
  /// Leaves that are not differentiable receive zero matrices.
  std::vector<Matrix> gradient(Var root, std::span<const Var> wrt) const;

  /// Replaces the value of a leaf; call `replay` to refresh dependants.
  void set_value(Var leaf, Matrix value);
  /// Recomputes every non-leaf node in recording order.
  void replay();

  TapeStats stats(Var root) const;

  // Used by the op constructors.
  Var emit(Node node);
  const std::string& custom_name(const Node& n) const;

 private:
  friend struct TapeEmitter;

  void compute(Node& n) const;
  std::vector<char> descendants(std::span<const std::int32_t> seeds) const;
  std::vector<char> ancestors(std::span<const std::int32_t> roots) const;
  void check_owned(Var v) const;

  std::deque<Node> nodes_;
  std::vector<CustomKernel> kernels_;
  std::vector<std::string> kernel_names_;
  std::vector<std::int32_t> inputs_;
  std::vector<std::int32_t> params_;
};

// Elementwise.
Var tanh(Var x);
Var sin(Var x);
Var cos(Var x);
Var exp(Var x);
Var square(Var x);
Var pow(Var x, double exponent);
Var scale(Var x, double factor);
Var shift(Var x, double offset);
Var product3(Var a, Var b, Var c, double factor = 1.0);
Var tanh_grad(Var g, Var y);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator*(double s, Var a);
Var operator*(Var a, double s);
Var operator+(Var a, double s);
Var operator-(Var a, double s);
Var operator-(double s, Var a);

// Linear algebra.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var affine(Var weight, Var x, Var bias);

// Shape.
Var slice_rows(Var x, Index start, Index count);
Var pad_rows(Var x, Index start, Index total_rows);
Var row_sum(Var x);
Var broadcast_cols(Var x, Index cols);
Var sum(Var x);
Var mean(Var x);
Var broadcast_scalar(Var x, Index rows, Index cols);

/// Elementwise product with a constant matrix recorded on the same tape.
Var mul_const(Var x, const Matrix& c);

}  // namespace pinntl::ad
