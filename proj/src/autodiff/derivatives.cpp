#include "pinntl/autodiff/derivatives.hpp"

#include <string>

#include "pinntl/errors.hpp"

namespace pinntl::ad {

Var row_indicator(Tape& tape, Index rows, Index cols, Index row) {
  Matrix m = Matrix::Zero(rows, cols);
  m.row(row).setOnes();
  return tape.constant(std::move(m));
}

Var output_gradient(Var y, Var x, Index row) {
  Tape& t = y.tape();
  Var seed = row_indicator(t, y.rows(), y.cols(), row);
  std::array<Var, 1> wrt{x};
  return t.grad(y, wrt, seed).front();
}

Var coordinate_derivative(Var f, Var x, Index j) {
  Tape& t = f.tape();
  Var dir = row_indicator(t, x.rows(), x.cols(), j);
  std::array<Var, 1> outs{f};
  return t.jvp(outs, x, dir).front();
}

namespace {

void check_arity(const Network& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " coordinates, network expects " +
                     std::to_string(net.input_dim()));
  }
}

}  // namespace

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x) {
  check_arity(net, x);
  return net.forward(Matrix(x)).col(0);
}

Matrix input_jacobian(const Network& net, const Eigen::VectorXd& x) {
  check_arity(net, x);
  Tape tape;
  auto bound = net.bind(tape);
  Var xv = tape.input(Matrix(x));
  Var y = net.forward(bound, xv);
  Matrix jac(net.output_dim(), net.input_dim());
  for (Index i = 0; i < y.rows(); ++i) jac.row(i) = output_gradient(y, xv, i).value().col(0).transpose();
  return jac;
}

Eigen::VectorXd input_second(const Network& net, const Eigen::VectorXd& x, const DerivRequest& req) {
  check_arity(net, x);
  if (req.order != 1 && req.order != 2) throw ContractError("derivative order must be 1 or 2");
  for (const auto& w : req.which) {
    if (w[0] < 0 || w[0] >= net.output_dim() || w[1] < 0 || w[1] >= net.input_dim() ||
        (req.order == 2 && (w[2] < 0 || w[2] >= net.input_dim()))) {
      throw ShapeError("derivative request index out of range");
    }
  }
  Tape tape;
  auto bound = net.bind(tape);
  Var xv = tape.input(Matrix(x));
  Var y = net.forward(bound, xv);
  Eigen::VectorXd out(static_cast<Index>(req.which.size()));
  for (std::size_t k = 0; k < req.which.size(); ++k) {
    const auto& w = req.which[k];
    Var g = output_gradient(y, xv, w[0]);
    if (req.order == 1) {
      out(static_cast<Index>(k)) = g.value()(w[1], 0);
    } else {
      out(static_cast<Index>(k)) = coordinate_derivative(g, xv, w[2]).value()(w[1], 0);
    }
  }
  return out;
}

std::vector<Matrix> param_grad(const Tape& tape, Var root) {
  std::vector<Var> params;
  for (auto id : tape.param_slots()) params.emplace_back(const_cast<Tape*>(&tape), id);
  return tape.gradient(root, params);
}

}  // namespace pinntl::ad
