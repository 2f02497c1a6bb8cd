#pragma once

#include <array>
#include <vector>

#include "pinntl/autodiff/tape.hpp"
#include "pinntl/network/network.hpp"

namespace pinntl::ad {

/// Constant matrix with row `row` set to ones and the rest zero.
Var row_indicator(Tape& tape, Index rows, Index cols, Index row);

/// d(sum over points of y_row)/dx for a feature-major batch: a d x N matrix
/// whose row j holds ∂y_row/∂x_j at every point.
Var output_gradient(Var y, Var x, Index row);

/// Directional derivative along coordinate j of a quantity that depends on x
/// pointwise (forward mode over the recorded graph).
Var coordinate_derivative(Var f, Var x, Index j);

struct DerivRequest {
  int order = 2;
  // (output, input_a, input_b); input_b is ignored for order 1.
  std::vector<std::array<int, 3>> which;
};

/// Output of the network at a single point.
Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x);
/// ∂y_i/∂x_j at a single point.
Matrix input_jacobian(const Network& net, const Eigen::VectorXd& x);
/// Requested partials at a single point, in request order.
Eigen::VectorXd input_second(const Network& net, const Eigen::VectorXd& x, const DerivRequest& req);

/// Gradient of a scalar root with respect to every parameter slot of the tape.
std::vector<Matrix> param_grad(const Tape& tape, Var root);

}  // namespace pinntl::ad
