#pragma once

#include <Eigen/Dense>

#include <string>

#include "pinntl/elasticity/elasticity.hpp"

namespace pinntl::oracle {

using Array = Eigen::ArrayXd;

/// Reference beam solution on the node grid of the given divisor.
struct FdSolution {
  elasticity::Grid grid;
  Array ux, uy;
  // Nodal stresses, averaged over the cells sharing the node.
  Array sxx, syy, sxy, mises;
  double residual = 0.0;  // relative residual reported by the solver
  int iterations = 0;
};

/// Bilinear-cell discretization of variable-modulus plane-stress equilibrium
/// (a 9-point stencil per displacement component), clamped at x = 0 and
/// x = L, loaded on y = H, solved by preconditioned conjugate gradients.
/// Throws SolverError when the residual does not reach `tolerance`.
FdSolution solve_beam_fd(const elasticity::BeamSpec& spec, int grid_divisor,
                         double tolerance = 1e-8);

/// CSV with columns x,y,u_x,u_y,mises.
void write_field_csv(const std::string& path, const Eigen::MatrixXd& points, const Array& ux,
                     const Array& uy, const Array& mises);

}  // namespace pinntl::oracle
