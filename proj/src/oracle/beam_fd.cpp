#include "pinntl/oracle/beam_fd.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "pinntl/errors.hpp"

namespace pinntl::oracle {

using Eigen::Index;
using elasticity::BeamSpec;

namespace {

using Mat38 = Eigen::Matrix<double, 3, 8>;
using Mat3 = Eigen::Matrix3d;

constexpr std::array<double, 4> kXi = {-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kEta = {-1.0, -1.0, 1.0, 1.0};

// Strain-displacement matrix of a bilinear cell at natural coordinates
// (xi, eta). Rows ε_xx, ε_yy, γ_xy; columns (u_x, u_y) per corner.
Mat38 strain_matrix(double xi, double eta, double hx, double hy) {
  Mat38 B = Mat38::Zero();
  for (int a = 0; a < 4; ++a) {
    const double dx = 0.25 * kXi[a] * (1.0 + eta * kEta[a]) * 2.0 / hx;
    const double dy = 0.25 * kEta[a] * (1.0 + xi * kXi[a]) * 2.0 / hy;
    B(0, 2 * a) = dx;
    B(1, 2 * a + 1) = dy;
    B(2, 2 * a) = dy;
    B(2, 2 * a + 1) = dx;
  }
  return B;
}

Mat3 plane_stress_matrix(double E, double nu) {
  Mat3 D;
  D << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu);
  return D * (E / (1.0 - nu * nu));
}

double modulus(const BeamSpec& spec, double y) {
  return elasticity::material_at(spec.porosity, std::clamp(y, 0.0, spec.H), spec.H, spec.e_max,
                                 spec.e_min, spec.nu)
      .E;
}

}  // namespace

FdSolution solve_beam_fd(const BeamSpec& spec_in, int grid_divisor, double tolerance) {
  if (grid_divisor < 1) throw DomainError("grid divisor must be at least 1");
  BeamSpec spec = spec_in;
  spec.grid_divisor = grid_divisor;
  FdSolution sol;
  sol.grid = elasticity::beam_grid(spec);
  const auto& g = sol.grid;
  const Index nodes = g.points.cols();

  // Free dofs: everything off the clamped columns.
  std::vector<Index> dof(static_cast<std::size_t>(2 * nodes), -1);
  Index nfree = 0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i + 1 < g.nx; ++i) {
      const Index k = g.node(i, j);
      dof[static_cast<std::size_t>(2 * k)] = nfree++;
      dof[static_cast<std::size_t>(2 * k + 1)] = nfree++;
    }
  }

  const double gp = 1.0 / std::sqrt(3.0);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(64 * (g.nx - 1) * (g.ny - 1)));
  for (int j = 0; j + 1 < g.ny; ++j) {
    const double y0 = g.points(1, g.node(0, j));
    for (int i = 0; i + 1 < g.nx; ++i) {
      Eigen::Matrix<double, 8, 8> Ke = Eigen::Matrix<double, 8, 8>::Zero();
      for (double eta : {-gp, gp}) {
        const Mat3 D = plane_stress_matrix(modulus(spec, y0 + 0.5 * (1.0 + eta) * g.hy), spec.nu);
        for (double xi : {-gp, gp}) {
          const Mat38 B = strain_matrix(xi, eta, g.hx, g.hy);
          Ke.noalias() += B.transpose() * D * B * (0.25 * g.hx * g.hy);
        }
      }
      const std::array<Index, 4> corner = {g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1),
                                           g.node(i, j + 1)};
      for (int a = 0; a < 8; ++a) {
        const Index ra = dof[static_cast<std::size_t>(2 * corner[static_cast<std::size_t>(a / 2)] + a % 2)];
        if (ra < 0) continue;
        for (int b = 0; b < 8; ++b) {
          const Index cb =
              dof[static_cast<std::size_t>(2 * corner[static_cast<std::size_t>(b / 2)] + b % 2)];
          if (cb >= 0) trip.emplace_back(ra, cb, Ke(a, b));
        }
      }
    }
  }
  Eigen::SparseMatrix<double> K(nfree, nfree);
  K.setFromTriplets(trip.begin(), trip.end());

  // Consistent nodal loads of the downward edge load on y = H.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  for (int i = 1; i + 1 < g.nx; ++i) {
    const Index d = dof[static_cast<std::size_t>(2 * g.node(i, g.ny - 1) + 1)];
    rhs(d) = -spec.f * g.hx;
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(nfree);
  if (rhs.squaredNorm() > 0.0) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(tolerance);
    cg.setMaxIterations(static_cast<Index>(20 * nfree));
    cg.compute(K);
    if (cg.info() != Eigen::Success) throw SolverError("preconditioner factorization failed");
    u = cg.solve(rhs);
    sol.residual = (K * u - rhs).norm() / rhs.norm();
    sol.iterations = static_cast<int>(cg.iterations());
    if (cg.info() != Eigen::Success || !(sol.residual <= tolerance)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "CG stopped after %d iterations at relative residual %.3e",
                    sol.iterations, sol.residual);
      throw SolverError(buf);
    }
  }

  Eigen::VectorXd full = Eigen::VectorXd::Zero(2 * nodes);
  for (Index k = 0; k < 2 * nodes; ++k) {
    const Index d = dof[static_cast<std::size_t>(k)];
    if (d >= 0) full(k) = u(d);
  }
  sol.ux.resize(nodes);
  sol.uy.resize(nodes);
  for (Index k = 0; k < nodes; ++k) {
    sol.ux(k) = full(2 * k);
    sol.uy(k) = full(2 * k + 1);
  }

  // Corner strains of every cell, averaged per node.
  Eigen::Matrix<double, 3, Eigen::Dynamic> strain = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, nodes);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(nodes);
  for (int j = 0; j + 1 < g.ny; ++j) {
    for (int i = 0; i + 1 < g.nx; ++i) {
      const std::array<Index, 4> corner = {g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1),
                                           g.node(i, j + 1)};
      Eigen::Matrix<double, 8, 1> ue;
      for (int a = 0; a < 4; ++a) {
        ue(2 * a) = full(2 * corner[static_cast<std::size_t>(a)]);
        ue(2 * a + 1) = full(2 * corner[static_cast<std::size_t>(a)] + 1);
      }
      for (int a = 0; a < 4; ++a) {
        strain.col(corner[static_cast<std::size_t>(a)]) += strain_matrix(kXi[a], kEta[a], g.hx, g.hy) * ue;
        count(corner[static_cast<std::size_t>(a)]) += 1.0;
      }
    }
  }
  sol.sxx.resize(nodes);
  sol.syy.resize(nodes);
  sol.sxy.resize(nodes);
  for (Index k = 0; k < nodes; ++k) {
    const Eigen::Vector3d e = strain.col(k) / count(k);
    const auto s = elasticity::plane_stress_sigma({e(0), e(1), 0.5 * e(2)},
                                                  modulus(spec, g.points(1, k)), spec.nu);
    sol.sxx(k) = s.xx;
    sol.syy(k) = s.yy;
    sol.sxy(k) = s.xy;
  }
  sol.mises = elasticity::von_mises(sol.sxx, sol.syy, sol.sxy);
  return sol;
}

void write_field_csv(const std::string& path, const Eigen::MatrixXd& points, const Array& ux,
                     const Array& uy, const Array& mises) {
  const Index n = points.cols();
  if (ux.size() != n || uy.size() != n || mises.size() != n) {
    throw ShapeError("field columns do not match the point count");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "x,y,u_x,u_y,mises\n";
  char buf[160];
  for (Index k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", points(0, k), points(1, k),
                  ux(k), uy(k), mises(k));
    out << buf;
  }
}

}  // namespace pinntl::oracle
