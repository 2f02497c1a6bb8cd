#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <string>

#include "pinntl/training/problem.hpp"

namespace pinntl::tg {

using Array = Eigen::ArrayXd;

struct Spec {
  double w = std::numbers::pi;
  double re = 100.0;

  bool operator==(const Spec&) const = default;
};

void validate(const Spec& spec);

struct Fields {
  Array psi, omega, u, v, p;
};

/// Closed-form Taylor-Green vortex on [0,1]² x [0,1].
Fields exact_fields(const Spec& spec, const Array& x, const Array& y, const Array& t);

/// Analytic partial derivatives, used to evaluate the residuals on the exact solution.
struct ExactDerivatives {
  Array psi_x, psi_y, psi_xx, psi_yy;
  Array omega, omega_t, omega_x, omega_y, omega_xx, omega_yy;
};
ExactDerivatives exact_derivatives(const Spec& spec, const Array& x, const Array& y,
                                   const Array& t);

enum class Edge { Bottom, Top, Left, Right };

/// Boundary data written edge by edge (y=0, y=1, x=0, x=1). `s` is the
/// coordinate along the edge.
struct EdgeValues {
  double psi, omega, u, v;
};
EdgeValues edge_values(const Spec& spec, Edge edge, double s, double t);

/// Initial data at t = 0.
EdgeValues initial_values(const Spec& spec, double x, double y);

struct Counts {
  int interior = 1000;
  int b_psi = 100, b_omega = 100, b_u = 100, b_v = 100;
  int i_psi = 100, i_omega = 100, i_u = 100, i_v = 100;

  bool operator==(const Counts&) const = default;
};

struct Weights {
  double p = 1, b_psi = 1, b_omega = 1, b_u = 1, b_v = 1;
  double i_psi = 1, i_omega = 1, i_u = 1, i_v = 1;
};

enum class Target { Psi, Omega, U, V };

/// Targeted point groups (boundary psi, omega, u, v, then initial psi, omega,
/// u, v) are stored back to back in `anchor`, group k occupying columns
/// [offset[k], offset[k] + size[k]).
struct CollocationSet {
  Eigen::MatrixXd interior;  // 3 x N_p rows (x, y, t)
  Eigen::MatrixXd anchor;    // 3 x Σ group sizes
  Eigen::RowVectorXd target;
  std::array<Eigen::Index, 8> offset{};
  std::array<Eigen::Index, 8> size{};
  std::uint64_t seed = 0;
};

inline constexpr std::array<const char*, 8> kAnchorGroupNames = {
    "b_psi", "b_omega", "b_u", "b_v", "i_psi", "i_omega", "i_u", "i_v"};
inline constexpr std::array<Target, 8> kAnchorGroupTargets = {
    Target::Psi, Target::Omega, Target::U, Target::V,
    Target::Psi, Target::Omega, Target::U, Target::V};

CollocationSet sample_collocation(const Spec& spec, const Counts& counts, std::uint64_t seed);

/// Residual of the vorticity transport equation.
template <class T>
T transport_residual(const T& om_t, const T& om_x, const T& om_y, const T& om_xx, const T& om_yy,
                     const T& u, const T& v, double re) {
  return T(om_t + u * om_x + v * om_y - (1.0 / re) * (om_xx + om_yy));
}

/// Residual of the streamfunction Poisson equation ∇²ψ = Ω.
template <class T>
T poisson_residual(const T& psi_xx, const T& psi_yy, const T& om) {
  return T(psi_xx + psi_yy - om);
}

/// u = ∂ψ/∂y, v = −∂ψ/∂x on a tape: returns the 2 x N block (u; v).
struct Velocities {
  ad::Var u, v;
};
Velocities velocities_from_stream(const Network& net, ad::Tape& tape,
                                  std::span<const ad::Var> bound, ad::Var x);
/// Plain evaluation of (u, v) at the columns of `x`.
Eigen::MatrixXd velocities_from_stream(const Network& net, const Eigen::MatrixXd& x);

/// Component values in a fixed order: transport, poisson, b_psi, b_omega,
/// b_u, b_v, i_psi, i_omega, i_u, i_v.
inline constexpr std::array<const char*, 10> kComponentNames = {
    "transport", "poisson", "b_psi", "b_omega", "b_u", "b_v", "i_psi", "i_omega", "i_u", "i_v"};

/// All loss components evaluated on the analytic solution instead of a network.
std::array<double, 10> analytic_components(const Spec& spec, const CollocationSet& set);

/// Evaluation grid 50 x 50 x {0.3, 0.6, 1.0} as a 3 x 7500 matrix.
Eigen::MatrixXd evaluation_grid();

class TaylorGreenProblem : public Problem {
 public:
  TaylorGreenProblem(Spec spec, Counts counts, std::uint64_t collocation_seed, Weights weights = {});

  Family family() const override { return Family::TaylorGreen; }
  std::string tag() const override;
  std::vector<int> default_layer_sizes() const override { return {3, 100, 100, 100, 100, 2}; }
  LossGraph record_loss(const Network& net, ad::Tape& tape,
                        std::span<const ad::Var> bound) const override;
  /// rel_l2 is the vorticity error; the streamfunction error is reported as
  /// extra "psi_rel_l2".
  Evaluation evaluate(const Network& net) const override;

  const Spec& spec() const noexcept { return spec_; }
  const CollocationSet& collocation() const noexcept { return set_; }
  const Weights& weights() const noexcept { return weights_; }

 private:
  Spec spec_;
  Counts counts_;
  Weights weights_;
  CollocationSet set_;
  Eigen::MatrixXd grid_;
  Eigen::VectorXd grid_psi_, grid_omega_;
};

}  // namespace pinntl::tg
