#include "pinntl/elasticity/problems.hpp"

#include <cmath>
#include <cstdio>

#include "pinntl/errors.hpp"
#include "pinntl/metrics/metrics.hpp"

namespace pinntl::elasticity {

using ad::Var;
using Eigen::Index;
using Eigen::MatrixXd;

BeamProblem::BeamProblem(BeamSpec spec)
    : spec_(spec),
      grid_(beam_grid(spec_)),
      modulus_(beam_modulus(spec_, grid_.points)),
      ref_(oracle::solve_beam_fd(spec_, spec_.grid_divisor)) {}

std::string BeamProblem::tag() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "beam(porosity=%s,L=%.17g,H=%.17g,e_max=%.17g,e_min=%.17g,nu=%.17g,f=%.17g,grid=%d)",
                porosity_name(spec_.porosity), spec_.L, spec_.H, spec_.e_max, spec_.e_min, spec_.nu,
                spec_.f, spec_.grid_divisor);
  return buf;
}

LossGraph BeamProblem::record_loss(const Network& net, ad::Tape& tape,
                                   std::span<const Var> bound) const {
  FieldVars f = admissible_beam(net, tape, bound, grid_.points, spec_.L);
  LossGraph g;
  Var internal = record_strain_energy(f, grid_.weights.array() * modulus_, spec_.nu);
  Var external = ad::sum(ad::mul_const(f.uy, top_load_weights(grid_, spec_.f)));
  g.components.emplace_back("internal", internal);
  g.components.emplace_back("external", external);
  g.total = internal + external;
  return g;
}

namespace {

// ‖u(x) − u(L − x)‖ / ‖u‖ over the grid.
double mirror_asymmetry(const Grid& g, const Array& u) {
  double num = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double d = u(g.node(i, j)) - u(g.node(g.nx - 1 - i, j));
      num += d * d;
    }
  }
  const double den = u.matrix().squaredNorm();
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace

Evaluation BeamProblem::evaluate(const Network& net) const {
  const Field f = admissible_beam(net, grid_.points, spec_.L);
  const StressField s = stress_field(f, modulus_, spec_.nu);
  Evaluation e;
  e.rel_l2 = rel_l2(f.uy.matrix(), ref_.uy.matrix());
  e.rel_h1 = rel_h1_vonmises(s.mises.matrix(), ref_.mises.matrix());
  e.extra.emplace_back("ux_rel_l2", rel_l2(f.ux.matrix(), ref_.ux.matrix()));
  e.extra.emplace_back("uy_asymmetry", mirror_asymmetry(grid_, f.uy));
  const double internal =
      (grid_.weights.array() * 0.5 * (s.sxx * f.exx + s.syy * f.eyy + s.sxy * f.gxy)).sum();
  const double external = (top_load_weights(grid_, spec_.f).row(0).transpose().array() * f.uy).sum();
  e.extra.emplace_back("energy", internal + external);
  return e;
}

void BeamProblem::write_fields(const Network& net, const std::string& path) const {
  const Field f = admissible_beam(net, grid_.points, spec_.L);
  const StressField s = stress_field(f, modulus_, spec_.nu);
  oracle::write_field_csv(path, grid_.points, f.ux, f.uy, s.mises);
}

PlateProblem::PlateProblem(PlateSpec spec) : spec_(spec), mesh_(build_mesh(spec_, spec_.mesh_points)) {}

std::string PlateProblem::tag() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "plate(hole=%s,L=%.17g,E=%.17g,nu=%.17g,traction=%.17g,ax=%.17g,ay=%.17g,points=%d)",
                hole_name(spec_.hole), spec_.L, spec_.E, spec_.nu, spec_.traction, hole_semi_x(spec_),
                hole_semi_y(spec_), spec_.mesh_points);
  return buf;
}

LossGraph PlateProblem::record_loss(const Network& net, ad::Tape& tape,
                                    std::span<const Var> bound) const {
  FieldVars f = admissible_plate(net, tape, bound, mesh_.centroids, spec_.L);
  LossGraph g;
  Var internal = record_strain_energy(f, mesh_.area.array() * spec_.E, spec_.nu);
  const MatrixXd tp = traction_points(mesh_);
  Var yt = net.forward(bound, tape.input(tp / spec_.L, false));
  const MatrixXd w = -spec_.traction * (traction_weights(mesh_).array() * tp.row(0).array()).matrix();
  Var external = ad::sum(ad::mul_const(ad::slice_rows(yt, 0, 1), w));
  g.components.emplace_back("internal", internal);
  g.components.emplace_back("external", external);
  g.total = internal + external;
  return g;
}

Evaluation PlateProblem::evaluate(const Network& net) const {
  Evaluation e;
  e.extra.emplace_back("energy", energy_plate(net, spec_, mesh_).total());
  const Field f = admissible_plate(net, mesh_.vertices, spec_.L);
  double bx = 0.0, by = 0.0;
  for (int n : mesh_.x0_nodes) bx = std::max(bx, std::abs(f.ux(n)));
  for (int n : mesh_.y0_nodes) by = std::max(by, std::abs(f.uy(n)));
  e.extra.emplace_back("bc_ux_x0", bx);
  e.extra.emplace_back("bc_uy_y0", by);
  const StressField s = stress_field(f, Array::Constant(f.exx.size(), spec_.E), spec_.nu);
  Index peak = 0;
  const double mmax = s.mises.maxCoeff(&peak);
  const double px = mesh_.vertices(0, peak), py = mesh_.vertices(1, peak);
  const double ay = hole_semi_y(spec_);
  const double cell = (spec_.L - ay) / mesh_.n_radial;
  e.extra.emplace_back("mises_max", mmax);
  e.extra.emplace_back("mises_peak_x", px);
  e.extra.emplace_back("mises_peak_y", py);
  e.extra.emplace_back("mises_peak_cells", std::hypot(px, py - ay) / cell);
  return e;
}

void PlateProblem::write_fields(const Network& net, const std::string& path) const {
  const Field f = admissible_plate(net, mesh_.vertices, spec_.L);
  const StressField s = stress_field(f, Array::Constant(f.exx.size(), spec_.E), spec_.nu);
  oracle::write_field_csv(path, mesh_.vertices, f.ux, f.uy, s.mises);
}

}  // namespace pinntl::elasticity
