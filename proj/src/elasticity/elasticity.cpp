#include "pinntl/elasticity/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pinntl/autodiff/derivatives.hpp"
#include "pinntl/errors.hpp"

namespace pinntl::elasticity {

using ad::Var;
using Eigen::Index;
using Eigen::MatrixXd;

const char* porosity_name(Porosity p) noexcept {
  return p == Porosity::Symmetric ? "symmetric" : "asymmetric";
}

const char* hole_name(Hole h) noexcept { return h == Hole::Circle ? "circle" : "ellipse"; }

void validate(const BeamSpec& s) {
  if (!(s.L > 0.0) || !(s.H > 0.0)) throw DomainError("beam dimensions must be positive");
  if (!(s.e_min > 0.0) || !(s.e_max >= s.e_min)) {
    throw DomainError("beam moduli need 0 < E_min <= E_max");
  }
  if (!(s.nu > -1.0 && s.nu < 0.5)) throw DomainError("Poisson's ratio must lie in (-1, 0.5)");
  if (!std::isfinite(s.f)) throw DomainError("beam load must be finite");
  if (s.grid_divisor < 1) throw DomainError("grid divisor must be at least 1");
  const double h = 0.01 * s.grid_divisor;
  for (double len : {s.L, s.H}) {
    const double cells = len / h;
    if (std::abs(cells - std::round(cells)) > 1e-9 || std::round(cells) < 1.0) {
      throw DomainError("grid spacing " + std::to_string(h) + " does not divide the beam");
    }
  }
}

Material material_at(Porosity kind, double y, double H, double e_max, double e_min, double nu) {
  if (!(y >= 0.0 && y <= H)) {
    throw DomainError("y = " + std::to_string(y) + " outside [0, " + std::to_string(H) + "]");
  }
  const double c = kind == Porosity::Symmetric ? std::cos(std::numbers::pi * (y / H - 0.5))
                                               : std::cos(std::numbers::pi * y / (2.0 * H));
  Material m;
  m.E = e_max - c * (e_max - e_min);
  m.G = m.E / (2.0 * (1.0 + nu));
  m.lambda = nu * m.E / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return m;
}

StressState plane_stress_sigma(const Strain& eps, double E, double nu) {
  const double G = E / (2.0 * (1.0 + nu));
  const double lambda = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double ezz = -nu / (1.0 - nu) * (eps.xx + eps.yy);
  const double tr = eps.xx + eps.yy + ezz;
  StressState s;
  s.xx = 2.0 * G * eps.xx + lambda * tr;
  s.yy = 2.0 * G * eps.yy + lambda * tr;
  s.xy = 2.0 * G * eps.xy;
  s.zz = 0.0;
  return s;
}

double von_mises(const StressState& s) {
  const double p = (s.xx + s.yy + s.zz) / 3.0;
  const double dx = s.xx - p, dy = s.yy - p, dz = s.zz - p;
  return std::sqrt(1.5 * (dx * dx + dy * dy + dz * dz + 2.0 * s.xy * s.xy));
}

Array von_mises(const Array& sxx, const Array& syy, const Array& sxy) {
  const Array p = (sxx + syy) / 3.0;
  const Array dx = sxx - p, dy = syy - p;
  return (1.5 * (dx.square() + dy.square() + p.square() + 2.0 * sxy.square())).sqrt();
}

Grid beam_grid(const BeamSpec& spec) {
  validate(spec);
  const double h = 0.01 * spec.grid_divisor;
  Grid g;
  g.nx = static_cast<int>(std::lround(spec.L / h)) + 1;
  g.ny = static_cast<int>(std::lround(spec.H / h)) + 1;
  g.hx = spec.L / (g.nx - 1);
  g.hy = spec.H / (g.ny - 1);
  const Index n = static_cast<Index>(g.nx) * g.ny;
  g.points.resize(2, n);
  g.weights.resize(n);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index k = g.node(i, j);
      // Exact end coordinates so the clamped columns sit at 0 and L.
      g.points(0, k) = i == g.nx - 1 ? spec.L : i * g.hx;
      g.points(1, k) = j == g.ny - 1 ? spec.H : j * g.hy;
      const double wx = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
      const double wy = (j == 0 || j == g.ny - 1) ? 0.5 : 1.0;
      g.weights(k) = wx * wy * g.hx * g.hy;
    }
  }
  return g;
}

namespace {

MatrixXd row_of(const Array& a) { return a.matrix().transpose(); }

void check_arity(const Network& net) {
  if (net.input_dim() != 2 || net.output_dim() != 2) {
    throw ShapeError("elasticity fields need a [2 -> 2] network");
  }
}

Field read(const FieldVars& v) {
  Field f;
  f.ux = v.ux.value().row(0).transpose().array();
  f.uy = v.uy.value().row(0).transpose().array();
  f.exx = v.exx.value().row(0).transpose().array();
  f.eyy = v.eyy.value().row(0).transpose().array();
  f.gxy = v.gxy.value().row(0).transpose().array();
  return f;
}

}  // namespace

FieldVars admissible_beam(const Network& net, ad::Tape& tape, std::span<const Var> bound,
                          const MatrixXd& points, double L) {
  check_arity(net);
  if (points.rows() != 2) throw ShapeError("beam points must be 2 x N");
  const Array x = points.row(0).transpose().array();
  const MatrixXd s = row_of(x * (L - x));
  const MatrixXd ds = row_of(L - 2.0 * x);
  Var X = tape.input(points);
  Var Y = net.forward(bound, X);
  Var g0 = ad::output_gradient(Y, X, 0);
  Var g1 = ad::output_gradient(Y, X, 1);
  Var n0 = ad::slice_rows(Y, 0, 1), n1 = ad::slice_rows(Y, 1, 1);
  FieldVars f;
  f.ux = ad::mul_const(n0, s);
  f.uy = ad::mul_const(n1, s);
  f.exx = ad::mul_const(ad::slice_rows(g0, 0, 1), s) + ad::mul_const(n0, ds);
  f.eyy = ad::mul_const(ad::slice_rows(g1, 1, 1), s);
  f.gxy = ad::mul_const(ad::slice_rows(g0, 1, 1) + ad::slice_rows(g1, 0, 1), s) +
          ad::mul_const(n1, ds);
  return f;
}

Field admissible_beam(const Network& net, const MatrixXd& points, double L) {
  ad::Tape tape;
  auto bound = net.bind(tape);
  return read(admissible_beam(net, tape, bound, points, L));
}

FieldVars admissible_plate(const Network& net, ad::Tape& tape, std::span<const Var> bound,
                           const MatrixXd& points, double L) {
  check_arity(net);
  if (points.rows() != 2) throw ShapeError("plate points must be 2 x N");
  const MatrixXd x = points.row(0);
  const MatrixXd y = points.row(1);
  Var X = tape.input(points / L);
  Var Y = net.forward(bound, X);
  Var g0 = ad::output_gradient(Y, X, 0);
  Var g1 = ad::output_gradient(Y, X, 1);
  Var n0 = ad::slice_rows(Y, 0, 1), n1 = ad::slice_rows(Y, 1, 1);
  FieldVars f;
  f.ux = ad::mul_const(n0, x);
  f.uy = ad::mul_const(n1, y);
  f.exx = n0 + ad::mul_const(ad::slice_rows(g0, 0, 1), x / L);
  f.eyy = n1 + ad::mul_const(ad::slice_rows(g1, 1, 1), y / L);
  f.gxy = ad::mul_const(ad::slice_rows(g0, 1, 1), x / L) +
          ad::mul_const(ad::slice_rows(g1, 0, 1), y / L);
  return f;
}

Field admissible_plate(const Network& net, const MatrixXd& points, double L) {
  ad::Tape tape;
  auto bound = net.bind(tape);
  return read(admissible_plate(net, tape, bound, points, L));
}

StressField stress_field(const Field& f, const Array& E, double nu) {
  const Index n = f.exx.size();
  if (E.size() != n) throw ShapeError("modulus field does not match the strain field");
  StressField s;
  s.sxx.resize(n);
  s.syy.resize(n);
  s.sxy.resize(n);
  for (Index k = 0; k < n; ++k) {
    const auto st = plane_stress_sigma({f.exx(k), f.eyy(k), 0.5 * f.gxy(k)}, E(k), nu);
    s.sxx(k) = st.xx;
    s.syy(k) = st.yy;
    s.sxy(k) = st.xy;
  }
  s.mises = von_mises(s.sxx, s.syy, s.sxy);
  return s;
}

Array beam_modulus(const BeamSpec& spec, const MatrixXd& points) {
  Array E(points.cols());
  for (Index k = 0; k < points.cols(); ++k) {
    // Grid rows can land a rounding step past H.
    const double y = std::clamp(points(1, k), 0.0, spec.H);
    E(k) = material_at(spec.porosity, y, spec.H, spec.e_max, spec.e_min, spec.nu).E;
  }
  return E;
}

Var record_strain_energy(const FieldVars& f, const Array& weight_times_E, double nu) {
  // ½σ:ε = ½E/(1−ν²)(ε_xx² + ε_yy² + 2ν ε_xx ε_yy) + ½G γ_xy².
  const MatrixXd c_normal = row_of(0.5 * weight_times_E / (1.0 - nu * nu));
  const MatrixXd c_cross = row_of(nu * weight_times_E / (1.0 - nu * nu));
  const MatrixXd c_shear = row_of(0.25 * weight_times_E / (1.0 + nu));
  Var w = ad::mul_const(ad::square(f.exx) + ad::square(f.eyy), c_normal) +
          ad::mul_const(f.exx * f.eyy, c_cross) + ad::mul_const(ad::square(f.gxy), c_shear);
  return ad::sum(w);
}

MatrixXd top_load_weights(const Grid& g, double f) {
  MatrixXd w = MatrixXd::Zero(1, g.points.cols());
  for (int i = 0; i < g.nx; ++i) {
    w(0, g.node(i, g.ny - 1)) = f * g.hx * ((i == 0 || i == g.nx - 1) ? 0.5 : 1.0);
  }
  return w;
}

EnergyParts energy_beam(const Network& net, const BeamSpec& spec) {
  const Grid g = beam_grid(spec);
  const Field f = admissible_beam(net, g.points, spec.L);
  const Array E = beam_modulus(spec, g.points);
  const StressField s = stress_field(f, E, spec.nu);
  const Array density = 0.5 * (s.sxx * f.exx + s.syy * f.eyy + s.sxy * f.gxy);
  EnergyParts e;
  e.internal = (g.weights.array() * density).sum();
  // Work of the downward load is −f∫u_y; the energy carries its negative.
  e.external = (top_load_weights(g, spec.f).row(0).transpose().array() * f.uy).sum();
  return e;
}

// ---------------------------------------------------------------- plate

void validate(const PlateSpec& s) {
  if (!(s.L > 0.0)) throw DomainError("plate side must be positive");
  if (!(s.E > 0.0)) throw DomainError("plate modulus must be positive");
  if (!(s.nu > -1.0 && s.nu < 0.5)) throw DomainError("Poisson's ratio must lie in (-1, 0.5)");
  if (!std::isfinite(s.traction)) throw DomainError("plate traction must be finite");
  const double ax = hole_semi_x(s), ay = hole_semi_y(s);
  if (!(ax > 0.0 && ay > 0.0) || ax >= s.L || ay >= s.L) {
    throw DomainError("hole must lie strictly inside the quarter plate");
  }
  if (s.mesh_points < 4) throw DomainError("mesh needs at least 4 points");
}

double hole_semi_x(const PlateSpec& s) { return s.hole == Hole::Circle ? s.r : s.a; }
double hole_semi_y(const PlateSpec& s) { return s.hole == Hole::Circle ? s.r : s.b; }

double analytic_area(const PlateSpec& s) {
  return s.L * s.L - std::numbers::pi * hole_semi_x(s) * hole_semi_y(s) / 4.0;
}

TriMesh build_mesh(const PlateSpec& spec, int target_point_count) {
  validate(spec);
  if (target_point_count < 4) throw ConstructionError("target point count must be at least 4");
  // 4·n_arc·n_radial triangles with n_radial ≈ 1.25 n_arc keeps cells roughly square.
  const int n_arc = std::max(1, static_cast<int>(std::lround(std::sqrt(target_point_count / 5.0))));
  const int n_rad = std::max(1, static_cast<int>(std::lround(1.25 * n_arc)));
  const double L = spec.L, ax = hole_semi_x(spec), ay = hole_semi_y(spec);
  const int nk = 2 * n_arc + 1, nj = n_rad + 1;

  TriMesh m;
  m.n_arc = n_arc;
  m.n_radial = n_rad;
  m.vertices.resize(2, static_cast<Index>(nk) * nj);
  auto vid = [nj](int k, int j) { return k * nj + j; };
  for (int k = 0; k < nk; ++k) {
    double hx, hy, ox, oy;
    if (k == 0) {
      hx = ax, hy = 0.0;
    } else if (k == nk - 1) {
      hx = 0.0, hy = ay;
    } else {
      const double theta = 0.5 * std::numbers::pi * k / (nk - 1);
      hx = ax * std::cos(theta), hy = ay * std::sin(theta);
    }
    if (k <= n_arc) {
      ox = L, oy = L * k / n_arc;
    } else {
      ox = L * (1.0 - static_cast<double>(k - n_arc) / n_arc), oy = L;
    }
    if (k == nk - 1) ox = 0.0;
    for (int j = 0; j < nj; ++j) {
      const double t = static_cast<double>(j) / n_rad;
      double x = (1.0 - t) * hx + t * ox;
      double y = (1.0 - t) * hy + t * oy;
      if (j == n_rad) x = ox, y = oy;
      m.vertices(0, vid(k, j)) = x;
      m.vertices(1, vid(k, j)) = y;
    }
  }

  const Index ntri = 2 * static_cast<Index>(nk - 1) * n_rad;
  m.triangles.resize(3, ntri);
  m.area.resize(ntri);
  m.centroids.resize(2, ntri);
  Index t = 0;
  auto add = [&](int a, int b, int c) {
    const double x0 = m.vertices(0, a), y0 = m.vertices(1, a);
    const double x1 = m.vertices(0, b), y1 = m.vertices(1, b);
    const double x2 = m.vertices(0, c), y2 = m.vertices(1, c);
    double ar = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
    if (ar < 0.0) std::swap(b, c), ar = -ar;
    if (!(ar > 1e-14 * L * L)) throw ConstructionError("degenerate triangle in plate mesh");
    m.triangles.col(t) << a, b, c;
    m.area(t) = ar;
    m.centroids(0, t) = (x0 + x1 + x2) / 3.0;
    m.centroids(1, t) = (y0 + y1 + y2) / 3.0;
    ++t;
  };
  for (int k = 0; k + 1 < nk; ++k) {
    for (int j = 0; j < n_rad; ++j) {
      add(vid(k, j), vid(k + 1, j), vid(k + 1, j + 1));
      add(vid(k, j), vid(k + 1, j + 1), vid(k, j + 1));
    }
  }

  for (int k = 0; k <= n_arc; ++k) m.traction_nodes.push_back(vid(k, n_rad));
  for (int j = 0; j < nj; ++j) {
    m.y0_nodes.push_back(vid(0, j));
    m.x0_nodes.push_back(vid(nk - 1, j));
  }
  for (int k = 0; k < nk; ++k) m.hole_nodes.push_back(vid(k, 0));
  return m;
}

double integrate_centroid(const TriMesh& mesh, const Array& values) {
  if (values.size() != mesh.point_count()) throw ShapeError("one value per triangle expected");
  return (mesh.area.array() * values).sum();
}

Eigen::RowVectorXd traction_weights(const TriMesh& mesh) {
  const auto& nodes = mesh.traction_nodes;
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(static_cast<Index>(nodes.size()));
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double h = mesh.vertices(1, nodes[i + 1]) - mesh.vertices(1, nodes[i]);
    w(static_cast<Index>(i)) += 0.5 * h;
    w(static_cast<Index>(i) + 1) += 0.5 * h;
  }
  return w;
}

MatrixXd traction_points(const TriMesh& mesh) {
  MatrixXd p(2, static_cast<Index>(mesh.traction_nodes.size()));
  for (std::size_t i = 0; i < mesh.traction_nodes.size(); ++i) {
    p.col(static_cast<Index>(i)) = mesh.vertices.col(mesh.traction_nodes[i]);
  }
  return p;
}

namespace {

void check_mesh(const PlateSpec& spec, const TriMesh& mesh) {
  if (mesh.point_count() == 0 || mesh.traction_nodes.size() < 2) {
    throw ContractError("plate mesh is empty");
  }
  for (int n : mesh.traction_nodes) {
    if (mesh.vertices(0, n) != spec.L) throw ContractError("mesh traction edge is not at x = L");
  }
  const double ax = hole_semi_x(spec), ay = hole_semi_y(spec);
  for (int n : mesh.hole_nodes) {
    const double x = mesh.vertices(0, n) / ax, y = mesh.vertices(1, n) / ay;
    if (std::abs(x * x + y * y - 1.0) > 1e-9) throw ContractError("mesh hole does not match the plate spec");
  }
}

}  // namespace

EnergyParts energy_plate(const Network& net, const PlateSpec& spec, const TriMesh& mesh) {
  check_mesh(spec, mesh);
  const Field f = admissible_plate(net, mesh.centroids, spec.L);
  const StressField s = stress_field(f, Array::Constant(f.exx.size(), spec.E), spec.nu);
  EnergyParts e;
  e.internal = integrate_centroid(mesh, 0.5 * (s.sxx * f.exx + s.syy * f.eyy + s.sxy * f.gxy));
  const MatrixXd tp = traction_points(mesh);
  const MatrixXd out = net.forward(tp / spec.L);
  const Array ux = tp.row(0).array() * out.row(0).array();
  e.external = -spec.traction * (traction_weights(mesh).array() * ux.transpose()).sum();
  return e;
}

}  // namespace pinntl::elasticity
