#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pinntl/autodiff/tape.hpp"
#include "pinntl/elasticity/elasticity.hpp"
#include "pinntl/elasticity/problems.hpp"
#include "pinntl/errors.hpp"
#include "pinntl/network/network.hpp"

using namespace pinntl;
using namespace pinntl::elasticity;
using std::numbers::pi;

namespace {

// Net whose output is the constant (c0, c1) everywhere.
Network constant_net(double c0, double c1) {
  Network net = Network::build({2, 8, 8, 2}, 0);
  for (auto& p : net.params()) p.value.setZero();
  net.bias(net.num_layers() - 1).value << c0, c1;
  return net;
}

Eigen::MatrixXd random_points(int n, double xmax, double ymax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, xmax), uy(0.0, ymax);
  Eigen::MatrixXd p(2, n);
  for (int j = 0; j < n; ++j) p(0, j) = ux(rng), p(1, j) = uy(rng);
  return p;
}

// Central differences of the admissible displacement, checked against the
// autodiff strains.
template <class Admissible>
void check_strains_by_fd(Admissible adm, double L, double xmax, double ymax) {
  Network net = Network::build({2, 20, 20, 2}, 4);
  const Eigen::MatrixXd p = random_points(20, xmax, ymax, 3);
  const Field f = adm(net, p, L);
  const double h = 1e-5;
  for (int j = 0; j < 20; ++j) {
    auto disp = [&](double dx, double dy) {
      Eigen::MatrixXd q = p.col(j);
      q(0) += dx;
      q(1) += dy;
      const Field g = adm(net, q, L);
      return std::pair{g.ux(0), g.uy(0)};
    };
    const auto [uxp, uyp] = disp(h, 0);
    const auto [uxm, uym] = disp(-h, 0);
    const auto [uxq, uyq] = disp(0, h);
    const auto [uxn, uyn] = disp(0, -h);
    const double exx = (uxp - uxm) / (2 * h), eyy = (uyq - uyn) / (2 * h);
    const double gxy = (uxq - uxn) / (2 * h) + (uyp - uym) / (2 * h);
    const double scale = std::max({1.0, std::abs(exx), std::abs(eyy), std::abs(gxy)});
    EXPECT_NEAR(f.exx(j), exx, 1e-6 * scale);
    EXPECT_NEAR(f.eyy(j), eyy, 1e-6 * scale);
    EXPECT_NEAR(f.gxy(j), gxy, 1e-6 * scale);
  }
}

// ∫x dA over the region bounded by the mesh boundary, by Green's theorem
// (½∮x² dy) along the boundary polygon.
double green_first_moment(const TriMesh& m, double L) {
  std::vector<Eigen::Vector2d> poly;
  const auto& hole = m.hole_nodes;
  poly.push_back(m.vertices.col(hole.front()));
  poly.emplace_back(L, 0.0);
  poly.emplace_back(L, L);
  poly.emplace_back(0.0, L);
  for (auto it = hole.rbegin(); it != hole.rend(); ++it) poly.push_back(m.vertices.col(*it));
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[i + 1];
    s += (q.y() - p.y()) * (p.x() * p.x() + p.x() * q.x() + q.x() * q.x()) / 3.0;
  }
  return 0.5 * s;
}

}  // namespace

TEST(Material, SymmetricProfile) {
  EXPECT_NEAR(material_at(Porosity::Symmetric, 0.0, 1.0, 200, 100, 1.0 / 3).E, 200.0, 1e-12);
  EXPECT_NEAR(material_at(Porosity::Symmetric, 1.0, 1.0, 200, 100, 1.0 / 3).E, 200.0, 1e-12);
  EXPECT_EQ(material_at(Porosity::Symmetric, 0.5, 1.0, 200, 100, 1.0 / 3).E, 100.0);
}

TEST(Material, AsymmetricProfile) {
  EXPECT_NEAR(material_at(Porosity::Asymmetric, 1.0, 1.0, 200, 100, 1.0 / 3).E, 200.0, 1e-12);
  EXPECT_EQ(material_at(Porosity::Asymmetric, 0.0, 1.0, 200, 100, 1.0 / 3).E, 100.0);
}

TEST(Material, LameFromEAndNu) {
  const Material m = material_at(Porosity::Symmetric, 0.0, 1.0, 200, 100, 1.0 / 3);
  EXPECT_NEAR(m.G, 75.0, 1e-12);
  EXPECT_NEAR(m.lambda, (1.0 / 3) * 200 / ((4.0 / 3) * (1.0 / 3)), 1e-10);
  EXPECT_NEAR(material_at(Porosity::Symmetric, 0.5, 1.0, 200, 100, 1.0 / 3).G, 37.5, 1e-12);
}

TEST(Material, BoundsAndDomain) {
  for (int k = 0; k <= 100; ++k) {
    for (auto kind : {Porosity::Symmetric, Porosity::Asymmetric}) {
      const double e = material_at(kind, k / 100.0, 1.0, 200, 100, 0.3).E;
      EXPECT_GE(e, 100.0 - 1e-12);
      EXPECT_LE(e, 200.0 + 1e-12);
    }
  }
  EXPECT_THROW(material_at(Porosity::Symmetric, -1e-9, 1.0, 200, 100, 0.3), DomainError);
  EXPECT_THROW(material_at(Porosity::Symmetric, 1.0 + 1e-9, 1.0, 200, 100, 0.3), DomainError);
}

TEST(PlaneStress, ZeroStrain) {
  const auto s = plane_stress_sigma({}, 200, 0.3);
  EXPECT_EQ(s.xx, 0.0);
  EXPECT_EQ(s.yy, 0.0);
  EXPECT_EQ(s.xy, 0.0);
  EXPECT_EQ(s.zz, 0.0);
}

TEST(PlaneStress, PureShear) {
  const double E = 200, nu = 0.3, G = E / (2 * (1 + nu));
  const auto s = plane_stress_sigma({0, 0, 0.01}, E, nu);
  EXPECT_NEAR(s.xy, 2 * G * 0.01, 1e-14);
  EXPECT_EQ(s.xx, 0.0);
  EXPECT_EQ(s.yy, 0.0);
}

TEST(PlaneStress, Uniaxial) {
  const double E = 1000, nu = 0.3, e = 2e-3;
  const auto s = plane_stress_sigma({e, 0, 0}, E, nu);
  EXPECT_NEAR(s.xx, E * e / (1 - nu * nu), 1e-12);
  EXPECT_NEAR(s.yy, nu * E * e / (1 - nu * nu), 1e-12);
}

TEST(PlaneStress, ReducesToMatrixLaw) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ue(50.0, 500.0), un(0.0, 0.45);
  for (int k = 0; k < 1000; ++k) {
    const Strain e{u(rng), u(rng), u(rng)};
    const double E = ue(rng), nu = un(rng), c = E / (1 - nu * nu);
    const auto s = plane_stress_sigma(e, E, nu);
    const double sc = std::max(1.0, c);
    EXPECT_NEAR(s.xx, c * (e.xx + nu * e.yy), 1e-12 * sc);
    EXPECT_NEAR(s.yy, c * (e.yy + nu * e.xx), 1e-12 * sc);
    EXPECT_NEAR(s.xy, c * (1 - nu) * e.xy, 1e-12 * sc);
  }
}

TEST(VonMises, Examples) {
  EXPECT_NEAR(von_mises({3.0, 0, 0, 0}), 3.0, 1e-15);
  EXPECT_NEAR(von_mises({-3.0, 0, 0, 0}), 3.0, 1e-15);
  EXPECT_NEAR(von_mises({0, 0, 2.0, 0}), std::sqrt(3.0) * 2.0, 1e-14);
  EXPECT_EQ(von_mises({}), 0.0);
}

TEST(VonMises, ArrayMatchesScalar) {
  Array sxx(3), syy(3), sxy(3);
  sxx << 1.0, -2.0, 0.5;
  syy << 0.3, 4.0, -1.0;
  sxy << 0.0, 1.5, 2.5;
  const Array m = von_mises(sxx, syy, sxy);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(m(i), von_mises({sxx(i), syy(i), sxy(i), 0.0}), 1e-14);
}

TEST(AdmissibleBeam, ClampedEnds) {
  Network net = Network::build({2, 30, 30, 2}, 9);
  Eigen::MatrixXd p(2, 40);
  for (int j = 0; j < 20; ++j) {
    p.col(j) << 0.0, j / 19.0;
    p.col(20 + j) << 4.0, j / 19.0;
  }
  const Field f = admissible_beam(net, p, 4.0);
  EXPECT_EQ(f.ux.abs().maxCoeff(), 0.0);
  EXPECT_EQ(f.uy.abs().maxCoeff(), 0.0);
}

TEST(AdmissibleBeam, ConstantNetAtMidspan) {
  Eigen::MatrixXd p(2, 1);
  p << 2.0, 0.3;
  const Field f = admissible_beam(constant_net(0.5, -2.0), p, 4.0);
  EXPECT_DOUBLE_EQ(f.ux(0), 0.5 * 16 / 4);
  EXPECT_DOUBLE_EQ(f.uy(0), -2.0 * 16 / 4);
}

TEST(AdmissibleBeam, StrainsMatchFiniteDifferences) {
  check_strains_by_fd([](const Network& n, const Eigen::MatrixXd& p, double L) { return admissible_beam(n, p, L); },
                      4.0, 4.0, 1.0);
}

TEST(AdmissibleBeam, TapedMatchesPlain) {
  Network net = Network::build({2, 16, 16, 2}, 2);
  const Eigen::MatrixXd p = random_points(30, 4.0, 1.0, 8);
  ad::Tape tape;
  auto bound = net.bind(tape);
  const FieldVars v = admissible_beam(net, tape, bound, p, 4.0);
  const Field f = admissible_beam(net, p, 4.0);
  EXPECT_LE((v.uy.value().row(0).transpose().array() - f.uy).abs().maxCoeff(), 1e-14);
  EXPECT_LE((v.gxy.value().row(0).transpose().array() - f.gxy).abs().maxCoeff(), 1e-13);
}

TEST(AdmissiblePlate, SymmetryPlanes) {
  Network net = Network::build({2, 30, 30, 2}, 10);
  Eigen::MatrixXd p(2, 40);
  for (int j = 0; j < 20; ++j) {
    p.col(j) << 0.0, 5.0 + 15.0 * j / 19.0;
    p.col(20 + j) << 5.0 + 15.0 * j / 19.0, 0.0;
  }
  const Field f = admissible_plate(net, p, 20.0);
  EXPECT_EQ(f.ux.head(20).abs().maxCoeff(), 0.0);
  EXPECT_EQ(f.uy.tail(20).abs().maxCoeff(), 0.0);
}

TEST(AdmissiblePlate, ConstantNetAtCorner) {
  Eigen::MatrixXd p(2, 1);
  p << 20.0, 20.0;
  const Field f = admissible_plate(constant_net(0.25, -0.75), p, 20.0);
  EXPECT_DOUBLE_EQ(f.ux(0), 5.0);
  EXPECT_DOUBLE_EQ(f.uy(0), -15.0);
}

TEST(AdmissiblePlate, StrainsMatchFiniteDifferences) {
  check_strains_by_fd([](const Network& n, const Eigen::MatrixXd& p, double L) { return admissible_plate(n, p, L); },
                      20.0, 20.0, 20.0);
}

TEST(BeamGrid, DeskAndFullSizes) {
  BeamSpec s;
  const Grid g = beam_grid(s);
  EXPECT_EQ(g.nx, 101);
  EXPECT_EQ(g.ny, 26);
  s.grid_divisor = 1;
  const Grid full = beam_grid(s);
  EXPECT_EQ(full.nx, 401);
  EXPECT_EQ(full.ny, 101);
  s.grid_divisor = 3;
  EXPECT_THROW(validate(s), Error);
}

TEST(BeamGrid, TrapezoidExactForBilinear) {
  const Grid g = beam_grid(BeamSpec{});
  const Array x = g.points.row(0).transpose().array(), y = g.points.row(1).transpose().array();
  const Array f = 1.5 - 0.5 * x + 2.0 * y + 0.75 * x * y;
  const double exact = 1.5 * 4 - 0.5 * 8 + 2.0 * 4 * 0.5 + 0.75 * 8 * 0.5;
  EXPECT_NEAR((g.weights.array() * f).sum(), exact, 1e-12);
}

TEST(BeamEnergy, ZeroNet) {
  const EnergyParts e = energy_beam(constant_net(0, 0), BeamSpec{});
  EXPECT_EQ(e.internal, 0.0);
  EXPECT_EQ(e.external, 0.0);
}

TEST(BeamEnergy, ManufacturedQuadratic) {
  // u_y = x(L − x), u_x = 0 with E constant: γ_xy = L − 2x. The trapezoid
  // rule carries a known h² term for these quadratics.
  BeamSpec s;
  s.e_min = s.e_max = 150.0;
  const double L = s.L, H = s.H, h = 0.01 * s.grid_divisor, G = 150.0 / (2 * (1 + s.nu));
  const double internal = 0.5 * G * H * (L * L * L / 3 + 2 * L * h * h / 3);
  const double external = s.f * (L * L * L / 6 - L * h * h / 6);
  const EnergyParts e = energy_beam(constant_net(0.0, 1.0), s);
  EXPECT_NEAR(e.internal, internal, 1e-10 * internal);
  EXPECT_NEAR(e.external, external, 1e-10 * external);
}

TEST(BeamEnergy, PositiveWithoutLoad) {
  BeamSpec s;
  s.f = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const EnergyParts e = energy_beam(Network::build({2, 20, 20, 2}, seed), s);
    EXPECT_EQ(e.external, 0.0);
    EXPECT_GT(e.internal, 0.0);
  }
}

TEST(BeamEnergy, TapedLossMatchesPlainEnergy) {
  BeamSpec s;
  s.porosity = Porosity::Asymmetric;
  const BeamProblem p(s);
  Network net = Network::build(p.default_layer_sizes(), 6);
  ad::Tape tape;
  auto bound = net.bind(tape);
  const LossGraph g = p.record_loss(net, tape, bound);
  const EnergyParts e = energy_beam(net, s);
  ASSERT_EQ(g.components.size(), 2u);
  EXPECT_NEAR(g.components[0].second.value()(0, 0), e.internal, 1e-12 * std::abs(e.internal));
  EXPECT_NEAR(g.components[1].second.value()(0, 0), e.external, 1e-12 * std::abs(e.external));
  EXPECT_NEAR(g.total.value()(0, 0), e.total(), 1e-12 * std::abs(e.internal));
}

TEST(BeamProblem, ZeroNetHasUnitErrors) {
  const BeamProblem p(BeamSpec{});
  const auto e = p.evaluate(constant_net(0, 0));
  EXPECT_EQ(e.rel_l2, 1.0);
  EXPECT_EQ(e.rel_h1, 1.0);
}

TEST(PlateMesh, AreaAtFineDensity) {
  for (auto hole : {Hole::Circle, Hole::Ellipse}) {
    PlateSpec s;
    s.hole = hole;
    const TriMesh m = build_mesh(s, 72000);
    EXPECT_GE(m.point_count(), 70000);
    const double area = integrate_centroid(m, Array::Ones(m.point_count()));
    EXPECT_LE(std::abs(area - analytic_area(s)) / analytic_area(s), 0.002) << hole_name(hole);
  }
}

TEST(PlateMesh, AnalyticAreas) {
  PlateSpec s;
  EXPECT_NEAR(analytic_area(s), 400 - 25 * pi / 4, 1e-12);
  s.hole = Hole::Ellipse;
  EXPECT_NEAR(analytic_area(s), 400 - pi * 50 / 4, 1e-12);
}

TEST(PlateMesh, ValidTriangulation) {
  for (auto hole : {Hole::Circle, Hole::Ellipse}) {
    PlateSpec s;
    s.hole = hole;
    const TriMesh m = build_mesh(s, 8192);
    EXPECT_GT(m.area.minCoeff(), 0.0);
    const double ax = hole_semi_x(s), ay = hole_semi_y(s);
    for (Index v = 0; v < m.vertices.cols(); ++v) {
      const double x = m.vertices(0, v), y = m.vertices(1, v);
      EXPECT_GE(x * x / (ax * ax) + y * y / (ay * ay), 1.0 - 1e-12) << v;
      EXPECT_GE(x, 0.0);
      EXPECT_GE(y, 0.0);
      EXPECT_LE(x, s.L);
      EXPECT_LE(y, s.L);
    }
    for (int n : m.traction_nodes) EXPECT_EQ(m.vertices(0, n), s.L);
    for (int n : m.x0_nodes) EXPECT_EQ(m.vertices(0, n), 0.0);
    for (int n : m.y0_nodes) EXPECT_EQ(m.vertices(1, n), 0.0);
    // The triangles tile the polygon: total area equals the shoelace area.
    const double shoelace = s.L * s.L - [&] {
      double cut = 0.0;  // quarter-hole polygon (origin plus the arc nodes)
      const auto& h = m.hole_nodes;
      for (std::size_t i = 0; i + 1 < h.size(); ++i) {
        const auto p = m.vertices.col(h[i]), q = m.vertices.col(h[i + 1]);
        cut += 0.5 * (p.x() * q.y() - q.x() * p.y());
      }
      return cut;
    }();
    EXPECT_NEAR(m.area.sum(), shoelace, 1e-10 * shoelace);
  }
}

TEST(PlateMesh, PointCountTracksTarget) {
  for (int target : {500, 8192, 30000}) {
    const TriMesh m = build_mesh(PlateSpec{}, target);
    EXPECT_NEAR(static_cast<double>(m.point_count()), target, 0.1 * target) << target;
  }
  EXPECT_THROW(build_mesh(PlateSpec{}, 3), ConstructionError);
}

TEST(PlateMesh, CentroidRuleExactForLinearFields) {
  PlateSpec s;
  s.hole = Hole::Ellipse;
  const TriMesh m = build_mesh(s, 4000);
  const Array x = m.centroids.row(0).transpose().array();
  const double oracle = green_first_moment(m, s.L);
  EXPECT_NEAR(integrate_centroid(m, x), oracle, 1e-12 * oracle);
  const Array lin = 2.0 - 0.1 * x;
  EXPECT_NEAR(integrate_centroid(m, lin), 2.0 * m.area.sum() - 0.1 * oracle, 1e-12 * m.area.sum());
}

TEST(PlateMesh, TractionWeightsSumToSide) {
  const TriMesh m = build_mesh(PlateSpec{}, 8192);
  EXPECT_NEAR(traction_weights(m).sum(), 20.0, 1e-12);
}

TEST(PlateEnergy, ZeroNetAndMismatch) {
  PlateSpec s;
  const TriMesh m = build_mesh(s, 2000);
  const EnergyParts e = energy_plate(constant_net(0, 0), s, m);
  EXPECT_EQ(e.internal, 0.0);
  EXPECT_EQ(e.external, 0.0);
  PlateSpec other = s;
  other.hole = Hole::Ellipse;
  EXPECT_THROW(energy_plate(constant_net(0, 0), other, m), ContractError);
}

TEST(PlateEnergy, UniformStretchClosedForm) {
  // NN ≡ (c, 0): u_x = c·x, so ε_xx = c everywhere and σ_xx = E c/(1−ν²).
  PlateSpec s;
  const TriMesh m = build_mesh(s, 3000);
  const double c = 1e-3;
  const EnergyParts e = energy_plate(constant_net(c, 0.0), s, m);
  const double area = m.area.sum();
  EXPECT_NEAR(e.internal, 0.5 * s.E * c * c / (1 - s.nu * s.nu) * area, 1e-12 * e.internal);
  EXPECT_NEAR(e.external, -s.traction * s.L * c * s.L, 1e-10 * std::abs(e.external));
}

TEST(PlateEnergy, TapedLossMatchesPlainEnergy) {
  PlateSpec s;
  s.mesh_points = 2000;
  const PlateProblem p(s);
  Network net = Network::build(p.default_layer_sizes(), 3);
  ad::Tape tape;
  auto bound = net.bind(tape);
  const LossGraph g = p.record_loss(net, tape, bound);
  const EnergyParts e = energy_plate(net, s, p.mesh());
  EXPECT_NEAR(g.total.value()(0, 0), e.total(), 1e-11 * (std::abs(e.internal) + std::abs(e.external)));
}

TEST(PlateProblem, BoundaryDiagnosticsAreExact) {
  PlateSpec s;
  s.mesh_points = 2000;
  const PlateProblem p(s);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto e = p.evaluate(Network::build(p.default_layer_sizes(), seed));
    for (const auto& [name, v] : e.extra) {
      if (name == "bc_ux_x0" || name == "bc_uy_y0") {
        EXPECT_LE(v, 1e-14) << name;
      }
    }
  }
}
