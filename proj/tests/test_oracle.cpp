#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "pinntl/elasticity/elasticity.hpp"
#include "pinntl/errors.hpp"
#include "pinntl/oracle/beam_fd.hpp"

using namespace pinntl;
using elasticity::BeamSpec;
using elasticity::Porosity;

namespace {

double max_deflection(const oracle::FdSolution& s) { return s.uy.abs().maxCoeff(); }

}  // namespace

TEST(BeamFd, ZeroLoadGivesZeroDisplacement) {
  BeamSpec s;
  s.f = 0.0;
  const auto sol = oracle::solve_beam_fd(s, 4);
  EXPECT_EQ(sol.ux.abs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.uy.abs().maxCoeff(), 0.0);
}

TEST(BeamFd, ClampedEndsAndConvergedResidual) {
  const auto sol = oracle::solve_beam_fd(BeamSpec{}, 4);
  const auto& g = sol.grid;
  for (int j = 0; j < g.ny; ++j) {
    for (int i : {0, g.nx - 1}) {
      EXPECT_EQ(sol.ux(g.node(i, j)), 0.0);
      EXPECT_EQ(sol.uy(g.node(i, j)), 0.0);
    }
  }
  EXPECT_LE(sol.residual, 1e-8);
  EXPECT_GT(sol.iterations, 0);
}

TEST(BeamFd, DeflectsDownward) {
  const auto sol = oracle::solve_beam_fd(BeamSpec{}, 4);
  const auto& g = sol.grid;
  EXPECT_LT(sol.uy(g.node(g.nx / 2, g.ny - 1)), 0.0);
}

TEST(BeamFd, SymmetricPorosityGivesMirrorSymmetry) {
  const auto sol = oracle::solve_beam_fd(BeamSpec{}, 4);
  const auto& g = sol.grid;
  double diff = 0.0, norm = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double a = sol.uy(g.node(i, j)), b = sol.uy(g.node(g.nx - 1 - i, j));
      diff += (a - b) * (a - b);
      norm += a * a;
    }
  }
  EXPECT_LE(std::sqrt(diff / norm), 1e-6);
}

TEST(BeamFd, GridRefinementChangesPeakDeflectionLittle) {
  const double coarse = max_deflection(oracle::solve_beam_fd(BeamSpec{}, 4));
  const double fine = max_deflection(oracle::solve_beam_fd(BeamSpec{}, 2));
  EXPECT_LE(std::abs(coarse - fine) / fine, 0.02);
}

TEST(BeamFd, SofterCoreDeflectsMore) {
  BeamSpec stiff, soft;
  stiff.e_min = 150.0;
  soft.e_min = 80.0;
  EXPECT_GT(max_deflection(oracle::solve_beam_fd(soft, 4)), max_deflection(oracle::solve_beam_fd(stiff, 4)));
}

TEST(BeamFd, HomogeneousBeamNearTimoshenko) {
  // Clamped-clamped beam under uniform load q: δ = qL⁴/(384EI) + qL²/(8κGA).
  // The 2D body has extra end compliance, so only rough agreement is expected.
  BeamSpec s;
  s.e_min = s.e_max = 200.0;
  const double E = 200.0, G = E / (2 * (1 + s.nu)), I = s.H * s.H * s.H / 12, A = s.H;
  const double beam = s.f * std::pow(s.L, 4) / (384 * E * I) + s.f * s.L * s.L / (8 * (5.0 / 6) * G * A);
  const auto sol = oracle::solve_beam_fd(s, 2);
  const auto& g = sol.grid;
  const double mid = -sol.uy(g.node(g.nx / 2, g.ny / 2));
  EXPECT_NEAR(mid / beam, 1.0, 0.15) << "fd " << mid << " beam theory " << beam;
}

TEST(BeamFd, AsymmetricBeamIsNotMirrorSymmetricInY) {
  BeamSpec s;
  s.porosity = Porosity::Asymmetric;
  const auto sol = oracle::solve_beam_fd(s, 4);
  const auto& g = sol.grid;
  // Stiffer top: the bottom fibre at midspan stretches more than the top shortens.
  EXPECT_NE(std::abs(sol.ux(g.node(g.nx / 4, 0))), std::abs(sol.ux(g.node(g.nx / 4, g.ny - 1))));
}

TEST(BeamFd, MisesIsNonNegativeAndPeaksAtClamps) {
  const auto sol = oracle::solve_beam_fd(BeamSpec{}, 4);
  EXPECT_GE(sol.mises.minCoeff(), 0.0);
  Eigen::Index k;
  sol.mises.maxCoeff(&k);
  const double x = sol.grid.points(0, k);
  EXPECT_TRUE(x < 0.5 || x > 3.5) << "peak at x = " << x;
}

TEST(BeamFd, RejectsBadDivisor) {
  EXPECT_THROW(oracle::solve_beam_fd(BeamSpec{}, 0), Error);
  EXPECT_THROW(oracle::solve_beam_fd(BeamSpec{}, 3), Error);
}

TEST(BeamFd, FieldCsvRoundtrip) {
  const auto sol = oracle::solve_beam_fd(BeamSpec{}, 4);
  const auto path = std::filesystem::temp_directory_path() / ("pinntl_fd_" + std::to_string(::getpid()) + ".csv");
  oracle::write_field_csv(path.string(), sol.grid.points, sol.ux, sol.uy, sol.mises);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,u_x,u_y,mises");
  int rows = 0;
  double x, y, ux, uy, m;
  char c;
  while (in >> x >> c >> y >> c >> ux >> c >> uy >> c >> m) {
    EXPECT_EQ(uy, sol.uy(rows));
    EXPECT_EQ(m, sol.mises(rows));
    ++rows;
  }
  EXPECT_EQ(rows, sol.grid.nx * sol.grid.ny);
  std::filesystem::remove(path);
}
