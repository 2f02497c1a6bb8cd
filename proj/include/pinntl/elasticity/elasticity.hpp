#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "pinntl/autodiff/tape.hpp"
#include "pinntl/network/network.hpp"

namespace pinntl::elasticity {

using Array = Eigen::ArrayXd;

enum class Porosity { Symmetric, Asymmetric };

const char* porosity_name(Porosity p) noexcept;

/// Functionally graded clamped-clamped beam on [0, L] x [0, H] with a
/// downward load `f` per unit length on the top edge.
struct BeamSpec {
  double L = 4.0;
  double H = 1.0;
  double e_max = 200.0;
  double e_min = 100.0;
  double nu = 1.0 / 3.0;
  double f = 1.0;
  Porosity porosity = Porosity::Symmetric;
  // Base spacing 0.01 (401 x 101 nodes); divisor d coarsens it to 0.01·d.
  int grid_divisor = 4;

  bool operator==(const BeamSpec&) const = default;
};

void validate(const BeamSpec& spec);

struct Material {
  double E = 0.0;
  double G = 0.0;
  double lambda = 0.0;
};

/// E from the porosity profile, G and λ from E and ν. Throws DomainError
/// for y outside [0, H].
Material material_at(Porosity kind, double y, double H, double e_max, double e_min, double nu);

/// Tensor strain components (ε_xy, not the engineering shear).
struct Strain {
  double xx = 0.0, yy = 0.0, xy = 0.0;
};

struct StressState {
  double xx = 0.0, yy = 0.0, xy = 0.0, zz = 0.0;
};

/// σ = 2Gε + λ tr(ε) I with ε_zz = −ν/(1−ν)(ε_xx + ε_yy) folded into the trace.
StressState plane_stress_sigma(const Strain& eps, double E, double nu);

/// 3D deviatoric Mises invariant with σ_zz taken from the state (zero for plane stress).
double von_mises(const StressState& s);
Array von_mises(const Array& sxx, const Array& syy, const Array& sxy);

/// Uniform node grid, x index fastest: node (i, j) is column j * nx + i.
struct Grid {
  int nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;
  Eigen::MatrixXd points;  // 2 x nx*ny
  Eigen::VectorXd weights;  // tensor trapezoid weights

  Eigen::Index node(int i, int j) const { return static_cast<Eigen::Index>(j) * nx + i; }
};

Grid beam_grid(const BeamSpec& spec);

/// Displacements and strains of an admissible field on a tape. `gxy` is the
/// engineering shear ∂u_x/∂y + ∂u_y/∂x.
struct FieldVars {
  ad::Var ux, uy, exx, eyy, gxy;
};

struct Field {
  Array ux, uy, exx, eyy, gxy;
};

/// u = NN(x, y)·x(L − x): clamped at x = 0 and x = L.
FieldVars admissible_beam(const Network& net, ad::Tape& tape, std::span<const ad::Var> bound,
                          const Eigen::MatrixXd& points, double L);
Field admissible_beam(const Network& net, const Eigen::MatrixXd& points, double L);

/// u_x = x·NN₁(x/L, y/L), u_y = y·NN₂(x/L, y/L): symmetry planes x = 0 and y = 0.
FieldVars admissible_plate(const Network& net, ad::Tape& tape, std::span<const ad::Var> bound,
                           const Eigen::MatrixXd& points, double L);
Field admissible_plate(const Network& net, const Eigen::MatrixXd& points, double L);

/// Plane-stress stresses of a strain field with pointwise moduli.
struct StressField {
  Array sxx, syy, sxy, mises;
};
StressField stress_field(const Field& f, const Array& E, double nu);

/// Pointwise E along the columns of `points` (only y matters).
Array beam_modulus(const BeamSpec& spec, const Eigen::MatrixXd& points);

/// Internal energy Σ w·½σ:ε recorded on the tape, with per-point modulus.
ad::Var record_strain_energy(const FieldVars& f, const Array& weight_times_E, double nu);

struct EnergyParts {
  double internal = 0.0;
  double external = 0.0;  // minus the work of the applied load
  double total() const { return internal + external; }
};

/// Trapezoid weights along the top row scaled by f, zero elsewhere (1 x nodes).
Eigen::MatrixXd top_load_weights(const Grid& g, double f);

/// Potential energy of the admissible beam field: trapezoid over the grid,
/// load work by the 1D trapezoid along y = H.
EnergyParts energy_beam(const Network& net, const BeamSpec& spec);

enum class Hole { Circle, Ellipse };

const char* hole_name(Hole h) noexcept;

/// Quarter of a square plate with a centred hole, loaded by a uniform
/// outward traction on x = L.
struct PlateSpec {
  double L = 20.0;
  double E = 1000.0;
  double nu = 0.3;
  double traction = 100.0;
  Hole hole = Hole::Circle;
  double r = 5.0;
  double a = 10.0;  // ellipse semi-axis along x
  double b = 5.0;   // ellipse semi-axis along y
  int mesh_points = 8192;

  bool operator==(const PlateSpec&) const = default;
};

void validate(const PlateSpec& spec);
double hole_semi_x(const PlateSpec& spec);
double hole_semi_y(const PlateSpec& spec);
/// L² minus the quarter hole.
double analytic_area(const PlateSpec& spec);

/// Two structured blocks between the hole arc and the outer edges, each
/// quad split into two triangles. Integration points are the centroids.
struct TriMesh {
  Eigen::MatrixXd vertices;                             // 2 x nv
  Eigen::Matrix<int, 3, Eigen::Dynamic> triangles;      // vertex indices
  Eigen::VectorXd area;
  Eigen::MatrixXd centroids;                            // 2 x nt
  int n_arc = 0;     // cells along the hole arc per block
  int n_radial = 0;  // cells from the hole to the outer edge
  std::vector<int> traction_nodes;  // on x = L, sorted by y
  std::vector<int> x0_nodes, y0_nodes, hole_nodes;

  Eigen::Index point_count() const { return triangles.cols(); }
};

TriMesh build_mesh(const PlateSpec& spec, int target_point_count);

/// Σ area·g(centroid).
double integrate_centroid(const TriMesh& mesh, const Array& values_at_centroids);

/// Vertices on x = L and their trapezoid weights along y.
Eigen::MatrixXd traction_points(const TriMesh& mesh);
Eigen::RowVectorXd traction_weights(const TriMesh& mesh);

/// Internal energy by the centroid rule, traction work by the trapezoid on x = L.
EnergyParts energy_plate(const Network& net, const PlateSpec& spec, const TriMesh& mesh);

}  // namespace pinntl::elasticity
