#pragma once

#include <string>

#include "pinntl/elasticity/elasticity.hpp"
#include "pinntl/oracle/beam_fd.hpp"
#include "pinntl/training/problem.hpp"

namespace pinntl::elasticity {

/// Energy-form beam. The loss is the potential energy on the node grid; the
/// reference is the bilinear-cell solution on the same grid.
class BeamProblem : public Problem {
 public:
  explicit BeamProblem(BeamSpec spec);

  Family family() const override { return Family::Beam; }
  std::string tag() const override;
  std::vector<int> default_layer_sizes() const override { return {2, 100, 100, 100, 100, 2}; }
  LossGraph record_loss(const Network& net, ad::Tape& tape,
                        std::span<const ad::Var> bound) const override;
  /// rel_l2 of u_y and rel_h1 (Mises) against the reference; extras
  /// ux_rel_l2, uy_asymmetry (mirror about x = L/2) and energy.
  Evaluation evaluate(const Network& net) const override;

  void write_fields(const Network& net, const std::string& path) const;

  const BeamSpec& spec() const noexcept { return spec_; }
  const Grid& grid() const noexcept { return grid_; }
  const oracle::FdSolution& reference() const noexcept { return ref_; }

 private:
  BeamSpec spec_;
  Grid grid_;
  Array modulus_;
  oracle::FdSolution ref_;
};

/// Energy-form quarter plate with a hole. No displacement reference exists;
/// evaluation reports energy, boundary checks and the Mises peak.
class PlateProblem : public Problem {
 public:
  explicit PlateProblem(PlateSpec spec);

  Family family() const override { return Family::Plate; }
  std::string tag() const override;
  std::vector<int> default_layer_sizes() const override { return {2, 100, 100, 100, 100, 2}; }
  LossGraph record_loss(const Network& net, ad::Tape& tape,
                        std::span<const ad::Var> bound) const override;
  /// Extras: energy, bc_ux_x0 and bc_uy_y0 (max |u| on the symmetry
  /// planes), mises_max, mises_peak_x, mises_peak_y and mises_peak_cells
  /// (distance of the peak from the hole edge on x = 0, in radial cells).
  Evaluation evaluate(const Network& net) const override;

  void write_fields(const Network& net, const std::string& path) const;

  const PlateSpec& spec() const noexcept { return spec_; }
  const TriMesh& mesh() const noexcept { return mesh_; }

 private:
  PlateSpec spec_;
  TriMesh mesh_;
};

}  // namespace pinntl::elasticity
