#pragma once

// Discrete Leray projection and the solenoidal coordinate system.
//
// The projection used for every exponent q is the L2-orthogonal one: on a
// fixed grid all norms are equivalent, and q only enters through the
// measurement norms in norms.hpp.

#include <filesystem>
#include <memory>

#include <Eigen/SparseCholesky>

#include "nsstab/grid.hpp"

namespace nsstab {

class LerayProjector {
 public:
  explicit LerayProjector(const Grid& grid);

  const Grid& grid() const { return grid_; }

  /// f - grad(phi) with div grad phi = div f and mean(phi) = 0.
  VelocityField project(const VelocityField& f) const;

  /// The potential phi of the gradient part of f (zero mean).
  PressureField potential(const VelocityField& f) const;

  /// Solves div grad phi = rhs for a compatible (zero-sum) right-hand side.
  /// The result has zero mean.
  PressureField solve_poisson(const PressureField& rhs) const;

 private:
  using Solver = Eigen::SimplicialLDLT<SpMat>;

  Grid grid_;
  SpMat div_;
  SpMat grad_;
  std::shared_ptr<const Solver> solver_;
};

/// Columns are L2-orthonormal, discretely divergence-free fields spanning
/// the range of the projection. Built from the discrete curl of a
/// streamfunction on interior nodes, which spans the kernel of the
/// divergence on a simply connected rectangle.
class SolenoidalBasis {
 public:
  static SolenoidalBasis build(const Grid& grid);

  SolenoidalBasis(const Grid& grid, Mat columns);

  const Grid& grid() const { return grid_; }
  /// Flat-velocity-vector x n_dof. Boundary-normal rows are zero.
  const Mat& matrix() const { return basis_; }
  Index n_dof() const { return basis_.cols(); }

  VelocityField field(const Vec& coords) const;
  /// L2 coordinates B^T W f; equals the coordinates of P f.
  Vec coordinates(const VelocityField& f) const;
  Vec coordinates(const Vec& flat) const;

  /// L2 Gram matrix B^T W B (identity up to roundoff).
  Mat gram() const;

  /// B^T W op B for an operator on the flat velocity vector.
  Mat reduce(const SpMat& op) const;

  void save(const std::filesystem::path& path) const;
  /// The container stores only nx and ny; the caller supplies the lengths.
  static SolenoidalBasis load(const std::filesystem::path& path,
                              const Grid& grid);

 private:
  Grid grid_;
  Mat basis_;
};

/// -P(laplacian f). Rejects inputs whose divergence exceeds tolerance.
VelocityField stokes_apply(const LerayProjector& proj, const VelocityField& f);

/// Reduced Stokes matrix A_r = B^T W (-laplacian) B. Symmetric positive
/// definite.
Mat reduced_stokes(const SolenoidalBasis& basis);

/// Everything derived from a grid alone: projector, basis and reduced Stokes
/// matrix. Immutable; shared by the downstream solvers.
struct Discretization {
  Grid grid;
  SolenoidalBasis basis;
  LerayProjector projector;
  Mat stokes;

  static std::shared_ptr<const Discretization> create(const Grid& grid);
};

using DiscretizationPtr = std::shared_ptr<const Discretization>;

}  // namespace nsstab
