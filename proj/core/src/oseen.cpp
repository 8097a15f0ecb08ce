#include "nsstab/oseen.hpp"

#include "nsstab/errors.hpp"

namespace nsstab {

Mat reduced_advection_jacobian(const Discretization& disc, const VelocityField& y) {
  if (y.grid() != disc.grid) throw InputError("advection jacobian: grid mismatch");
  const Mat& b = disc.basis.matrix();
  Mat applied(b.rows(), b.cols());
  for (Index k = 0; k < b.cols(); ++k) {
    const VelocityField col(disc.grid, b.col(k));
    applied.col(k) = advection(y, col).data() + advection(col, y).data();
  }
  return b.transpose() * applied * disc.grid.cell_area();
}

OseenOperator assemble_oseen(DiscretizationPtr disc, const EquilibriumPair& eq,
                             double sigma) {
  if (eq.y_e.grid() != disc->grid) {
    throw InputError("equilibrium and basis live on different grids");
  }
  if (!(sigma >= 0.0)) throw InputError("spectral shift must be >= 0");
  OseenOperator op{disc, eq.y_e, eq.nu, sigma, {}, {}};
  op.advection = reduced_advection_jacobian(*disc, eq.y_e);
  op.matrix = -eq.nu * disc->stokes - op.advection;
  op.matrix.diagonal().array() += sigma;
  if (!op.matrix.allFinite()) throw SolverError("Oseen matrix has non-finite entries");
  return op;
}

OseenOperator with_shift(const OseenOperator& op, double sigma) {
  if (!(sigma >= 0.0)) throw InputError("spectral shift must be >= 0");
  OseenOperator out = op;
  out.matrix = -op.nu * op.disc->stokes - op.advection;
  out.matrix.diagonal().array() += sigma;
  out.sigma = sigma;
  return out;
}

}  // namespace nsstab
