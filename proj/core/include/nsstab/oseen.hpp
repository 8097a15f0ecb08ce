#pragma once

#include "nsstab/helmholtz.hpp"
#include "nsstab/steady.hpp"

namespace nsstab {

/// A_{o,r} = B^T W [(y . grad) b + (b . grad) y] B, the reduced linearized
/// advection about y.
Mat reduced_advection_jacobian(const Discretization& disc, const VelocityField& y);

/// Reduced generator M = -nu A_r - A_{o,r} + sigma I of the linearized
/// dynamics about an equilibrium. sigma >= 0 shifts the whole spectrum right.
struct OseenOperator {
  DiscretizationPtr disc;
  VelocityField y_e;
  double nu = 0.0;
  double sigma = 0.0;
  Mat advection;  // A_{o,r}
  Mat matrix;     // M
};

OseenOperator assemble_oseen(DiscretizationPtr disc, const EquilibriumPair& eq,
                             double sigma = 0.0);

/// Same generator with a different shift, reusing the assembled pieces.
OseenOperator with_shift(const OseenOperator& op, double sigma);

}  // namespace nsstab
