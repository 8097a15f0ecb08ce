#pragma once

#include <optional>
#include <vector>

#include "nsstab/helmholtz.hpp"

namespace nsstab {

struct EquilibriumPair {
  VelocityField y_e;
  PressureField pi_e;
  VelocityField force;
  double nu = 0.0;
  /// L2 norm of -nu lap y_e + (y_e . grad) y_e + grad pi_e - f.
  double residual = 0.0;
  int newton_steps = 0;
  std::vector<double> history;
};

/// Momentum residual of a candidate pair, recomputed from scratch.
double momentum_residual(const VelocityField& y, const PressureField& pi,
                         const VelocityField& force, double nu);

struct SteadyOptions {
  double tol = 1e-10;
  int max_iters = 50;
};

/// Newton's method on solenoidal coordinates with the exact Oseen Jacobian.
class SteadySolver {
 public:
  explicit SteadySolver(DiscretizationPtr disc);

  const Discretization& disc() const { return *disc_; }

  EquilibriumPair solve(const VelocityField& force, double nu,
                        const SteadyOptions& opt = {},
                        std::optional<Vec> initial = std::nullopt) const;

  /// Geometric sequence of viscosities from nu_start to nu_end with warm
  /// starts; steps == 1 solves at nu_end directly.
  EquilibriumPair continuation(const VelocityField& force, double nu_start,
                               double nu_end, int steps,
                               const SteadyOptions& opt = {}) const;

  /// Stokes fixed point: nu A_r c_{k+1} = B^T W (f - (y_k . grad) y_k).
  /// Slow but independent of the Newton path.
  Vec picard(const VelocityField& force, double nu, double tol,
             int max_iters) const;

  /// Pressure from the momentum balance, zero mean.
  PressureField recover_pressure(const VelocityField& y,
                                 const VelocityField& force, double nu) const;

 private:
  Vec residual(const Vec& c, const Vec& fc, double nu) const;

  DiscretizationPtr disc_;
};

}  // namespace nsstab
