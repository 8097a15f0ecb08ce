#include "nsstab/steady.hpp"

#include <cmath>
#include <sstream>

#include "nsstab/errors.hpp"
#include "nsstab/oseen.hpp"

namespace nsstab {

double momentum_residual(const VelocityField& y, const PressureField& pi,
                         const VelocityField& force, double nu) {
  VelocityField r = advection(y, y);
  r -= nu * laplacian(y);
  r += gradient(pi);
  r -= force;
  return std::sqrt(l2_dot(r, r));
}

SteadySolver::SteadySolver(DiscretizationPtr disc) : disc_(std::move(disc)) {}

Vec SteadySolver::residual(const Vec& c, const Vec& fc, double nu) const {
  const VelocityField y = disc_->basis.field(c);
  return nu * (disc_->stokes * c) + disc_->basis.coordinates(advection(y, y)) - fc;
}

PressureField SteadySolver::recover_pressure(const VelocityField& y,
                                             const VelocityField& force,
                                             double nu) const {
  VelocityField rhs = force;
  rhs += nu * laplacian(y);
  rhs -= advection(y, y);
  return disc_->projector.potential(rhs);
}

EquilibriumPair SteadySolver::solve(const VelocityField& force, double nu,
                                    const SteadyOptions& opt,
                                    std::optional<Vec> initial) const {
  if (!(nu > 0.0)) throw InputError("viscosity must be positive");
  if (force.grid() != disc_->grid) throw InputError("force: grid mismatch");
  if (!force.is_finite()) throw InputError("force has non-finite entries");

  const SolenoidalBasis& basis = disc_->basis;
  const Vec fc = basis.coordinates(force);
  Vec c = initial ? *initial : Vec::Zero(basis.n_dof());
  if (c.size() != basis.n_dof()) throw InputError("initial guess has wrong size");

  std::vector<double> history;
  Vec r = residual(c, fc, nu);
  double rn = r.norm();
  history.push_back(rn);
  int steps = 0;
  while (rn > opt.tol) {
    if (steps >= opt.max_iters) {
      std::ostringstream msg;
      msg << "Newton did not converge in " << opt.max_iters
          << " iterations (residual " << rn << ", nu " << nu << ")";
      throw NewtonDivergence(msg.str(), c, history);
    }
    const VelocityField y = basis.field(c);
    const Mat jac = nu * disc_->stokes + reduced_advection_jacobian(*disc_, y);
    Eigen::PartialPivLU<Mat> lu(jac);
    if (!(lu.rcond() > 1e-14)) {
      throw NewtonDivergence(
          "singular Oseen Jacobian; try continuation from a larger viscosity",
          c, history);
    }
    const Vec delta = lu.solve(-r);

    // Backtracking on the residual norm.
    double step = 1.0;
    Vec trial = c + delta;
    Vec rt = residual(trial, fc, nu);
    while (rt.norm() > (1.0 - 1e-4 * step) * rn && step > 1.0 / 64) {
      step *= 0.5;
      trial = c + step * delta;
      rt = residual(trial, fc, nu);
    }
    c = std::move(trial);
    r = std::move(rt);
    rn = r.norm();
    history.push_back(rn);
    ++steps;
    if (!std::isfinite(rn)) {
      throw NewtonDivergence("Newton iterate became non-finite", c, history);
    }
  }

  VelocityField y = basis.field(c);
  PressureField pi = recover_pressure(y, force, nu);
  const double res = momentum_residual(y, pi, force, nu);
  return EquilibriumPair{std::move(y), std::move(pi), force, nu, res, steps,
                         std::move(history)};
}

EquilibriumPair SteadySolver::continuation(const VelocityField& force,
                                           double nu_start, double nu_end,
                                           int steps,
                                           const SteadyOptions& opt) const {
  if (!(nu_end > 0.0) || nu_start < nu_end) {
    throw InputError("continuation needs nu_start >= nu_end > 0");
  }
  if (steps < 1) throw InputError("continuation needs at least one step");
  if (steps == 1) return solve(force, nu_end, opt);

  std::optional<Vec> warm;
  std::optional<EquilibriumPair> eq;
  for (int k = 0; k < steps; ++k) {
    const double nu =
        k + 1 == steps
            ? nu_end
            : nu_start * std::pow(nu_end / nu_start, double(k) / (steps - 1));
    try {
      eq = solve(force, nu, opt, warm);
    } catch (const NewtonDivergence& e) {
      std::ostringstream msg;
      msg << "continuation failed at nu = " << nu << ": " << e.what();
      throw NewtonDivergence(msg.str(), e.last_iterate(), e.history());
    }
    warm = disc_->basis.coordinates(eq->y_e);
  }
  return std::move(*eq);
}

Vec SteadySolver::picard(const VelocityField& force, double nu, double tol,
                         int max_iters) const {
  const SolenoidalBasis& basis = disc_->basis;
  const Eigen::LLT<Mat> stokes(nu * disc_->stokes);
  const Vec fc = basis.coordinates(force);
  Vec c = Vec::Zero(basis.n_dof());
  for (int k = 0; k < max_iters; ++k) {
    const VelocityField y = basis.field(c);
    const Vec next = stokes.solve(fc - basis.coordinates(advection(y, y)));
    const double change = (next - c).norm();
    c = next;
    if (change <= tol) return c;
  }
  throw SolverError("Picard iteration did not converge");
}

}  // namespace nsstab
