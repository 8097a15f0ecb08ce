#pragma once

// Discrete measurement norms. Velocities are measured at cell centers
// (averages of the two adjacent faces); derivatives are centered in the
// interior and one-sided second order at the walls.

#include <vector>

#include "nsstab/helmholtz.hpp"

namespace nsstab {

struct NormParams {
  double q = 3.0;
  double p = 1.15;
  bool strict = true;

  /// q > 2 and 1 < p < 2q / (2q - 1), the admissible range in two dimensions.
  bool admissible() const;
  /// Throws InputError in strict mode when the pair is not admissible, or
  /// for q < 1 / p <= 1 in any mode.
  void validate() const;
};

double lq_norm(const VelocityField& f, double q);
double lq_norm(const PressureField& f, double q);

/// lq of f plus lq of its first (and for order 2, second) differences.
double sobolev_norm(const VelocityField& f, double q, int order);
double sobolev_norm(const PressureField& f, double q, int order);

/// (f, g)_omega = sum over faces in omega of f conj(g) hx hy.
Complex omega_inner(const CVec& f, const CVec& g, const OmegaMask& mask);
double omega_inner(const VelocityField& f, const VelocityField& g,
                   const OmegaMask& mask);

/// K-functional proxy for the interpolation norm between L^q and W^{2,q}:
///   K(t, f) = min over tau of |f - f_tau|_q + t |f_tau|_{2,q}
/// with f_tau = B exp(-tau A_r) B^T W f (Stokes heat smoothing), tau = 0
/// meaning f itself and tau = inf meaning 0, and
///   |f| = (sum_t (t^-theta K(t, f))^p ln 2)^(1/p),  theta = 1 - 1/p,
/// over dyadic t in [2^-8, 2^8].
class BesovProxy {
 public:
  BesovProxy(DiscretizationPtr disc, NormParams params);

  double operator()(const VelocityField& f) const;

  /// Positive smoothing times in use (dyadic, scaled to the Stokes spectrum).
  const std::vector<double>& taus() const { return taus_; }
  /// Same proxy restricted to the first `count` smoothing times; used to
  /// check that enlarging the family never increases the value.
  double with_family(const VelocityField& f, std::size_t count) const;
  /// True when (q, p) was outside the admissible range in permissive mode.
  bool warned() const { return warned_; }

 private:
  DiscretizationPtr disc_;
  NormParams params_;
  bool warned_ = false;
  Mat modes_;    // eigenvectors of A_r
  Vec lambdas_;  // eigenvalues of A_r
  std::vector<double> taus_;
};

}  // namespace nsstab
