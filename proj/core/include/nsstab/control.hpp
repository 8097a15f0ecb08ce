#pragma once

// Finite-dimensional interior feedback for the unstable block.
//
// All vectors here are solenoidal coordinates. Actuators u_k live in W^u
// and act through m (the omega mask); the observers p_k live in (W^u)* and
// read the state through the omega pairing, mu_k = (P_N w, p_k)_omega.

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsstab/helmholtz.hpp"
#include "nsstab/spectral.hpp"

namespace nsstab {

template <class Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// M_omega = B^T diag(m) B hx hy, so (f, g)_omega = g^H M_omega f in
/// coordinates and B^T W (m u) = M_omega u.
Mat windowed_gram(const Discretization& disc, const OmegaMask& mask);

struct ActuatorSet {
  CMat fields;        // n_dof x K coordinates (imaginary part may be zero)
  CMat coefficients;  // N x K, fields = Re(direct * coefficients) when real
  int K = 0;
};

/// U[r, k] = (u_k, adjoint_r)_omega and the per-cluster rows of U at the
/// last vector of each Jordan chain (the B_i^L blocks).
struct ControlBlocks {
  CMat u;
  std::vector<CMat> last_rows;
};

ControlBlocks build_U(const SpectralData& s, const CMat& actuators,
                      const Mat& m_omega);
std::vector<CMat> last_row_blocks(const std::vector<JordanCluster>& clusters,
                                  const CMat& u);

struct RankVerdict {
  std::vector<double> margins;  // sigma_min / sigma_max of each B_i^L
  bool controllable = false;
};

/// Margin is 0 when a block has fewer columns than rows.
RankVerdict rank_test(const std::vector<CMat>& blocks, double tau_rank = 1e-8);

/// Numerical rank of [B, J B, ..., J^{N-1} B]; N <= 64.
int kalman_rank(const CMat& j, const CMat& b, double tau_rank = 1e-8);

/// Per eigenvalue: rank [J - lambda I, B] == N.
std::vector<bool> hautus_test(const CMat& j, const CMat& b,
                              const std::vector<Complex>& eigenvalues,
                              double tau_rank = 1e-8);

template <class Scalar>
struct Placement {
  MatT<Scalar> gain;            // K x N
  std::vector<Complex> placed;  // eigenvalues of A + B gain
  double cond = 0.0;            // condition number of the eigenvector matrix
};

/// Gain with spectrum(A + B gain) = targets, by parametric eigenstructure
/// assignment: each closed-loop eigenvector is drawn from the null space of
/// [A - s I, B]; the best conditioned of `tries` draws wins. Targets must be
/// distinct. Throws SynthesisError when (A, B) fails the Hautus test or the
/// eigenvector matrix is numerically singular.
template <class Scalar>
Placement<Scalar> place_poles(const MatT<Scalar>& a, const MatT<Scalar>& b,
                              const std::vector<double>& targets,
                              std::uint64_t seed = 1, int tries = 16);

/// {-gamma - j delta_sep}, j = 0..n-1.
std::vector<double> placement_targets(int n, double gamma, double delta_sep);

struct SynthesisOptions {
  double gamma = 1.0;
  double delta_ratio = 0.1;  // delta_sep = delta_ratio * gamma
  int attempts = 32;
  std::uint64_t seed = 1;
  double tau_rank = 1e-8;
  double tau_place = 1e-6;
  int K = 0;  // 0 selects max geometric multiplicity
};

/// Randomized actuators u_k = Re(V c_k), unit L2 norm, scored by the
/// smallest rank margin; best of `attempts`. Throws SynthesisError with the
/// best margins when none passes.
ActuatorSet choose_actuators(const SpectralData& s, const Mat& m_omega,
                             int K, int attempts, std::uint64_t seed,
                             double tau_rank = 1e-8);

struct FeedbackLaw {
  int K = 0;
  int N = 0;
  double gamma = 0.0;
  double delta_sep = 0.0;
  ActuatorSet actuators;
  CMat observers;               // p_k, n_dof x K
  CMat gain;                    // Q in the Jordan basis, K x N
  std::vector<Complex> placed;  // spectrum of J + U Q
  std::vector<double> margins;  // rank margins of the chosen actuators
  double placement_cond = 0.0;

  /// 2K real (actuator, observer) pairs: (Re u_k, Re p_k), (Im u_k, Im p_k).
  Mat real_actuators() const;
  Mat real_observers() const;

  /// Complex controls mu_k = (w_N, p_k)_omega for a coordinate vector w.
  CVec controls(const SpectralData& s, const Mat& m_omega, const Vec& w) const;
  /// Real-form injection sum_j (w_N, o_j)_omega a_j, in coordinates of the
  /// field before masking and projection.
  Vec real_injection(const SpectralData& s, const Mat& m_omega, const Vec& w) const;

  /// Discrete closed-loop feedback operator F = M_omega A O^T M_omega P_N,
  /// so that the controlled generator is M + F.
  Mat feedback_operator(const SpectralData& s, const Mat& m_omega) const;

  nlohmann::json summary_json() const;
};

FeedbackLaw synthesize(const SpectralData& s, const Mat& m_omega,
                       const SynthesisOptions& opt);

/// Rebuilds a law from its summary and persisted coordinate blocks.
FeedbackLaw feedback_from_parts(const nlohmann::json& summary, CMat actuators,
                                CMat coefficients, CMat observers);

}  // namespace nsstab
