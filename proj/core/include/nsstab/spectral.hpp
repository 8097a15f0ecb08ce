#pragma once

// Spectral splitting of a real generator into its unstable generalized
// eigenspace W^u (eigenvalues with Re >= 0) and the invariant complement.
//
// The unstable block is isolated by a reordered complex Schur form and
// decoupled with a triangular Sylvester solve; Jordan chains are extracted
// per eigenvalue cluster on the small restricted block. Direct vectors are
// ordered cluster by cluster, chain by chain (longest first), each chain
// as e_1 (eigenvector), e_2, ..., e_L with (M - lambda) e_{k+1} = e_k.
// Adjoint vectors satisfy adjoint^H direct = I, so the adjoint column paired
// with e_L of a chain is an eigenvector of M^H for conj(lambda), and the one
// paired with e_1 is the top of the adjoint chain.

#include <vector>

#include <nlohmann/json.hpp>

#include "nsstab/types.hpp"

namespace nsstab {

struct OseenOperator;

struct JordanCluster {
  Complex lambda;
  int geometric = 0;        // number of chains
  int algebraic = 0;        // total chain length
  std::vector<int> cycles;  // chain lengths, descending
  Index offset = 0;         // first column of this cluster in direct/adjoint

  /// Column index of the last vector of chain j (the row carrying the
  /// adjoint eigenvector in any input matrix expressed in this basis).
  Index last_of_chain(int j) const;
  Index first_of_chain(int j) const;
};

struct SpectralOptions {
  /// Eigenvalues closer than tau_eig * ||M|| form one cluster.
  double tau_eig = 1e-6;
  /// Largest matrix handed to the dense eigensolver.
  Index max_dense = 4000;
};

struct SpectralData {
  std::vector<Complex> eigenvalues;  // all, descending real part
  int n_unstable = 0;                // N
  double norm = 0.0;                 // ||M||_1 scale used for tolerances
  double tau_eig = 0.0;              // relative clustering tolerance used
  std::vector<JordanCluster> clusters;
  CMat direct;     // n x N
  CMat adjoint;    // n x N
  Mat projector;   // P_N, n x n (real for real M)

  int distinct() const { return static_cast<int>(clusters.size()); }
  int max_geometric() const;
  /// Eigenvalue with the largest real part among the stable ones.
  Complex first_stable() const;
  /// N x N Jordan matrix in the direct basis.
  CMat jordan() const;

  /// Eigenvalues, counts and multiplicities (vectors go to a binary block).
  nlohmann::json summary_json() const;
};

SpectralData analyze_spectrum(const Mat& m, const SpectralOptions& opt = {});
SpectralData spectrum(const OseenOperator& op, const SpectralOptions& opt = {});

/// Restores the vector blocks and projector from persisted pieces.
SpectralData spectral_from_parts(const nlohmann::json& summary, CMat direct,
                                 CMat adjoint);

/// w = w_N + zeta_N with w_N = P_N w.
struct UnstableSplit {
  Vec w_n;
  Vec zeta_n;
};
UnstableSplit project_unstable(const SpectralData& s, const Vec& w);

/// Shift sigma that leaves at least `target` eigenvalues of M + sigma I in
/// the closed right half plane: the smallest count that keeps conjugate
/// pairs together, with sigma a quarter of the way from the last included
/// real part to the next one. Throws InputError when fewer eigenvalues exist.
double shift_for_unstable(const std::vector<Complex>& eigenvalues, int target);

// Building blocks, exposed for testing.

/// Moves the diagonal entries flagged in `select` to the leading positions
/// of an upper triangular T while keeping Q T Q^H invariant.
void reorder_schur(CMat& t, CMat& q, const std::vector<bool>& select);

/// Jordan chains of a numerically nilpotent matrix. Columns of the result
/// are chains, longest first, each from eigenvector to top. Throws
/// SpectralAmbiguity when a rank decision falls inside the ambiguity band.
struct NilpotentChains {
  CMat basis;
  std::vector<int> cycles;
};
NilpotentChains jordan_chains(const CMat& s, double threshold);

}  // namespace nsstab
