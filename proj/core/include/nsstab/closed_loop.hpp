#pragma once

// Time integration of the translated dynamics z = y - y_e in solenoidal
// coordinates:
//
//   z' = M z + F z - N(z),   M = -nu A_r - A_o + sigma I,  N(z) = P (z . grad) z
//
// with F the feedback of a FeedbackLaw (zero when open loop). The scheme is
// first order IMEX: backward Euler on nu A_r, forward Euler on everything
// else. The original mode evolves y itself with the body force and feeds
// back on y - y_e.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "nsstab/control.hpp"
#include "nsstab/norms.hpp"
#include "nsstab/oseen.hpp"

namespace nsstab {

enum class SimMode { open, linear, nonlinear, original };

SimMode parse_mode(const std::string& name);
std::string mode_name(SimMode mode);

/// kind: unstable (real part of the leading direct eigenvector), stable
/// (seeded random vector with its unstable component removed), random, zero.
/// The amplitude is the L2 norm of the initial perturbation.
struct InitialCondition {
  std::string kind = "unstable";
  double amplitude = 1e-3;
  std::uint64_t seed = 1;
};

struct SimConfig {
  double dt = 1e-3;
  double t_final = 2.0;
  int record_every = 10;
  InitialCondition ic;
  double blowup_factor = 1e6;
  /// Time exponent of the integrated pressure norm.
  double p_time = 1.15;
  NormParams norms;
  bool besov = true;
  bool pressure = true;

  void validate() const;
  nlohmann::json to_json() const;
};

struct DecayFit {
  double rate = 0.0;      // -slope of log|.| vs t; negative means growth
  double residual = 0.0;  // RMS of the log-linear fit
  bool ok = false;
};

/// Least-squares fit over the trailing `fraction` of the samples. Not a fit
/// (ok = false, rate NaN) with fewer than 10 samples in the window or any
/// non-positive value there.
DecayFit fit_decay(const std::vector<double>& times,
                   const std::vector<double>& values, double fraction = 0.5);

struct SimTrace {
  SimMode mode = SimMode::linear;
  std::vector<double> times;
  std::vector<double> lq, w1q, w2q, besov, control, chi;
  DecayFit fit;        // on the lq column
  bool blowup = false;
  int steps = 0;
  double dt = 0.0;
  double z0_norm = 0.0;  // L2 norm of the initial perturbation
  /// (int |chi(t)|_{1,q}^p dt)^{1/p} by the trapezoid rule over samples.
  double pressure_norm_lp = 0.0;
  /// L^p in time of the W^{2,q} column; a stand-in for the maximal
  /// regularity norm of the solution, not that norm itself.
  double w2q_norm_lp = 0.0;

  /// Header t,lq,w1q,w2q,besov,control,chi; full double precision.
  void write_csv(const std::filesystem::path& path) const;
  nlohmann::json summary_json() const;
};

/// Pressure of a velocity right-hand side: grad chi = (I - P) rhs, zero mean.
PressureField pressure_solve(const Discretization& disc, const VelocityField& rhs);

class ClosedLoop {
 public:
  /// `force` is needed only for the original mode.
  ClosedLoop(OseenOperator op, SpectralData spectral,
             std::optional<FeedbackLaw> law, OmegaMask mask,
             std::optional<VelocityField> force = std::nullopt);

  const OseenOperator& oseen() const { return op_; }
  const SpectralData& spectral() const { return s_; }
  const Mat& m_omega() const { return m_omega_; }
  bool has_law() const { return law_.has_value(); }

  /// M + F as a dense matrix (M when open loop).
  Mat generator() const;
  /// 0.5 / |sigma I - A_o + F|_2, the explicit-part step limit.
  double dt_bound() const;

  /// M_omega times the real-form injection: B^T W (m sum mu_k u_k).
  Vec feedback(const Vec& z) const;
  /// B^T W (z . grad) z for z = B c.
  Vec nonlinear_term(const Vec& z) const;
  /// Control field m sum mu_k u_k on the grid.
  VelocityField control_field(const Vec& z) const;

  /// chi from nu lap z - (y_e . grad) z - (z . grad) y_e - (z . grad) z
  /// + m F z; the quadratic term only when `nonlinear`.
  PressureField pressure(const Vec& z, bool nonlinear) const;

  Vec initial_state(const InitialCondition& ic) const;

  class Integrator {
   public:
    Vec step_linear(const Vec& w) const;
    Vec step_nonlinear(const Vec& z) const;
    /// One step of the original system in y coordinates.
    Vec step_original(const Vec& y) const;
    double dt() const { return dt_; }

   private:
    friend class ClosedLoop;
    Integrator(const ClosedLoop& loop, double dt, bool feedback);
    Vec implicit(const Vec& rhs) const;
    Vec explicit_linear(const Vec& w) const;

    const ClosedLoop* loop_;
    double dt_;
    bool feedback_;
    Eigen::LLT<Mat> llt_;
  };

  /// feedback = false integrates the open loop even when a law is present.
  Integrator integrator(double dt, bool feedback = true) const;

  /// Open uses no feedback even when a law is present.
  SimTrace simulate(SimMode mode, const SimConfig& cfg) const;

 private:
  OseenOperator op_;
  SpectralData s_;
  std::optional<FeedbackLaw> law_;
  OmegaMask mask_;
  std::optional<VelocityField> force_;
  Mat m_omega_;
  Vec y_e_coords_;
  Vec force_coords_;
};

}  // namespace nsstab
