#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nsstab/types.hpp"

namespace nsstab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad config, grid mismatch, non-finite data, missing files.
class InputError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Newton failed to converge. Carries the last iterate (solenoidal
/// coordinates) and the residual history so callers can restart.
class NewtonDivergence : public SolverError {
 public:
  NewtonDivergence(const std::string& what, Vec last_iterate,
                   std::vector<double> history)
      : SolverError(what),
        last_iterate_(std::move(last_iterate)),
        history_(std::move(history)) {}

  const Vec& last_iterate() const { return last_iterate_; }
  const std::vector<double>& history() const { return history_; }

 private:
  Vec last_iterate_;
  std::vector<double> history_;
};

/// Singular values of a cluster's nilpotent part fell inside the ambiguity
/// band, so the Jordan structure cannot be decided at the requested tolerance.
class SpectralAmbiguity : public Error {
 public:
  SpectralAmbiguity(const std::string& what, double suggested_tau)
      : Error(what), suggested_tau_(suggested_tau) {}
  double suggested_tau() const { return suggested_tau_; }

 private:
  double suggested_tau_;
};

class SynthesisError : public Error {
 public:
  SynthesisError(const std::string& what, std::vector<double> margins = {})
      : Error(what), margins_(std::move(margins)) {}
  const std::vector<double>& margins() const { return margins_; }

 private:
  std::vector<double> margins_;
};

class NothingToStabilize : public Error {
 public:
  using Error::Error;
};

}  // namespace nsstab
