#pragma once

// Run configuration: flat `section.key = value` text.
//
// Lines are trimmed; blank lines and lines starting with '#' or ';' are
// ignored, as is anything after an unquoted " #". Keys are case sensitive,
// unknown keys are errors, and a repeated key keeps the last value. Lists
// are comma separated. See README.md for the full key table.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsstab/closed_loop.hpp"
#include "nsstab/forcing.hpp"
#include "nsstab/grid.hpp"

namespace nsstab {

struct RunConfig {
  Grid grid{24, 24, 1.0, 1.0};

  double nu = 0.1;
  ForceDescriptor force;
  std::optional<double> sigma;  // nullopt: pick from target_unstable
  int target_unstable = 2;
  double nu_start = 0.0;        // > nu enables continuation
  int continuation_steps = 1;
  double newton_tol = 1e-10;
  int newton_max_iters = 50;

  double tau_eig = 1e-6;
  NormParams norms;

  double omega_x0 = 0.2, omega_x1 = 0.8, omega_y0 = 0.2, omega_y1 = 0.8;
  OmegaMask::Smoothing omega_smoothing = OmegaMask::Smoothing::none;

  std::optional<double> gamma;  // nullopt: |Re lambda_{N+1}| - epsilon
  double epsilon = 0.1;
  int attempts = 32;
  std::uint64_t seed = 1;
  double delta_ratio = 0.1;
  int K = 0;
  double tau_rank = 1e-8;

  SimConfig sim;
  std::vector<double> sweep_amplitudes;
  std::vector<double> sweep_gammas;

  std::filesystem::path out_dir = "out";

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  /// Throws InputError naming the offending key.
  void validate() const;
  OmegaMask mask() const;
  /// Canonical echo; equal configurations give equal dumps.
  nlohmann::json to_json() const;
};

}  // namespace nsstab
