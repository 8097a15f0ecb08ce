#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "nsstab/grid.hpp"

namespace nsstab {

/// Built-in body-force families.
///   zero          f = 0
///   conservative  f = grad g, g = a (cos(pi x / lx) cos(pi y / ly) + x / lx)
///   vortex        divergence-free Gaussian vortex centered at (cx, cy)
///   shear         f = (a sin(pi x / lx) sin(2 pi y / ly), 0)
///   lid           f = (a sin(pi x / lx) exp(-(ly - y) / (0.1 ly)), 0)
struct ForceDescriptor {
  std::string kind = "zero";
  double amplitude = 0.0;
  double cx = 0.35;  // vortex center, fraction of lx
  double cy = 0.6;   // fraction of ly
  double radius = 0.15;  // fraction of min(lx, ly)

  nlohmann::json to_json() const;
  static ForceDescriptor from_json(const nlohmann::json& j);
};

VelocityField make_force(const Grid& grid, const ForceDescriptor& desc);

/// The potential g of a conservative force, sampled at cell centers.
PressureField conservative_potential(const Grid& grid,
                                     const ForceDescriptor& desc);

}  // namespace nsstab
