#include "nsstab/forcing.hpp"

#include <cmath>
#include <numbers>

#include "nsstab/errors.hpp"

namespace nsstab {

using std::numbers::pi;

nlohmann::json ForceDescriptor::to_json() const {
  return {{"kind", kind},
          {"amplitude", amplitude},
          {"cx", cx},
          {"cy", cy},
          {"radius", radius}};
}

ForceDescriptor ForceDescriptor::from_json(const nlohmann::json& j) {
  ForceDescriptor d;
  d.kind = j.value("kind", d.kind);
  d.amplitude = j.value("amplitude", d.amplitude);
  d.cx = j.value("cx", d.cx);
  d.cy = j.value("cy", d.cy);
  d.radius = j.value("radius", d.radius);
  return d;
}

PressureField conservative_potential(const Grid& g, const ForceDescriptor& d) {
  if (d.kind != "conservative") {
    throw InputError("force '" + d.kind + "' has no potential");
  }
  PressureField p(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double x = (i + 0.5) * g.hx();
      const double y = (j + 0.5) * g.hy();
      p(i, j) = d.amplitude *
                (std::cos(pi * x / g.lx) * std::cos(pi * y / g.ly) + x / g.lx);
    }
  }
  return p;
}

VelocityField make_force(const Grid& g, const ForceDescriptor& d) {
  if (!std::isfinite(d.amplitude)) throw InputError("force amplitude not finite");
  if (d.kind == "zero") return VelocityField(g);
  if (d.kind == "conservative") return gradient(conservative_potential(g, d));

  VelocityField f(g);
  if (d.kind == "vortex") {
    // Velocity field of psi = a exp(-r^2 / s^2): (d psi/dy, -d psi/dx).
    const double x0 = d.cx * g.lx;
    const double y0 = d.cy * g.ly;
    const double s = d.radius * std::min(g.lx, g.ly);
    auto psi = [&](double x, double y) {
      const double r2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
      return d.amplitude * std::exp(-r2 / (s * s));
    };
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i <= g.nx; ++i) {
        const double x = i * g.hx();
        const double y = (j + 0.5) * g.hy();
        f.u(i, j) = psi(x, y) * (-2.0 * (y - y0) / (s * s));
      }
    }
    for (int j = 0; j <= g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const double x = (i + 0.5) * g.hx();
        const double y = j * g.hy();
        f.v(i, j) = psi(x, y) * (2.0 * (x - x0) / (s * s));
      }
    }
  } else if (d.kind == "shear" || d.kind == "lid") {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i <= g.nx; ++i) {
        const double x = i * g.hx();
        const double y = (j + 0.5) * g.hy();
        const double profile =
            d.kind == "shear" ? std::sin(2.0 * pi * y / g.ly)
                              : std::exp(-(g.ly - y) / (0.1 * g.ly));
        f.u(i, j) = d.amplitude * std::sin(pi * x / g.lx) * profile;
      }
    }
  } else {
    throw InputError("unknown force kind '" + d.kind + "'");
  }
  f.apply_no_slip();
  return f;
}

}  // namespace nsstab
