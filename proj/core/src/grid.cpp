#include "nsstab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nsstab/errors.hpp"

namespace nsstab {

Grid::Grid(int nx_, int ny_, double lx_, double ly_)
    : nx(nx_), ny(ny_), lx(lx_), ly(ly_) {
  if (nx < 8 || ny < 8) {
    throw InputError("grid needs at least 8 cells per direction, got " +
                     std::to_string(nx) + "x" + std::to_string(ny));
  }
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw InputError("grid lengths must be positive and finite");
  }
}

bool Grid::is_boundary_face(Index flat) const {
  if (flat < num_u()) {
    const Index i = flat % (nx + 1);
    return i == 0 || i == nx;
  }
  const Index j = (flat - num_u()) / nx;
  return j == 0 || j == ny;
}

std::vector<Index> Grid::interior_faces() const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(num_faces()));
  for (Index k = 0; k < num_faces(); ++k) {
    if (!is_boundary_face(k)) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------

VelocityField::VelocityField(const Grid& grid)
    : grid_(grid), data_(Vec::Zero(grid.num_faces())) {}

VelocityField::VelocityField(const Grid& grid, Vec data)
    : grid_(grid), data_(std::move(data)) {
  if (data_.size() != grid_.num_faces()) {
    throw InputError("velocity data has " + std::to_string(data_.size()) +
                     " entries, grid expects " +
                     std::to_string(grid_.num_faces()));
  }
}

void VelocityField::apply_no_slip() {
  for (int j = 0; j < grid_.ny; ++j) {
    u(0, j) = 0.0;
    u(grid_.nx, j) = 0.0;
  }
  for (int i = 0; i < grid_.nx; ++i) {
    v(i, 0) = 0.0;
    v(i, grid_.ny) = 0.0;
  }
}

bool VelocityField::satisfies_no_slip() const {
  for (int j = 0; j < grid_.ny; ++j) {
    if (u(0, j) != 0.0 || u(grid_.nx, j) != 0.0) return false;
  }
  for (int i = 0; i < grid_.nx; ++i) {
    if (v(i, 0) != 0.0 || v(i, grid_.ny) != 0.0) return false;
  }
  return true;
}

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": grid mismatch");
}

void require_finite(const VelocityField& f, const char* what) {
  if (!f.is_finite()) {
    throw InputError(std::string(what) + ": non-finite velocity entries");
  }
}

}  // namespace

VelocityField& VelocityField::operator+=(const VelocityField& o) {
  require_same_grid(grid_, o.grid_, "velocity +=");
  data_ += o.data_;
  return *this;
}

VelocityField& VelocityField::operator-=(const VelocityField& o) {
  require_same_grid(grid_, o.grid_, "velocity -=");
  data_ -= o.data_;
  return *this;
}

VelocityField& VelocityField::operator*=(double a) {
  data_ *= a;
  return *this;
}

VelocityField operator+(VelocityField a, const VelocityField& b) { return a += b; }
VelocityField operator-(VelocityField a, const VelocityField& b) { return a -= b; }
VelocityField operator*(double s, VelocityField a) { return a *= s; }

// ---------------------------------------------------------------------------

PressureField::PressureField(const Grid& grid)
    : grid_(grid), data_(Vec::Zero(grid.num_cells())) {}

PressureField::PressureField(const Grid& grid, Vec data)
    : grid_(grid), data_(std::move(data)) {
  if (data_.size() != grid_.num_cells()) {
    throw InputError("pressure data size does not match grid");
  }
}

void PressureField::normalize() { data_.array() -= data_.mean(); }

// ---------------------------------------------------------------------------

OmegaMask::OmegaMask(const Grid& grid, std::vector<bool> cells,
                     Smoothing smoothing)
    : grid_(grid), cells_(std::move(cells)), smoothing_(smoothing) {
  if (static_cast<Index>(cells_.size()) != grid_.num_cells()) {
    throw InputError("mask size does not match grid");
  }
  Index n = 0;
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      if (!cell(i, j)) continue;
      ++n;
      if (i == 0 || j == 0 || i == grid_.nx - 1 || j == grid_.ny - 1) {
        throw InputError("control mask touches the boundary");
      }
    }
  }
  if (n == 0) throw InputError("control mask is empty");

  // Cell weights: the indicator, or for the mollified mask the indicator
  // times its 3x3 neighbourhood average, so the support stays inside omega.
  Vec cw = Vec::Zero(grid_.num_cells());
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      if (!cell(i, j)) continue;
      if (smoothing_ == Smoothing::none) {
        cw[grid_.cell_index(i, j)] = 1.0;
        continue;
      }
      int in = 0;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) in += cell(i + di, j + dj);
      cw[grid_.cell_index(i, j)] = in / 9.0;
    }
  }
  face_weights_ = Vec::Zero(grid_.num_faces());
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 1; i < grid_.nx; ++i) {
      face_weights_[grid_.u_index(i, j)] =
          std::min(cw[grid_.cell_index(i - 1, j)], cw[grid_.cell_index(i, j)]);
    }
  }
  for (int j = 1; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      face_weights_[grid_.v_index(i, j)] =
          std::min(cw[grid_.cell_index(i, j - 1)], cw[grid_.cell_index(i, j)]);
    }
  }
}

OmegaMask OmegaMask::rectangle(const Grid& grid, double x0, double x1,
                               double y0, double y1) {
  std::vector<bool> cells(static_cast<std::size_t>(grid.num_cells()), false);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double xc = (i + 0.5) * grid.hx();
      const double yc = (j + 0.5) * grid.hy();
      if (xc >= x0 && xc <= x1 && yc >= y0 && yc <= y1) {
        cells[grid.cell_index(i, j)] = true;
      }
    }
  }
  return OmegaMask(grid, std::move(cells));
}

OmegaMask OmegaMask::all_interior(const Grid& grid) {
  std::vector<bool> cells(static_cast<std::size_t>(grid.num_cells()), false);
  for (int j = 1; j < grid.ny - 1; ++j) {
    for (int i = 1; i < grid.nx - 1; ++i) cells[grid.cell_index(i, j)] = true;
  }
  return OmegaMask(grid, std::move(cells));
}

Index OmegaMask::count() const {
  Index n = 0;
  for (bool b : cells_) n += b ? 1 : 0;
  return n;
}

VelocityField OmegaMask::apply(const VelocityField& f) const {
  require_same_grid(grid_, f.grid(), "mask apply");
  return VelocityField(grid_, f.data().cwiseProduct(face_weights_));
}

// ---------------------------------------------------------------------------
// Stencils are written once as visitors emitting (row, col, coefficient) so
// the field operators and the sparse assemblies share a single definition.

namespace {

template <class Emit>
void laplacian_stencil(const Grid& g, Emit&& emit) {
  const double ax = 1.0 / (g.hx() * g.hx());
  const double ay = 1.0 / (g.hy() * g.hy());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const Index r = g.u_index(i, j);
      double diag = -2.0 * ax - 2.0 * ay;
      if (i - 1 > 0) emit(r, g.u_index(i - 1, j), ax);
      if (i + 1 < g.nx) emit(r, g.u_index(i + 1, j), ax);
      if (j > 0) emit(r, g.u_index(i, j - 1), ay); else diag -= ay;
      if (j + 1 < g.ny) emit(r, g.u_index(i, j + 1), ay); else diag -= ay;
      emit(r, r, diag);
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index r = g.v_index(i, j);
      double diag = -2.0 * ax - 2.0 * ay;
      if (j - 1 > 0) emit(r, g.v_index(i, j - 1), ay);
      if (j + 1 < g.ny) emit(r, g.v_index(i, j + 1), ay);
      if (i > 0) emit(r, g.v_index(i - 1, j), ax); else diag -= ax;
      if (i + 1 < g.nx) emit(r, g.v_index(i + 1, j), ax); else diag -= ax;
      emit(r, r, diag);
    }
  }
}

template <class Emit>
void divergence_stencil(const Grid& g, Emit&& emit) {
  const double bx = 1.0 / g.hx();
  const double by = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index r = g.cell_index(i, j);
      emit(r, g.u_index(i + 1, j), bx);
      emit(r, g.u_index(i, j), -bx);
      emit(r, g.v_index(i, j + 1), by);
      emit(r, g.v_index(i, j), -by);
    }
  }
}

template <class Emit>
void gradient_stencil(const Grid& g, Emit&& emit) {
  const double bx = 1.0 / g.hx();
  const double by = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      emit(g.u_index(i, j), g.cell_index(i, j), bx);
      emit(g.u_index(i, j), g.cell_index(i - 1, j), -bx);
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      emit(g.v_index(i, j), g.cell_index(i, j), by);
      emit(g.v_index(i, j), g.cell_index(i, j - 1), -by);
    }
  }
}

template <class Stencil>
SpMat assemble(Index rows, Index cols, Stencil&& stencil) {
  std::vector<Eigen::Triplet<double>> trips;
  stencil([&](Index r, Index c, double a) { trips.emplace_back(r, c, a); });
  SpMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace

VelocityField laplacian(const VelocityField& f) {
  require_finite(f, "laplacian");
  const Grid& g = f.grid();
  VelocityField out(g);
  const Vec& x = f.data();
  Vec& y = out.data();
  laplacian_stencil(g, [&](Index r, Index c, double a) { y[r] += a * x[c]; });
  return out;
}

PressureField divergence(const VelocityField& f) {
  require_finite(f, "divergence");
  const Grid& g = f.grid();
  PressureField out(g);
  const Vec& x = f.data();
  Vec& y = out.data();
  divergence_stencil(g, [&](Index r, Index c, double a) { y[r] += a * x[c]; });
  return out;
}

VelocityField gradient(const PressureField& p) {
  if (!p.data().allFinite()) throw InputError("gradient: non-finite pressure");
  const Grid& g = p.grid();
  VelocityField out(g);
  const Vec& x = p.data();
  Vec& y = out.data();
  gradient_stencil(g, [&](Index r, Index c, double a) { y[r] += a * x[c]; });
  return out;
}

VelocityField advection(const VelocityField& a, const VelocityField& f) {
  require_same_grid(a.grid(), f.grid(), "advection");
  require_finite(a, "advection");
  require_finite(f, "advection");
  const Grid& g = a.grid();
  const double hx = g.hx();
  const double hy = g.hy();
  VelocityField out(g);

  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const double au = a.u(i, j);
      const double av = 0.25 * (a.v(i - 1, j) + a.v(i, j) + a.v(i - 1, j + 1) +
                                a.v(i, j + 1));
      const double c = f.u(i, j);
      const double dx = (f.u(i + 1, j) - f.u(i - 1, j)) / (2.0 * hx);
      const double up = j + 1 < g.ny ? f.u(i, j + 1) : -c;
      const double dn = j > 0 ? f.u(i, j - 1) : -c;
      const double dy = (up - dn) / (2.0 * hy);
      out.u(i, j) = au * dx + av * dy;
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double av = a.v(i, j);
      const double au = 0.25 * (a.u(i, j - 1) + a.u(i + 1, j - 1) + a.u(i, j) +
                                a.u(i + 1, j));
      const double c = f.v(i, j);
      const double rt = i + 1 < g.nx ? f.v(i + 1, j) : -c;
      const double lt = i > 0 ? f.v(i - 1, j) : -c;
      const double dx = (rt - lt) / (2.0 * hx);
      const double dy = (f.v(i, j + 1) - f.v(i, j - 1)) / (2.0 * hy);
      out.v(i, j) = au * dx + av * dy;
    }
  }
  return out;
}

SpMat laplacian_matrix(const Grid& g) {
  return assemble(g.num_faces(), g.num_faces(),
                  [&](auto&& emit) { laplacian_stencil(g, emit); });
}

SpMat divergence_matrix(const Grid& g) {
  return assemble(g.num_cells(), g.num_faces(),
                  [&](auto&& emit) { divergence_stencil(g, emit); });
}

SpMat gradient_matrix(const Grid& g) {
  return assemble(g.num_faces(), g.num_cells(),
                  [&](auto&& emit) { gradient_stencil(g, emit); });
}

double l2_dot(const VelocityField& a, const VelocityField& b) {
  require_same_grid(a.grid(), b.grid(), "l2_dot");
  return a.data().dot(b.data()) * a.grid().cell_area();
}

double l2_dot(const PressureField& a, const PressureField& b) {
  if (a.grid() != b.grid()) throw InputError("l2_dot: grid mismatch");
  return a.data().dot(b.data()) * a.grid().cell_area();
}

}  // namespace nsstab
