#pragma once

// MAC staggered grid on the rectangle [0, lx] x [0, ly].
//
// Layout of the flat velocity vector: all x-face samples u(i, j),
// i in [0, nx], j in [0, ny), followed by all y-face samples v(i, j),
// i in [0, nx), j in [0, ny]. Faces on the boundary carry the wall-normal
// component and are pinned to zero (no-slip); tangential no-slip enters the
// stencils through odd ghost reflection across the wall.

#include <cstddef>
#include <vector>

#include <Eigen/Sparse>

#include "nsstab/types.hpp"

namespace nsstab {

using SpMat = Eigen::SparseMatrix<double>;

struct Grid {
  int nx = 0;
  int ny = 0;
  double lx = 1.0;
  double ly = 1.0;

  Grid() = default;
  Grid(int nx_, int ny_, double lx_ = 1.0, double ly_ = 1.0);

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double cell_area() const { return hx() * hy(); }

  Index num_u() const { return Index(nx + 1) * ny; }
  Index num_v() const { return Index(nx) * (ny + 1); }
  Index num_faces() const { return num_u() + num_v(); }
  Index num_cells() const { return Index(nx) * ny; }

  Index u_index(int i, int j) const { return Index(j) * (nx + 1) + i; }
  Index v_index(int i, int j) const { return num_u() + Index(j) * nx + i; }
  Index cell_index(int i, int j) const { return Index(j) * nx + i; }

  /// True for faces that carry the wall-normal velocity on the boundary.
  bool is_boundary_face(Index flat) const;

  /// Flat indices of all interior faces, u-faces first, in flat order.
  std::vector<Index> interior_faces() const;

  bool operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

class VelocityField {
 public:
  explicit VelocityField(const Grid& grid);
  VelocityField(const Grid& grid, Vec data);

  const Grid& grid() const { return grid_; }
  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  double u(int i, int j) const { return data_[grid_.u_index(i, j)]; }
  double v(int i, int j) const { return data_[grid_.v_index(i, j)]; }
  double& u(int i, int j) { return data_[grid_.u_index(i, j)]; }
  double& v(int i, int j) { return data_[grid_.v_index(i, j)]; }

  /// Zero every boundary-normal face.
  void apply_no_slip();
  /// True if every boundary-normal face is exactly zero.
  bool satisfies_no_slip() const;
  bool is_finite() const { return data_.allFinite(); }

  VelocityField& operator+=(const VelocityField& o);
  VelocityField& operator-=(const VelocityField& o);
  VelocityField& operator*=(double a);

 private:
  Grid grid_;
  Vec data_;
};

VelocityField operator+(VelocityField a, const VelocityField& b);
VelocityField operator-(VelocityField a, const VelocityField& b);
VelocityField operator*(double s, VelocityField a);

class PressureField {
 public:
  explicit PressureField(const Grid& grid);
  PressureField(const Grid& grid, Vec data);

  const Grid& grid() const { return grid_; }
  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  double operator()(int i, int j) const { return data_[grid_.cell_index(i, j)]; }
  double& operator()(int i, int j) { return data_[grid_.cell_index(i, j)]; }

  /// Subtract the mean so the field represents its class modulo constants.
  void normalize();
  double mean() const { return data_.mean(); }

 private:
  Grid grid_;
  Vec data_;
};

/// Characteristic function m of the control subdomain, stored per cell.
class OmegaMask {
 public:
  enum class Smoothing { none, mollified };

  OmegaMask(const Grid& grid, std::vector<bool> cells,
            Smoothing smoothing = Smoothing::none);

  /// Cells whose centers lie in [x0, x1] x [y0, y1].
  static OmegaMask rectangle(const Grid& grid, double x0, double x1, double y0,
                             double y1);
  /// Every cell that does not touch the boundary.
  static OmegaMask all_interior(const Grid& grid);

  const Grid& grid() const { return grid_; }
  bool cell(int i, int j) const { return cells_[grid_.cell_index(i, j)]; }
  const std::vector<bool>& cells() const { return cells_; }
  Smoothing smoothing() const { return smoothing_; }
  Index count() const;

  /// Per-face weight: a face belongs to omega when both neighbouring cells
  /// do. Exactly 0 or 1 without smoothing; the mollified mask tapers to
  /// values in (0, 1] near the edge of omega. Applying m multiplies by it.
  const Vec& face_weights() const { return face_weights_; }

  VelocityField apply(const VelocityField& f) const;

 private:
  Grid grid_;
  std::vector<bool> cells_;
  Smoothing smoothing_;
  Vec face_weights_;
};

// Difference operators. All are linear and leave boundary-normal faces at 0.

VelocityField laplacian(const VelocityField& f);
PressureField divergence(const VelocityField& f);
VelocityField gradient(const PressureField& p);
/// Centered convective term (a . grad) f evaluated at each face.
VelocityField advection(const VelocityField& a, const VelocityField& f);

/// Sparse assemblies on the full flat velocity vector. Rows and columns of
/// boundary-normal faces are empty.
SpMat laplacian_matrix(const Grid& g);
SpMat divergence_matrix(const Grid& g);  // cells x faces
SpMat gradient_matrix(const Grid& g);    // faces x cells

/// L2 inner products with cell-area weights.
double l2_dot(const VelocityField& a, const VelocityField& b);
double l2_dot(const PressureField& a, const PressureField& b);

}  // namespace nsstab
