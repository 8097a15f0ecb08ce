#include "nsstab/helmholtz.hpp"

#include <cmath>
#include <string>

#include "nsstab/errors.hpp"
#include "nsstab/io.hpp"

namespace nsstab {

LerayProjector::LerayProjector(const Grid& grid)
    : grid_(grid), div_(divergence_matrix(grid)), grad_(gradient_matrix(grid)) {
  // -div grad is the Neumann 5-point Laplacian: symmetric positive
  // semidefinite with the constants as its kernel. Pinning the last cell
  // leaves an SPD system; compatible right-hand sides then solve the full one.
  const Index n = grid_.num_cells();
  SpMat poisson = -(div_ * grad_);
  SpMat pinned = poisson.topLeftCorner(n - 1, n - 1);
  auto solver = std::make_shared<Solver>();
  solver->compute(pinned);
  if (solver->info() != Eigen::Success) {
    throw SolverError("pressure Poisson factorization failed");
  }
  solver_ = std::move(solver);
}

PressureField LerayProjector::solve_poisson(const PressureField& rhs) const {
  if (rhs.grid() != grid_) throw InputError("poisson: grid mismatch");
  const Index n = grid_.num_cells();
  Vec phi = Vec::Zero(n);
  phi.head(n - 1) = solver_->solve(-rhs.data().head(n - 1));
  if (solver_->info() != Eigen::Success || !phi.allFinite()) {
    throw SolverError("pressure Poisson solve failed");
  }
  PressureField out(grid_, std::move(phi));
  out.normalize();
  return out;
}

PressureField LerayProjector::potential(const VelocityField& f) const {
  if (f.grid() != grid_) throw InputError("project: grid mismatch");
  if (!f.is_finite()) throw InputError("project: non-finite input");
  if (!f.satisfies_no_slip()) {
    throw InputError("project: boundary-normal faces must be zero");
  }
  return solve_poisson(PressureField(grid_, div_ * f.data()));
}

VelocityField LerayProjector::project(const VelocityField& f) const {
  const PressureField phi = potential(f);
  return VelocityField(grid_, f.data() - grad_ * phi.data());
}

// ---------------------------------------------------------------------------

SolenoidalBasis::SolenoidalBasis(const Grid& grid, Mat columns)
    : grid_(grid), basis_(std::move(columns)) {
  if (basis_.rows() != grid_.num_faces()) {
    throw InputError("basis row count does not match grid");
  }
}

SolenoidalBasis SolenoidalBasis::build(const Grid& g) {
  // Streamfunction psi on interior nodes (i, j), 1 <= i < nx, 1 <= j < ny,
  // zero on the boundary: u = d psi / dy, v = -d psi / dx.
  const Index nodes = Index(g.nx - 1) * (g.ny - 1);
  auto node = [&](int i, int j) { return Index(j - 1) * (g.nx - 1) + (i - 1); };
  const double sw = std::sqrt(g.cell_area());

  Mat curl = Mat::Zero(g.num_faces(), nodes);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const Index r = g.u_index(i, j);
      if (j + 1 < g.ny) curl(r, node(i, j + 1)) += sw / g.hy();
      if (j > 0) curl(r, node(i, j)) -= sw / g.hy();
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index r = g.v_index(i, j);
      if (i + 1 < g.nx) curl(r, node(i + 1, j)) -= sw / g.hx();
      if (i > 0) curl(r, node(i, j)) += sw / g.hx();
    }
  }

  Eigen::HouseholderQR<Mat> qr(curl);
  Mat q = qr.householderQ() * Mat::Identity(curl.rows(), nodes);
  const Mat r = qr.matrixQR().topRows(nodes).triangularView<Eigen::Upper>();
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  const double rmin = r.diagonal().cwiseAbs().minCoeff();
  if (!(rmin > 1e-12 * rmax)) {
    throw SolverError("solenoidal basis: unexpected rank deficiency");
  }
  q /= sw;
  // Q only spans range(curl) up to roundoff; restore exact wall zeros.
  for (Index r = 0; r < q.rows(); ++r) {
    if (g.is_boundary_face(r)) q.row(r).setZero();
  }
  return SolenoidalBasis(g, std::move(q));
}

VelocityField SolenoidalBasis::field(const Vec& coords) const {
  if (coords.size() != n_dof()) throw InputError("coordinate size mismatch");
  return VelocityField(grid_, basis_ * coords);
}

Vec SolenoidalBasis::coordinates(const Vec& flat) const {
  if (flat.size() != basis_.rows()) throw InputError("field size mismatch");
  return basis_.transpose() * flat * grid_.cell_area();
}

Vec SolenoidalBasis::coordinates(const VelocityField& f) const {
  if (f.grid() != grid_) throw InputError("coordinates: grid mismatch");
  return coordinates(f.data());
}

Mat SolenoidalBasis::gram() const {
  return basis_.transpose() * basis_ * grid_.cell_area();
}

Mat SolenoidalBasis::reduce(const SpMat& op) const {
  const Mat applied = op * basis_;
  return basis_.transpose() * applied * grid_.cell_area();
}

void SolenoidalBasis::save(const std::filesystem::path& path) const {
  io::write_matrix(path, std::uint64_t(grid_.nx), std::uint64_t(grid_.ny),
                   basis_);
}

SolenoidalBasis SolenoidalBasis::load(const std::filesystem::path& path,
                                      const Grid& grid) {
  io::MatrixFile f = io::read_matrix(path);
  if (f.nx != std::uint64_t(grid.nx) || f.ny != std::uint64_t(grid.ny)) {
    throw InputError("basis file " + path.string() + " was built for another grid");
  }
  return SolenoidalBasis(grid, std::move(f.data));
}

// ---------------------------------------------------------------------------

VelocityField stokes_apply(const LerayProjector& proj, const VelocityField& f) {
  const Grid& g = f.grid();
  const double fn = std::sqrt(std::max(l2_dot(f, f), 0.0));
  const PressureField d = divergence(f);
  const double dn = std::sqrt(std::max(l2_dot(d, d), 0.0));
  const double h = std::min(g.hx(), g.hy());
  if (dn > 1e-8 * fn / h) {
    throw InputError("stokes_apply: input is not solenoidal (|div| = " +
                     std::to_string(dn) + ")");
  }
  VelocityField out = proj.project(laplacian(f));
  out *= -1.0;
  return out;
}

Mat reduced_stokes(const SolenoidalBasis& basis) {
  Mat a = -basis.reduce(laplacian_matrix(basis.grid()));
  return 0.5 * (a + a.transpose());
}

std::shared_ptr<const Discretization> Discretization::create(const Grid& grid) {
  SolenoidalBasis basis = SolenoidalBasis::build(grid);
  Mat stokes = reduced_stokes(basis);
  return std::make_shared<const Discretization>(
      Discretization{grid, std::move(basis), LerayProjector(grid), std::move(stokes)});
}

}  // namespace nsstab
