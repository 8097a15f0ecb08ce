#include "nsstab/norms.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "nsstab/errors.hpp"

namespace nsstab {

namespace {

// Cell-centered samples, one column per component.
using CellData = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

CellData centers(const VelocityField& f) {
  const Grid& g = f.grid();
  CellData c(g.num_cells(), 2);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index k = g.cell_index(i, j);
      c(k, 0) = 0.5 * (f.u(i, j) + f.u(i + 1, j));
      c(k, 1) = 0.5 * (f.v(i, j) + f.v(i, j + 1));
    }
  }
  return c;
}

// First difference along x (dir 0) or y (dir 1) of every column.
CellData diff1(const Grid& g, const CellData& c, int dir) {
  CellData out(c.rows(), c.cols());
  const int n = dir == 0 ? g.nx : g.ny;
  const double h = dir == 0 ? g.hx() : g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int s = dir == 0 ? i : j;
      auto at = [&](int t) {
        return dir == 0 ? c.row(g.cell_index(t, j)) : c.row(g.cell_index(i, t));
      };
      Eigen::RowVectorXd d;
      if (s == 0) {
        d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      } else if (s == n - 1) {
        d = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
      } else {
        d = (at(s + 1) - at(s - 1)) / (2.0 * h);
      }
      out.row(g.cell_index(i, j)) = d;
    }
  }
  return out;
}

CellData diff2(const Grid& g, const CellData& c, int dir) {
  CellData out(c.rows(), c.cols());
  const int n = dir == 0 ? g.nx : g.ny;
  const double h = dir == 0 ? g.hx() : g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int s = dir == 0 ? i : j;
      auto at = [&](int t) {
        return dir == 0 ? c.row(g.cell_index(t, j)) : c.row(g.cell_index(i, t));
      };
      Eigen::RowVectorXd d;
      if (s == 0) {
        d = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
      } else if (s == n - 1) {
        d = (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / (h * h);
      } else {
        d = (at(s + 1) - 2.0 * at(s) + at(s - 1)) / (h * h);
      }
      out.row(g.cell_index(i, j)) = d;
    }
  }
  return out;
}

// (sum_cells |row|^q area)^(1/q) with |.| the Euclidean norm of the row.
double lq_rows(const Grid& g, const CellData& c, double q) {
  const Vec mag = c.rowwise().norm();
  const double peak = mag.maxCoeff();
  if (!(peak > 0.0)) return std::isfinite(peak) ? 0.0 : peak;
  // Scale by the peak to keep |x|^q in range for large q.
  double s = 0.0;
  for (Index k = 0; k < mag.size(); ++k) s += std::pow(mag[k] / peak, q);
  return peak * std::pow(s * g.cell_area(), 1.0 / q);
}

double sobolev_cells(const Grid& g, const CellData& c, double q, int order) {
  if (order != 1 && order != 2) throw InputError("sobolev order must be 1 or 2");
  double total = lq_rows(g, c, q);
  const CellData dx = diff1(g, c, 0);
  const CellData dy = diff1(g, c, 1);
  CellData grad(c.rows(), 2 * c.cols());
  grad << dx, dy;
  total += lq_rows(g, grad, q);
  if (order == 2) {
    const CellData dxy = diff1(g, dx, 1);
    CellData hess(c.rows(), 4 * c.cols());
    hess << diff2(g, c, 0), dxy, dxy, diff2(g, c, 1);
    total += lq_rows(g, hess, q);
  }
  return total;
}

void check_q(double q) {
  if (!(q >= 1.0)) throw InputError("norm exponent q must be >= 1");
}

}  // namespace

bool NormParams::admissible() const {
  return q > 2.0 && p > 1.0 && p < 2.0 * q / (2.0 * q - 1.0);
}

void NormParams::validate() const {
  if (!(q >= 1.0) || !(p > 1.0)) throw InputError("norm exponents need q >= 1, p > 1");
  if (strict && !admissible()) {
    throw InputError("(q, p) outside the admissible range q > 2, 1 < p < 2q/(2q-1)");
  }
}

double lq_norm(const VelocityField& f, double q) {
  check_q(q);
  return lq_rows(f.grid(), centers(f), q);
}

double lq_norm(const PressureField& f, double q) {
  check_q(q);
  return lq_rows(f.grid(), f.data(), q);
}

double sobolev_norm(const VelocityField& f, double q, int order) {
  check_q(q);
  return sobolev_cells(f.grid(), centers(f), q, order);
}

double sobolev_norm(const PressureField& f, double q, int order) {
  check_q(q);
  return sobolev_cells(f.grid(), f.data(), q, order);
}

Complex omega_inner(const CVec& f, const CVec& g, const OmegaMask& mask) {
  const Vec& w = mask.face_weights();
  if (f.size() != w.size() || g.size() != w.size()) {
    throw InputError("omega_inner: field size does not match mask grid");
  }
  Complex s = 0.0;
  for (Index k = 0; k < w.size(); ++k) {
    if (w[k] != 0.0) s += w[k] * f[k] * std::conj(g[k]);
  }
  return s * mask.grid().cell_area();
}

double omega_inner(const VelocityField& f, const VelocityField& g,
                   const OmegaMask& mask) {
  if (f.grid() != mask.grid() || g.grid() != mask.grid()) {
    throw InputError("omega_inner: grid mismatch");
  }
  return f.data().cwiseProduct(mask.face_weights()).dot(g.data()) *
         mask.grid().cell_area();
}

BesovProxy::BesovProxy(DiscretizationPtr disc, NormParams params)
    : disc_(std::move(disc)), params_(params) {
  params_.validate();
  warned_ = !params_.admissible();
  Eigen::SelfAdjointEigenSolver<Mat> es(disc_->stokes);
  if (es.info() != Eigen::Success) throw SolverError("Stokes eigensolve failed");
  modes_ = es.eigenvectors();
  lambdas_ = es.eigenvalues();
  // From one step of the stiffest mode until the slowest mode is gone.
  const double lo = 1.0 / lambdas_.maxCoeff();
  const double hi = 40.0 / lambdas_.minCoeff();
  for (double tau = lo; tau <= hi; tau *= 2.0) taus_.push_back(tau);
}

double BesovProxy::operator()(const VelocityField& f) const {
  return with_family(f, taus_.size());
}

double BesovProxy::with_family(const VelocityField& f, std::size_t count) const {
  if (f.grid() != disc_->grid) throw InputError("besov: grid mismatch");
  const double q = params_.q;
  const double p = params_.p;
  const double theta = 1.0 - 1.0 / p;
  count = std::min(count, taus_.size());

  // (distance to f, W^{2,q} norm) per family member; tau = inf gives (|f|, 0)
  // and tau = 0 gives (0, |f|_{2,q}).
  std::vector<std::pair<double, double>> members;
  members.emplace_back(lq_norm(f, q), 0.0);
  members.emplace_back(0.0, sobolev_norm(f, q, 2));
  const Vec modal = modes_.transpose() * disc_->basis.coordinates(f);
  for (std::size_t k = 0; k < count; ++k) {
    const Vec damped = modal.cwiseProduct((-taus_[k] * lambdas_).array().exp().matrix());
    const VelocityField smooth = disc_->basis.field(modes_ * damped);
    members.emplace_back(lq_norm(f - smooth, q), sobolev_norm(smooth, q, 2));
  }

  double sum = 0.0;
  for (int e = -8; e <= 8; ++e) {
    const double t = std::ldexp(1.0, e);
    double kval = std::numeric_limits<double>::infinity();
    for (const auto& [dist, w2] : members) kval = std::min(kval, dist + t * w2);
    sum += std::pow(std::pow(t, -theta) * kval, p) * std::log(2.0);
  }
  return std::pow(sum, 1.0 / p);
}

}  // namespace nsstab
