#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "nsstab/errors.hpp"
#include "nsstab/helmholtz.hpp"

using namespace nsstab;

namespace {

VelocityField random_field(const Grid& g, unsigned seed) {
  std::srand(seed);
  VelocityField f(g, Vec::Random(g.num_faces()));
  f.apply_no_slip();
  return f;
}

double norm(const VelocityField& f) { return std::sqrt(l2_dot(f, f)); }

}  // namespace

TEST(Leray, ProjectionIsIdempotentAndSolenoidal) {
  Grid g(14, 10, 1.4, 1.0);
  LerayProjector p(g);
  for (unsigned s = 0; s < 4; ++s) {
    VelocityField f = random_field(g, s);
    VelocityField pf = p.project(f);
    EXPECT_LT((p.project(pf).data() - pf.data()).norm(), 1e-10 * pf.data().norm());
    EXPECT_LT(divergence(pf).data().norm(), 1e-9 * f.data().norm() / g.hx());
  }
}

TEST(Leray, AnnihilatesGradients) {
  Grid g(12, 12);
  LerayProjector p(g);
  PressureField phi(g, Vec::Random(g.num_cells()));
  VelocityField gp = gradient(phi);
  EXPECT_LT(norm(p.project(gp)), 1e-10 * norm(gp));
  // And the potential recovers phi up to a constant.
  PressureField back = p.potential(gp);
  phi.normalize();
  EXPECT_LT((back.data() - phi.data()).norm(), 1e-9 * phi.data().norm());
}

TEST(Leray, IsOrthogonal) {
  Grid g(10, 12);
  LerayProjector p(g);
  VelocityField a = random_field(g, 7), b = random_field(g, 8);
  EXPECT_NEAR(l2_dot(p.project(a), b), l2_dot(a, p.project(b)), 1e-10);
}

TEST(Leray, RejectsBadInput) {
  Grid g(8, 8);
  LerayProjector p(g);
  VelocityField f(g);
  f.u(0, 3) = 1.0;
  EXPECT_THROW(p.project(f), InputError);
  VelocityField nan(g);
  nan.u(3, 3) = std::nan("");
  EXPECT_THROW(p.project(nan), InputError);
  EXPECT_THROW(p.project(VelocityField(Grid(9, 8))), InputError);
}

// The solenoidal subspace is the kernel of the divergence restricted to
// interior faces; its dimension is #interior faces - rank(D) and rank(D) is
// #cells - 1 (constants span the cokernel).
TEST(SolenoidalBasis, DimensionMatchesKernelOfDivergence) {
  Grid g(8, 8);
  SolenoidalBasis b = SolenoidalBasis::build(g);
  const auto interior = g.interior_faces();
  Mat d = Mat(divergence_matrix(g));
  Mat di(d.rows(), interior.size());
  for (std::size_t k = 0; k < interior.size(); ++k) di.col(k) = d.col(interior[k]);
  Eigen::JacobiSVD<Mat> svd(di);
  Index rank = (svd.singularValues().array() > 1e-10 * svd.singularValues()(0)).count();
  EXPECT_EQ(b.n_dof(), Index(interior.size()) - rank);
  EXPECT_EQ(b.n_dof(), Index(g.nx - 1) * (g.ny - 1));
}

TEST(SolenoidalBasis, OrthonormalAndDivergenceFree) {
  Grid g(12, 10, 1.2, 1.0);
  SolenoidalBasis b = SolenoidalBasis::build(g);
  EXPECT_LT((b.gram() - Mat::Identity(b.n_dof(), b.n_dof())).norm(), 1e-10);
  Mat div = divergence_matrix(g) * b.matrix();
  EXPECT_LT(div.norm(), 1e-9);
  for (Index k = 0; k < b.n_dof(); ++k) {
    EXPECT_TRUE(VelocityField(g, b.matrix().col(k)).satisfies_no_slip());
  }
}

TEST(SolenoidalBasis, CoordinatesAgreeWithProjection) {
  Grid g(10, 10);
  SolenoidalBasis b = SolenoidalBasis::build(g);
  LerayProjector p(g);
  VelocityField f = random_field(g, 9);
  VelocityField via_basis = b.field(b.coordinates(f));
  EXPECT_LT((via_basis.data() - p.project(f).data()).norm(), 1e-10 * f.data().norm());
}

TEST(SolenoidalBasis, SaveLoadRoundTrip) {
  Grid g(8, 9);
  SolenoidalBasis b = SolenoidalBasis::build(g);
  auto path = std::filesystem::temp_directory_path() / "nsstab_basis_roundtrip.bin";
  b.save(path);
  SolenoidalBasis c = SolenoidalBasis::load(path, g);
  EXPECT_EQ((b.matrix() - c.matrix()).norm(), 0.0);
  EXPECT_THROW(SolenoidalBasis::load(path, Grid(9, 9)), InputError);
  std::filesystem::remove(path);
}

TEST(Stokes, ReducedMatrixIsSymmetricPositiveDefinite) {
  auto disc = Discretization::create(Grid(12, 12));
  Eigen::SelfAdjointEigenSolver<Mat> es(disc->stokes);
  EXPECT_GT(es.eigenvalues()(0), 0.0);
  // Raw reduction before symmetrization is already symmetric to roundoff.
  Mat raw = -disc->basis.reduce(laplacian_matrix(disc->grid));
  EXPECT_LT((raw - raw.transpose()).norm(), 1e-8 * raw.norm());
}

TEST(Stokes, ApplyRejectsNonSolenoidal) {
  Grid g(10, 10);
  LerayProjector p(g);
  EXPECT_THROW(stokes_apply(p, random_field(g, 11)), InputError);
  VelocityField s = p.project(random_field(g, 12));
  EXPECT_NO_THROW(stokes_apply(p, s));
  EXPECT_GT(l2_dot(stokes_apply(p, s), s), 0.0);
}

// First Stokes eigenvalue of the unit square (Dirichlet), lambda_1 =
// 52.3446911... from spectral computations in the literature.
TEST(Stokes, FirstEigenvalueApproachesContinuum) {
  auto disc = Discretization::create(Grid(32, 32));
  Eigen::SelfAdjointEigenSolver<Mat> es(disc->stokes, Eigen::EigenvaluesOnly);
  EXPECT_NEAR(es.eigenvalues()(0), 52.3446911, 0.03 * 52.3446911);
}
