#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "jordan_systems.hpp"
#include "nsstab/control.hpp"
#include "nsstab/errors.hpp"
#include "nsstab/norms.hpp"

using namespace nsstab;
using namespace nsstab::testing;

namespace {

double max_real(const CMat& a) {
  Eigen::ComplexEigenSolver<CMat> es(a, false);
  double m = -INFINITY;
  for (Index k = 0; k < a.rows(); ++k) m = std::max(m, es.eigenvalues()(k).real());
  return m;
}

double max_real(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, false);
  double m = -INFINITY;
  for (Index k = 0; k < a.rows(); ++k) m = std::max(m, es.eigenvalues()(k).real());
  return m;
}

bool rank_verdict(const JordanSystem& s) {
  return rank_test(last_row_blocks(s.clusters, s.b)).controllable;
}

bool hautus_verdict(const JordanSystem& s) {
  for (bool ok : hautus_test(s.j, s.b, s.eigenvalues))
    if (!ok) return false;
  return true;
}

// Real matrix with prescribed real Jordan structure embedded by a random
// similarity; used for end-to-end synthesis checks.
Mat embed(const Mat& j, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Mat s(j.rows(), j.cols());
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = nd(rng);
  s += 2.0 * std::sqrt(double(j.rows())) * Mat::Identity(j.rows(), j.cols());
  return s * j * s.inverse();
}

}  // namespace

TEST(RankTest, JordanPairLastRowDecides) {
  JordanSystem s = jordan_system({Complex(0.5, 0)}, {{2}});
  s.b = CMat(2, 1);
  s.b << 0.0, 1.0;
  EXPECT_TRUE(rank_verdict(s));
  EXPECT_EQ(kalman_rank(s.j, s.b), 2);
  s.b << 1.0, 0.0;
  EXPECT_FALSE(rank_verdict(s));
  EXPECT_EQ(kalman_rank(s.j, s.b), 1);
  EXPECT_FALSE(hautus_verdict(s));
}

TEST(RankTest, TwoSimpleEigenvaluesOneActuator) {
  JordanSystem s = jordan_system({Complex(1, 0), Complex(2, 0)}, {{1}, {1}});
  s.b = CMat::Ones(2, 1);
  EXPECT_TRUE(rank_verdict(s));
  EXPECT_TRUE(hautus_verdict(s));
  EXPECT_EQ(kalman_rank(s.j, s.b), 2);
}

TEST(Kalman, Examples) {
  CMat j = CMat::Zero(3, 3);
  EXPECT_EQ(kalman_rank(j, CMat::Zero(3, 1)), 0);
  j.diagonal() << 1.0, 2.0, 3.0;
  EXPECT_EQ(kalman_rank(j, CMat::Ones(3, 1)), 3);  // Vandermonde
  EXPECT_THROW(kalman_rank(CMat::Zero(65, 65), CMat::Ones(65, 1)), InputError);
}

TEST(Hautus, Examples) {
  EXPECT_TRUE(hautus_test(CMat::Zero(1, 1), CMat::Ones(1, 1), {0.0})[0]);
  CMat j = CMat::Identity(2, 2);
  CMat b(2, 1);
  b << 1.0, 2.0;
  EXPECT_FALSE(hautus_test(j, b, {1.0})[0]);
  EXPECT_LT(kalman_rank(j, b), 2);
}

TEST(RankTest, AgreesWithKalmanAndHautus) {
  std::mt19937_64 rng(42);
  int controllable = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::uniform_int_distribution<int> kd(1, 3);
    JordanSystem s = random_jordan_system(rng, 6, kd(rng));
    const bool r = rank_verdict(s);
    const bool k = kalman_rank(s.j, s.b) == s.j.rows();
    const bool h = hautus_verdict(s);
    EXPECT_EQ(r, k) << "trial " << trial;
    EXPECT_EQ(r, h) << "trial " << trial;
    controllable += r;
  }
  // Both verdicts must actually occur for the comparison to mean anything.
  EXPECT_GT(controllable, 30);
  EXPECT_LT(controllable, 450);
}

TEST(RankTest, FewerActuatorsThanGeometricMultiplicityAlwaysFail) {
  // lambda = 0.5 with chains (2, 1): l = 2, plus a simple eigenvalue.
  JordanSystem s = jordan_system({Complex(0.5, 0), Complex(1.5, 0)}, {{2, 1}, {1}});
  const Index n = s.j.rows();
  // Exhaustive single-column lattice {-1, 0, 1}^4.
  for (int code = 0; code < 81; ++code) {
    CMat b(n, 1);
    int c = code;
    for (Index i = 0; i < n; ++i, c /= 3) b(i, 0) = double(c % 3 - 1);
    s.b = b;
    EXPECT_FALSE(rank_verdict(s));
    EXPECT_LT(kalman_rank(s.j, s.b), n);
  }
  s.b = CMat::Zero(n, 2);
  s.b(1, 0) = 1.0;
  s.b(2, 1) = 1.0;
  s.b(3, 0) = 1.0;
  EXPECT_TRUE(rank_verdict(s));
}

TEST(PlacePoles, ScalarExample) {
  Mat a(1, 1), b(1, 1);
  a << 2.0;
  b << 1.0;
  auto p = place_poles<double>(a, b, placement_targets(1, 3.0, 0.3));
  EXPECT_NEAR(p.gain(0, 0), -5.0, 1e-12);
  EXPECT_NEAR(p.placed[0].real(), -3.0, 1e-12);
}

TEST(PlacePoles, JordanBlock) {
  JordanSystem s = jordan_system({Complex(0.5, 0)}, {{2}});
  CMat b(2, 1);
  b << 0.0, 1.0;
  auto p = place_poles<Complex>(s.j, b, placement_targets(2, 1.0, 0.1));
  EXPECT_LE(max_real(CMat(s.j + b * p.gain)), -1.0 + 1e-8);
  b << 1.0, 0.0;
  EXPECT_THROW(place_poles<Complex>(s.j, b, placement_targets(2, 1.0, 0.1)), SynthesisError);
}

TEST(PlacePoles, RandomControllableSystems) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  int placed = 0;
  for (int trial = 0; placed < 60; ++trial) {
    ASSERT_LT(trial, 1000);
    std::uniform_int_distribution<int> kd(1, 3);
    JordanSystem s = random_jordan_system(rng, 6, kd(rng));
    for (Index i = 0; i < s.b.size(); ++i) s.b.data()[i] = Complex(nd(rng), nd(rng));
    if (!rank_verdict(s)) continue;
    const double gamma = 0.5 + (trial % 4);
    auto p = place_poles<Complex>(s.j, s.b, placement_targets(s.j.rows(), gamma, 0.1 * gamma),
                                  trial);
    EXPECT_LE(max_real(CMat(s.j + s.b * p.gain)), -gamma + 1e-6) << "trial " << trial;
    ++placed;
  }
}

TEST(PlacePoles, RejectsBadTargets) {
  Mat a = Mat::Identity(2, 2), b = Mat::Identity(2, 2);
  EXPECT_THROW(place_poles<double>(a, b, {-1.0, -1.0}), InputError);
  EXPECT_THROW(place_poles<double>(a, b, {-1.0}), InputError);
}

// ---------------------------------------------------------------------------

class Synthesis : public ::testing::Test {
 protected:
  void SetUp() override {
    // Unstable: 1 +- 0.5i (rotation block), 0.3 double semisimple; stable rest.
    Mat j = Mat::Zero(8, 8);
    j(0, 0) = j(1, 1) = 1.0;
    j(0, 1) = 0.5;
    j(1, 0) = -0.5;
    j(2, 2) = j(3, 3) = 0.3;
    for (int k = 4; k < 8; ++k) j(k, k) = -2.0 - k;
    m = embed(j, 11);
    s = analyze_spectrum(m);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Vec d(8);
    for (Index k = 0; k < 8; ++k) d[k] = u(rng);
    m_omega = d.asDiagonal();
  }
  Mat m;
  SpectralData s;
  Mat m_omega;
};

TEST_F(Synthesis, UsesMaxGeometricMultiplicity) {
  ASSERT_EQ(s.n_unstable, 4);
  ASSERT_EQ(s.max_geometric(), 2);
  SynthesisOptions opt;
  opt.gamma = 1.5;
  FeedbackLaw law = synthesize(s, m_omega, opt);
  EXPECT_EQ(law.K, 2);
  for (const auto& z : law.placed) EXPECT_LE(z.real(), -1.5 + 1e-6);
  opt.K = 1;
  EXPECT_THROW(synthesize(s, m_omega, opt), SynthesisError);
}

TEST_F(Synthesis, ActuatorsLieInUnstableSubspace) {
  ActuatorSet a = choose_actuators(s, m_omega, 2, 8, 3);
  for (int k = 0; k < a.K; ++k) {
    const Vec u = a.fields.col(k).real();
    EXPECT_LT((s.projector * u - u).norm(), 1e-8 * u.norm());
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
  }
  EXPECT_EQ(a.fields.imag().norm(), 0.0);
}

TEST_F(Synthesis, ClosedLoopCertificateAndRealForm) {
  SynthesisOptions opt;
  opt.gamma = 1.0;
  FeedbackLaw law = synthesize(s, m_omega, opt);
  const Mat f = law.feedback_operator(s, m_omega);
  // Stable part sits at -6 .. -9, placed poles at -1 .. -1.3.
  EXPECT_LE(max_real(Mat(m + f)), -1.0 + 1e-6);

  // Real form versus complex law on real states.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  Vec w(8);
  for (Index k = 0; k < 8; ++k) w[k] = nd(rng);
  const CVec mu = law.controls(s, m_omega, w);
  const CVec complex_injection = law.actuators.fields * mu;
  EXPECT_LT((complex_injection.real() - law.real_injection(s, m_omega, w)).norm(),
            1e-8 * complex_injection.norm());
  EXPECT_LT(complex_injection.imag().norm(), 1e-8 * complex_injection.norm());

  // Real representation of J + U Q: T (J + U Q) T^-1 acting on W^u.
  const ControlBlocks blocks = build_U(s, law.actuators.fields, m_omega);
  const CMat closed = s.jordan() + blocks.u * law.gain;
  const CMat via_direct = s.adjoint.adjoint() * (m + f).cast<Complex>() * s.direct;
  EXPECT_LT((via_direct - closed).norm(), 1e-8 * (1.0 + closed.norm()));
}

TEST_F(Synthesis, SummaryRoundTrip) {
  SynthesisOptions opt;
  opt.gamma = 2.0;
  FeedbackLaw law = synthesize(s, m_omega, opt);
  FeedbackLaw back = feedback_from_parts(nlohmann::json::parse(law.summary_json().dump()),
                                         law.actuators.fields, law.actuators.coefficients,
                                         law.observers);
  EXPECT_EQ(back.K, law.K);
  EXPECT_EQ((back.gain - law.gain).norm(), 0.0);
  EXPECT_EQ(back.placed, law.placed);
  EXPECT_THROW(feedback_from_parts(law.summary_json(), law.actuators.fields.leftCols(1),
                                   law.actuators.coefficients, law.observers),
               InputError);
}

TEST_F(Synthesis, SeededDrawsAreReproducible) {
  ActuatorSet a = choose_actuators(s, m_omega, 2, 8, 17);
  ActuatorSet b = choose_actuators(s, m_omega, 2, 8, 17);
  EXPECT_EQ((a.fields - b.fields).norm(), 0.0);
}

TEST(SynthesisEdge, NothingToStabilize) {
  Mat m = -Mat::Identity(3, 3);
  SpectralData s = analyze_spectrum(m);
  EXPECT_THROW(synthesize(s, Mat::Identity(3, 3), {}), NothingToStabilize);
}

// ---------------------------------------------------------------------------

class WindowedGram : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    disc = Discretization::create(Grid(12, 12, 1.3, 1.0));
  }
  static void TearDownTestSuite() { disc.reset(); }
  static DiscretizationPtr disc;
};
DiscretizationPtr WindowedGram::disc;

TEST_F(WindowedGram, MatchesFacePairing) {
  OmegaMask mask = OmegaMask::rectangle(disc->grid, 0.3, 0.9, 0.2, 0.7);
  const Mat mo = windowed_gram(*disc, mask);
  std::srand(1);
  const Vec a = Vec::Random(disc->basis.n_dof()), b = Vec::Random(disc->basis.n_dof());
  EXPECT_NEAR(b.dot(mo * a), omega_inner(disc->basis.field(a), disc->basis.field(b), mask),
              1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(mo, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues()(0), -1e-12);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-12);
}

TEST_F(WindowedGram, BuildUEntriesAreOmegaPairings) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  const Index n = disc->basis.n_dof();
  Mat a(n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
  // Two unstable modes of a random operator on the same coordinate space.
  Mat m = -5.0 * Mat::Identity(n, n) + 0.3 * a;
  Eigen::EigenSolver<Mat> es(m, false);
  std::vector<double> re;
  for (Index k = 0; k < n; ++k) re.push_back(es.eigenvalues()(k).real());
  std::sort(re.rbegin(), re.rend());
  m.diagonal().array() -= 0.5 * (re[1] + re[2]);
  SpectralData s = analyze_spectrum(m);
  ASSERT_GE(s.n_unstable, 2);

  OmegaMask small = OmegaMask::rectangle(disc->grid, 0.3, 0.7, 0.3, 0.6);
  OmegaMask big = OmegaMask::rectangle(disc->grid, 0.2, 0.9, 0.2, 0.8);
  ActuatorSet act = choose_actuators(s, windowed_gram(*disc, big), 1, 4, 1);
  const CMat u_small = build_U(s, act.fields, windowed_gram(*disc, small)).u;
  const CMat u_big = build_U(s, act.fields, windowed_gram(*disc, big)).u;

  const CVec field = disc->basis.matrix() * act.fields.col(0);
  double bound = 0.0;
  for (Index r = 0; r < s.n_unstable; ++r) {
    const CVec phi = disc->basis.matrix() * s.adjoint.col(r);
    EXPECT_LT(std::abs(u_big(r, 0) - omega_inner(field, phi, big)), 1e-12 * (1 + std::abs(u_big(r, 0))));
    // Cauchy-Schwarz on the ring big \ small bounds the change of entry r.
    const Vec ring = big.face_weights() - small.face_weights();
    const double area = disc->grid.cell_area();
    const double fu = std::sqrt((ring.cwiseProduct(field.cwiseAbs2())).sum() * area);
    const double fp = std::sqrt((ring.cwiseProduct(phi.cwiseAbs2())).sum() * area);
    EXPECT_LE(std::abs(u_big(r, 0) - u_small(r, 0)), fu * fp * (1 + 1e-10) + 1e-14);
    bound += fu * fp;
  }
  EXPECT_GT(bound, 0.0);

  // A field orthogonal on omega to every adjoint vector gives U = 0.
  const Mat mo = windowed_gram(*disc, big);
  const CMat reads = mo * s.adjoint;
  Eigen::HouseholderQR<CMat> qr(reads);
  const CMat q = qr.householderQ() * CMat::Identity(n, s.n_unstable);
  CVec c = CVec::Zero(n);
  for (Index k = 0; k < n; ++k) c[k] = nd(rng);
  c -= q * (q.adjoint() * c);
  EXPECT_LT(build_U(s, c, mo).u.norm(), 1e-10 * c.norm());
}
