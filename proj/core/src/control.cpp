#include "nsstab/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "nsstab/errors.hpp"

namespace nsstab {

namespace {

template <class Scalar>
Scalar draw(std::mt19937_64& rng, std::normal_distribution<double>& nd) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return nd(rng);
  } else {
    const double re = nd(rng);
    return Scalar(re, nd(rng));
  }
}

template <class Scalar>
std::vector<Complex> eigenvalues_of(const MatT<Scalar>& a) {
  std::vector<Complex> out;
  if constexpr (std::is_same_v<Scalar, double>) {
    Eigen::EigenSolver<Mat> es(a, false);
    for (Index k = 0; k < a.rows(); ++k) out.push_back(es.eigenvalues()(k));
  } else {
    Eigen::ComplexEigenSolver<CMat> es(a, false);
    for (Index k = 0; k < a.rows(); ++k) out.push_back(es.eigenvalues()(k));
  }
  std::sort(out.begin(), out.end(), [](Complex x, Complex y) {
    return x.real() != y.real() ? x.real() > y.real() : x.imag() > y.imag();
  });
  return out;
}

double rank_margin(const CMat& block) {
  if (block.rows() == 0) return 1.0;
  if (block.cols() < block.rows()) return 0.0;
  Eigen::JacobiSVD<CMat> svd(block);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return 0.0;
  return sv(block.rows() - 1) / sv(0);
}

std::string list(const std::vector<double>& v) {
  std::ostringstream s;
  for (std::size_t k = 0; k < v.size(); ++k) s << (k ? ", " : "") << v[k];
  return s.str();
}

nlohmann::json complex_json(const CMat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMat complex_from_json(const nlohmann::json& j) {
  const Index r = static_cast<Index>(j.size());
  const Index c = r ? static_cast<Index>(j.at(0).size()) : 0;
  CMat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k)
      m(i, k) = Complex(j.at(i).at(k).at(0).get<double>(), j.at(i).at(k).at(1).get<double>());
  return m;
}

}  // namespace

Mat windowed_gram(const Discretization& disc, const OmegaMask& mask) {
  if (mask.grid() != disc.grid) throw InputError("mask and basis live on different grids");
  const Mat& b = disc.basis.matrix();
  const Vec w = mask.face_weights() * disc.grid.cell_area();
  Mat g = b.transpose() * w.asDiagonal() * b;
  return 0.5 * (g + g.transpose());
}

std::vector<CMat> last_row_blocks(const std::vector<JordanCluster>& clusters,
                                  const CMat& u) {
  std::vector<CMat> out;
  for (const auto& c : clusters) {
    CMat rows(c.geometric, u.cols());
    for (int j = 0; j < c.geometric; ++j) rows.row(j) = u.row(c.last_of_chain(j));
    out.push_back(std::move(rows));
  }
  return out;
}

ControlBlocks build_U(const SpectralData& s, const CMat& actuators,
                      const Mat& m_omega) {
  if (actuators.rows() != m_omega.rows() || s.adjoint.rows() != m_omega.rows()) {
    throw InputError("build_U: dimension mismatch");
  }
  if (m_omega.norm() == 0.0) throw InputError("build_U: empty control mask");
  ControlBlocks out;
  out.u = s.adjoint.adjoint() * (m_omega * actuators);
  out.last_rows = last_row_blocks(s.clusters, out.u);
  return out;
}

RankVerdict rank_test(const std::vector<CMat>& blocks, double tau_rank) {
  RankVerdict v;
  v.controllable = true;
  for (const auto& b : blocks) {
    v.margins.push_back(rank_margin(b));
    if (!(v.margins.back() > tau_rank)) v.controllable = false;
  }
  return v;
}

int kalman_rank(const CMat& j, const CMat& b, double tau_rank) {
  const Index n = j.rows();
  if (n > 64) throw InputError("kalman_rank: N > 64 is too ill-conditioned");
  if (b.rows() != n) throw InputError("kalman_rank: dimension mismatch");
  if (n == 0 || b.cols() == 0) return 0;
  CMat k(n, n * b.cols());
  CMat block = b;
  for (Index p = 0; p < n; ++p) {
    k.middleCols(p * b.cols(), b.cols()) = block;
    block = j * block;
  }
  Eigen::JacobiSVD<CMat> svd(k);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return 0;
  return static_cast<int>((sv.array() > tau_rank * sv(0)).count());
}

std::vector<bool> hautus_test(const CMat& j, const CMat& b,
                              const std::vector<Complex>& eigenvalues,
                              double tau_rank) {
  const Index n = j.rows();
  std::vector<bool> out;
  for (const Complex& lambda : eigenvalues) {
    CMat c(n, n + b.cols());
    c << j - lambda * CMat::Identity(n, n), b;
    Eigen::JacobiSVD<CMat> svd(c);
    const auto& sv = svd.singularValues();
    out.push_back(sv(0) > 0.0 && sv(n - 1) > tau_rank * sv(0));
  }
  return out;
}

std::vector<double> placement_targets(int n, double gamma, double delta_sep) {
  std::vector<double> t;
  for (int k = 0; k < n; ++k) t.push_back(-gamma - k * delta_sep);
  return t;
}

template <class Scalar>
Placement<Scalar> place_poles(const MatT<Scalar>& a, const MatT<Scalar>& b,
                              const std::vector<double>& targets,
                              std::uint64_t seed, int tries) {
  const Index n = a.rows();
  const Index k = b.cols();
  if (a.cols() != n || b.rows() != n || Index(targets.size()) != n) {
    throw InputError("place_poles: dimension mismatch");
  }
  if (k == 0) throw SynthesisError("place_poles: no inputs");
  for (std::size_t i = 0; i < targets.size(); ++i)
    for (std::size_t l = i + 1; l < targets.size(); ++l)
      if (targets[i] == targets[l]) throw InputError("place_poles: targets must be distinct");

  const std::vector<Complex> open = eigenvalues_of<Scalar>(a);
  const std::vector<bool> hautus =
      hautus_test(a.template cast<Complex>(), b.template cast<Complex>(), open);
  if (std::find(hautus.begin(), hautus.end(), false) != hautus.end()) {
    throw SynthesisError("place_poles: (J, U) is not controllable");
  }

  std::vector<MatT<Scalar>> nulls;
  for (double s : targets) {
    MatT<Scalar> c(n, n + k);
    c << a - Scalar(s) * MatT<Scalar>::Identity(n, n), b;
    Eigen::JacobiSVD<MatT<Scalar>> svd(c, Eigen::ComputeFullV);
    nulls.push_back(svd.matrixV().rightCols(k));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double best_cond = std::numeric_limits<double>::infinity();
  MatT<Scalar> best_x, best_g;
  for (int t = 0; t < std::max(tries, 1); ++t) {
    MatT<Scalar> x = MatT<Scalar>::Zero(n, n), g = MatT<Scalar>::Zero(k, n);
    for (Index j = 0; j < n; ++j) {
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r(k);
      for (Index i = 0; i < k; ++i) r[i] = draw<Scalar>(rng, nd);
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = nulls[j] * r;
      const double scale = v.head(n).norm();
      if (!(scale > 0.0)) continue;
      x.col(j) = v.head(n) / scale;
      g.col(j) = v.tail(k) / scale;
    }
    Eigen::JacobiSVD<MatT<Scalar>> svd(x);
    const auto& sv = svd.singularValues();
    const double cond = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1)
                                        : std::numeric_limits<double>::infinity();
    if (cond < best_cond) {
      best_cond = cond;
      best_x = x;
      best_g = g;
    }
    if (k == 1) break;  // single input: the eigenvectors are unique
  }
  if (!(best_cond < 1e12)) {
    std::ostringstream msg;
    msg << "place_poles: closed-loop eigenvector matrix is singular (cond " << best_cond << ")";
    throw SynthesisError(msg.str());
  }
  Placement<Scalar> out;
  out.gain = best_x.transpose().partialPivLu().solve(best_g.transpose()).transpose();
  out.cond = best_cond;
  out.placed = eigenvalues_of<Scalar>(MatT<Scalar>(a + b * out.gain));
  return out;
}

template Placement<double> place_poles<double>(const Mat&, const Mat&,
                                               const std::vector<double>&,
                                               std::uint64_t, int);
template Placement<Complex> place_poles<Complex>(const CMat&, const CMat&,
                                                 const std::vector<double>&,
                                                 std::uint64_t, int);

ActuatorSet choose_actuators(const SpectralData& s, const Mat& m_omega, int K,
                             int attempts, std::uint64_t seed, double tau_rank) {
  const Index n_un = s.n_unstable;
  if (n_un < 1) throw NothingToStabilize("no unstable eigenvalues");
  if (K < 1) throw InputError("actuator count must be positive");
  if (attempts < 1) throw InputError("attempts must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;

  ActuatorSet best;
  std::vector<double> best_margins;
  double best_score = -1.0;
  for (int a = 0; a < attempts; ++a) {
    CMat coeff(n_un, K);
    for (Index i = 0; i < coeff.size(); ++i) coeff.data()[i] = draw<Complex>(rng, nd);
    Mat fields = (s.direct * coeff).real();
    for (int k = 0; k < K; ++k) {
      const double nrm = fields.col(k).norm();
      if (nrm > 0.0) {
        fields.col(k) /= nrm;
        coeff.col(k) /= nrm;
      }
    }
    const CMat f = fields.cast<Complex>();
    RankVerdict v = rank_test(build_U(s, f, m_omega).last_rows, tau_rank);
    const double score = *std::min_element(v.margins.begin(), v.margins.end());
    if (score > best_score) {
      best_score = score;
      best = ActuatorSet{f, coeff, K};
      best_margins = v.margins;
    }
  }
  if (!(best_score > tau_rank)) {
    throw SynthesisError("no actuator draw passed the rank test; best margins: " +
                             list(best_margins),
                         best_margins);
  }
  return best;
}

Mat FeedbackLaw::real_actuators() const {
  Mat a(actuators.fields.rows(), 2 * K);
  a << actuators.fields.real(), actuators.fields.imag();
  return a;
}

Mat FeedbackLaw::real_observers() const {
  Mat o(observers.rows(), 2 * K);
  o << observers.real(), observers.imag();
  return o;
}

CVec FeedbackLaw::controls(const SpectralData& s, const Mat& m_omega,
                           const Vec& w) const {
  const Vec wn = project_unstable(s, w).w_n;
  return observers.adjoint() * (m_omega * wn).cast<Complex>();
}

Vec FeedbackLaw::real_injection(const SpectralData& s, const Mat& m_omega,
                                const Vec& w) const {
  const Vec wn = project_unstable(s, w).w_n;
  return real_actuators() * (real_observers().transpose() * (m_omega * wn));
}

Mat FeedbackLaw::feedback_operator(const SpectralData& s, const Mat& m_omega) const {
  const Mat read = real_observers().transpose() * m_omega * s.projector;
  return m_omega * real_actuators() * read;
}

nlohmann::json FeedbackLaw::summary_json() const {
  nlohmann::json j;
  j["K"] = K;
  j["N"] = N;
  j["gamma"] = gamma;
  j["delta_sep"] = delta_sep;
  j["margins"] = margins;
  j["placement_cond"] = placement_cond;
  nlohmann::json placed_j = nlohmann::json::array();
  for (const auto& z : placed) placed_j.push_back({z.real(), z.imag()});
  j["placed_spectrum"] = std::move(placed_j);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& z : placed) worst = std::max(worst, z.real());
  j["placed_max_real"] = worst;
  j["gain"] = complex_json(gain);
  return j;
}

FeedbackLaw synthesize(const SpectralData& s, const Mat& m_omega,
                       const SynthesisOptions& opt) {
  const int n_un = s.n_unstable;
  if (n_un < 1) throw NothingToStabilize("nothing to stabilize: N = 0");
  if (!(opt.gamma > 0.0)) throw InputError("gamma must be positive");
  if (!(opt.delta_ratio > 0.0)) throw InputError("delta_sep ratio must be positive");
  const int K = opt.K > 0 ? opt.K : s.max_geometric();

  FeedbackLaw law;
  law.K = K;
  law.N = n_un;
  law.gamma = opt.gamma;
  law.delta_sep = opt.delta_ratio * opt.gamma;
  law.actuators = choose_actuators(s, m_omega, K, opt.attempts, opt.seed, opt.tau_rank);
  const ControlBlocks blocks = build_U(s, law.actuators.fields, m_omega);
  law.margins = rank_test(blocks.last_rows, opt.tau_rank).margins;

  // Real coordinates on W^u: V = V_r T with V_r orthonormal and real.
  Mat span(s.direct.rows(), 2 * n_un);
  span << s.direct.real(), s.direct.imag();
  Eigen::JacobiSVD<Mat> svd(span, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (!(sv(n_un - 1) > 1e-10 * sv(0)) || sv(n_un) > 1e-8 * sv(0)) {
    throw SynthesisError("unstable subspace is not closed under conjugation");
  }
  const Mat vr = svd.matrixU().leftCols(n_un);
  const CMat t = vr.transpose().cast<Complex>() * s.direct;
  Eigen::PartialPivLU<CMat> tlu(t);
  const CMat ar_c = t * s.jordan() * tlu.inverse();
  if (ar_c.imag().norm() > 1e-8 * (1.0 + ar_c.norm())) {
    throw SynthesisError("real form of the unstable block has an imaginary part");
  }
  const Mat ar = ar_c.real();
  const Mat br = (t * blocks.u).real();

  const std::vector<double> targets = placement_targets(n_un, opt.gamma, law.delta_sep);
  Placement<double> placed = place_poles<double>(ar, br, targets, opt.seed);
  law.gain = placed.gain.cast<Complex>() * t;
  law.placement_cond = placed.cond;
  law.placed = eigenvalues_of<Complex>(CMat(s.jordan() + blocks.u * law.gain));
  for (const auto& z : law.placed) {
    if (z.real() > -opt.gamma + opt.tau_place) {
      std::ostringstream msg;
      msg << "placement missed the target: eigenvalue " << z.real()
          << " > " << -opt.gamma << " (eigenvector condition " << placed.cond << ")";
      throw SynthesisError(msg.str(), law.margins);
    }
  }

  // Observers: p_k in span(adjoint) with p_k^H M_omega V = gain row k.
  const CMat gram = s.adjoint.adjoint() * m_omega.cast<Complex>() * s.direct;
  Eigen::JacobiSVD<CMat> gsvd(gram);
  const auto& gs = gsvd.singularValues();
  if (!(gs(n_un - 1) > 1e-10 * gs(0))) {
    throw SynthesisError("windowed Gram of the unstable basis is singular; enlarge omega");
  }
  const CMat coeff = gram.adjoint().partialPivLu().solve(law.gain.adjoint());
  law.observers = s.adjoint * coeff;
  return law;
}

FeedbackLaw feedback_from_parts(const nlohmann::json& summary, CMat actuators,
                                CMat coefficients, CMat observers) {
  FeedbackLaw law;
  try {
    law.K = summary.at("K").get<int>();
    law.N = summary.at("N").get<int>();
    law.gamma = summary.at("gamma").get<double>();
    law.delta_sep = summary.at("delta_sep").get<double>();
    law.margins = summary.at("margins").get<std::vector<double>>();
    law.placement_cond = summary.at("placement_cond").get<double>();
    for (const auto& z : summary.at("placed_spectrum"))
      law.placed.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
    law.gain = complex_from_json(summary.at("gain"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed controller summary: ") + e.what());
  }
  if (actuators.cols() != law.K || observers.cols() != law.K ||
      coefficients.cols() != law.K || coefficients.rows() != law.N ||
      actuators.rows() != observers.rows()) {
    throw InputError("controller blocks do not match the summary");
  }
  law.actuators = ActuatorSet{std::move(actuators), std::move(coefficients), law.K};
  law.observers = std::move(observers);
  return law;
}

}  // namespace nsstab
