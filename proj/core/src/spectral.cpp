#include "nsstab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "nsstab/errors.hpp"
#include "nsstab/oseen.hpp"

namespace nsstab {

namespace {

// Singular values above threshold but within this factor of it cannot be
// told apart from noise with any confidence.
constexpr double kAmbiguityBand = 1e2;

bool eig_order(Complex a, Complex b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

// Givens pair (c real, s complex) with [c s; -conj(s) c] [f; g] = [r; 0].
void givens(Complex f, Complex g, double& c, Complex& s) {
  const double af = std::abs(f);
  const double ag = std::abs(g);
  if (ag == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (af == 0.0) {
    c = 0.0;
    s = std::conj(g) / ag;
  } else {
    const double nrm = std::hypot(af, ag);
    c = af / nrm;
    s = (f / af) * std::conj(g) / nrm;
  }
}

// Swaps the diagonal entries k and k+1 of the upper triangular t.
void swap_adjacent(CMat& t, CMat& q, Index k) {
  const Index n = t.rows();
  const Complex t11 = t(k, k);
  const Complex t22 = t(k + 1, k + 1);
  double c;
  Complex s;
  givens(t(k, k + 1), t22 - t11, c, s);
  for (Index j = k + 2; j < n; ++j) {
    const Complex a = t(k, j), b = t(k + 1, j);
    t(k, j) = c * a + s * b;
    t(k + 1, j) = c * b - std::conj(s) * a;
  }
  for (Index i = 0; i < k; ++i) {
    const Complex a = t(i, k), b = t(i, k + 1);
    t(i, k) = c * a + std::conj(s) * b;
    t(i, k + 1) = c * b - s * a;
  }
  t(k, k) = t22;
  t(k + 1, k + 1) = t11;
  for (Index i = 0; i < n; ++i) {
    const Complex a = q(i, k), b = q(i, k + 1);
    q(i, k) = c * a + std::conj(s) * b;
    q(i, k + 1) = c * b - s * a;
  }
}

// Complex Schur form from a real one: each 2x2 bump is rotated to upper
// triangular form, bottom up.
void real_to_complex_schur(const Mat& tr, const Mat& ur, CMat& t, CMat& q) {
  const Index n = tr.rows();
  t = tr.cast<Complex>();
  q = ur.cast<Complex>();
  for (Index m = n - 1; m >= 1; --m) {
    if (t(m, m - 1) == 0.0) continue;
    const Complex a = t(m - 1, m - 1), b = t(m - 1, m), c = t(m, m - 1),
                  d = t(m, m);
    const Complex half = 0.5 * (a + d);
    const Complex disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
    const Complex mu = half + disc - d;
    const double r = std::hypot(std::abs(mu), std::abs(c));
    const Complex cs = mu / r;
    const Complex sn = c / r;
    // G = [conj(cs) sn; -sn cs], applied as G T on rows, T G^H on columns.
    for (Index j = m - 1; j < n; ++j) {
      const Complex x = t(m - 1, j), y = t(m, j);
      t(m - 1, j) = std::conj(cs) * x + sn * y;
      t(m, j) = -sn * x + cs * y;
    }
    for (Index i = 0; i <= m; ++i) {
      const Complex x = t(i, m - 1), y = t(i, m);
      t(i, m - 1) = x * cs + y * std::conj(sn);
      t(i, m) = -x * std::conj(sn) + y * std::conj(cs);
    }
    for (Index i = 0; i < n; ++i) {
      const Complex x = q(i, m - 1), y = q(i, m);
      q(i, m - 1) = x * cs + y * std::conj(sn);
      q(i, m) = -x * std::conj(sn) + y * std::conj(cs);
    }
    t(m, m - 1) = 0.0;
  }
}

// Solves T11 Y - Y T22 = rhs for upper triangular T11, T22.
CMat triangular_sylvester(const CMat& t11, const CMat& t22, const CMat& rhs) {
  const Index m = t11.rows();
  const Index p = t22.rows();
  CMat y(m, p);
  CMat shifted = t11;
  for (Index j = 0; j < p; ++j) {
    CVec b = rhs.col(j);
    if (j > 0) b += y.leftCols(j) * t22.col(j).head(j);
    shifted.diagonal() = t11.diagonal().array() - t22(j, j);
    y.col(j) = shifted.triangularView<Eigen::Upper>().solve(b);
  }
  return y;
}

// Orthonormal basis of the column span, dropping directions below rel_tol.
CMat orthonormal(const CMat& a, double rel_tol = 1e-10) {
  if (a.cols() == 0) return a;
  Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Index r = 0;
  while (r < sv.size() && sv(r) > rel_tol * sv(0)) ++r;
  return svd.matrixU().leftCols(r);
}

std::vector<std::vector<Index>> single_linkage(const std::vector<Complex>& z,
                                               double tol) {
  const Index n = static_cast<Index>(z.size());
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (std::abs(z[i] - z[j]) <= tol) parent[find(i)] = find(j);
    }
  }
  std::vector<std::vector<Index>> groups;
  std::vector<Index> slot(n, -1);
  for (Index i = 0; i < n; ++i) {
    const Index r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<Index>(groups.size());
      groups.emplace_back();
    }
    groups[slot[r]].push_back(i);
  }
  return groups;
}

CMat matrix_power(const CMat& a, int k) {
  CMat out = CMat::Identity(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) out = out * a;
  return out;
}

std::string fmt(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

}  // namespace

Index JordanCluster::first_of_chain(int j) const {
  Index pos = offset;
  for (int l = 0; l < j; ++l) pos += cycles.at(l);
  return pos;
}

Index JordanCluster::last_of_chain(int j) const {
  return first_of_chain(j) + cycles.at(j) - 1;
}

int SpectralData::max_geometric() const {
  int m = 0;
  for (const auto& c : clusters) m = std::max(m, c.geometric);
  return m;
}

Complex SpectralData::first_stable() const {
  if (static_cast<std::size_t>(n_unstable) >= eigenvalues.size()) {
    return Complex(-std::numeric_limits<double>::infinity(), 0.0);
  }
  return eigenvalues[n_unstable];
}

CMat SpectralData::jordan() const {
  CMat j = CMat::Zero(n_unstable, n_unstable);
  for (const auto& c : clusters) {
    for (int k = 0; k < c.geometric; ++k) {
      const Index first = c.first_of_chain(k);
      for (int l = 0; l < c.cycles[k]; ++l) {
        j(first + l, first + l) = c.lambda;
        if (l > 0) j(first + l - 1, first + l) = 1.0;
      }
    }
  }
  return j;
}

nlohmann::json SpectralData::summary_json() const {
  nlohmann::json out;
  out["n"] = projector.rows();
  out["N"] = n_unstable;
  out["distinct"] = distinct();
  out["max_geometric"] = max_geometric();
  out["norm"] = norm;
  out["tau_eig"] = tau_eig;
  nlohmann::json eig = nlohmann::json::array();
  for (const auto& z : eigenvalues) eig.push_back({z.real(), z.imag()});
  out["eigenvalues"] = std::move(eig);
  nlohmann::json cl = nlohmann::json::array();
  for (const auto& c : clusters) {
    cl.push_back({{"lambda", {c.lambda.real(), c.lambda.imag()}},
                  {"geometric", c.geometric},
                  {"algebraic", c.algebraic},
                  {"cycles", c.cycles},
                  {"offset", c.offset}});
  }
  out["clusters"] = std::move(cl);
  return out;
}

SpectralData spectral_from_parts(const nlohmann::json& summary, CMat direct,
                                 CMat adjoint) {
  SpectralData s;
  try {
    s.n_unstable = summary.at("N").get<int>();
    s.norm = summary.at("norm").get<double>();
    s.tau_eig = summary.at("tau_eig").get<double>();
    for (const auto& z : summary.at("eigenvalues")) {
      s.eigenvalues.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
    }
    for (const auto& c : summary.at("clusters")) {
      JordanCluster jc;
      jc.lambda = Complex(c.at("lambda").at(0).get<double>(),
                          c.at("lambda").at(1).get<double>());
      jc.geometric = c.at("geometric").get<int>();
      jc.algebraic = c.at("algebraic").get<int>();
      jc.cycles = c.at("cycles").get<std::vector<int>>();
      jc.offset = c.at("offset").get<Index>();
      s.clusters.push_back(std::move(jc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed spectral summary: ") + e.what());
  }
  const Index n = summary.value("n", direct.rows());
  if (direct.rows() != n || adjoint.rows() != n || direct.cols() != s.n_unstable ||
      adjoint.cols() != s.n_unstable) {
    throw InputError("spectral vectors do not match the summary");
  }
  s.direct = std::move(direct);
  s.adjoint = std::move(adjoint);
  s.projector = (s.direct * s.adjoint.adjoint()).real();
  return s;
}

void reorder_schur(CMat& t, CMat& q, const std::vector<bool>& select) {
  const Index n = t.rows();
  if (static_cast<Index>(select.size()) != n) {
    throw InputError("reorder_schur: selection size mismatch");
  }
  std::vector<bool> sel = select;
  Index top = 0;
  for (Index j = 0; j < n; ++j) {
    if (!sel[j]) continue;
    for (Index k = j; k > top; --k) {
      swap_adjacent(t, q, k - 1);
      std::swap(sel[k], sel[k - 1]);
    }
    ++top;
  }
  // Rotations leave roundoff below the diagonal; the form is triangular.
  t.triangularView<Eigen::StrictlyLower>().setZero();
}

NilpotentChains jordan_chains(const CMat& s, double threshold) {
  const Index n = s.rows();
  NilpotentChains out;
  if (n == 0) return out;
  const double snorm = std::max(
      Eigen::JacobiSVD<CMat>(s).singularValues()(0), threshold);

  // Null spaces of S^k from the right singular vectors.
  std::vector<CMat> null(1, CMat(n, 0));
  std::vector<Index> dim(1, 0);
  for (int k = 1; k <= n; ++k) {
    Eigen::JacobiSVD<CMat> svd(matrix_power(s, k), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double thr = threshold * std::pow(snorm, k - 1);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > thr) {
        ++rank;
        if (sv(i) <= kAmbiguityBand * thr) {
          throw SpectralAmbiguity(
              "Jordan structure undecidable: singular value " + fmt(sv(i)) +
                  " of a nilpotent power lies near the threshold " + fmt(thr),
              0.0);
        }
      }
    }
    const Index d = n - rank;
    if (d <= dim.back()) {
      throw SpectralAmbiguity("Jordan structure undecidable: null spaces stall",
                              0.0);
    }
    null.push_back(svd.matrixV().rightCols(d));
    dim.push_back(d);
    if (d == n) break;
  }
  const int p = static_cast<int>(dim.size()) - 1;

  // c_k = number of chains of length >= k.
  std::vector<Index> atleast(p + 2, 0);
  for (int k = 1; k <= p; ++k) atleast[k] = dim[k] - dim[k - 1];
  for (int k = 1; k < p; ++k) {
    if (atleast[k] < atleast[k + 1]) {
      throw SpectralAmbiguity("Jordan structure undecidable: inconsistent ranks",
                              0.0);
    }
  }

  struct Chain {
    CVec top;
    int length;
  };
  std::vector<Chain> chains;
  for (int k = p; k >= 1; --k) {
    const Index fresh = atleast[k] - atleast[k + 1];
    if (fresh == 0) continue;
    // Span already accounted for at level k: ker S^{k-1} plus the level-k
    // members of longer chains.
    CMat known(n, dim[k - 1] + atleast[k + 1]);
    known.leftCols(dim[k - 1]) = null[k - 1];
    Index col = dim[k - 1];
    for (const auto& c : chains) {
      known.col(col++) = matrix_power(s, c.length - k) * c.top;
    }
    const CMat z = orthonormal(known);
    const CMat rest = null[k] - z * (z.adjoint() * null[k]);
    Eigen::JacobiSVD<CMat> svd(rest, Eigen::ComputeThinU);
    for (Index i = 0; i < fresh; ++i) chains.push_back({svd.matrixU().col(i), k});
  }

  out.basis.resize(n, n);
  Index col = 0;
  for (const auto& c : chains) {
    std::vector<CVec> vecs(c.length);
    vecs[c.length - 1] = c.top;
    for (int l = c.length - 2; l >= 0; --l) vecs[l] = s * vecs[l + 1];
    const double scale = vecs[0].norm();
    for (int l = 0; l < c.length; ++l) out.basis.col(col++) = vecs[l] / scale;
    out.cycles.push_back(c.length);
  }
  Eigen::JacobiSVD<CMat> check(out.basis);
  const auto& sv = check.singularValues();
  if (!(sv(n - 1) > 1e-10 * sv(0))) {
    throw SpectralAmbiguity("Jordan chains are numerically dependent", 0.0);
  }
  return out;
}

SpectralData analyze_spectrum(const Mat& m, const SpectralOptions& opt) {
  const Index n = m.rows();
  if (n == 0 || m.cols() != n) throw InputError("spectrum: matrix must be square");
  if (n > opt.max_dense) {
    throw InputError("spectrum: dimension " + std::to_string(n) +
                     " exceeds the dense solver budget " +
                     std::to_string(opt.max_dense));
  }
  if (!m.allFinite()) throw InputError("spectrum: non-finite matrix");
  if (!(opt.tau_eig > 0.0)) throw InputError("spectrum: tau_eig must be positive");

  SpectralData out;
  out.norm = m.cwiseAbs().colwise().sum().maxCoeff();
  out.tau_eig = opt.tau_eig;
  const double tau_abs = std::max(opt.tau_eig * out.norm,
                                  std::numeric_limits<double>::min());

  Eigen::RealSchur<Mat> schur(m);
  if (schur.info() != Eigen::Success) throw SolverError("Schur decomposition failed");
  CMat t, q;
  real_to_complex_schur(schur.matrixT(), schur.matrixU(), t, q);

  for (Index i = 0; i < n; ++i) out.eigenvalues.push_back(t(i, i));
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), eig_order);

  std::vector<bool> select(n);
  Index nu = 0;
  for (Index i = 0; i < n; ++i) {
    select[i] = t(i, i).real() >= 0.0;
    nu += select[i];
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (select[i] && !select[j] && std::abs(t(i, i) - t(j, j)) <= tau_abs) {
        throw SpectralAmbiguity(
            "an eigenvalue cluster straddles the imaginary axis; change the "
            "spectral shift",
            opt.tau_eig);
      }
    }
  }
  out.n_unstable = static_cast<int>(nu);
  if (nu == 0) {
    out.direct.resize(n, 0);
    out.adjoint.resize(n, 0);
    out.projector = Mat::Zero(n, n);
    return out;
  }

  reorder_schur(t, q, select);
  const CMat t11 = t.topLeftCorner(nu, nu);
  const CMat y = triangular_sylvester(t11, t.bottomRightCorner(n - nu, n - nu),
                                      -t.topRightCorner(nu, n - nu));
  if (!y.allFinite()) throw SolverError("spectral decoupling failed");

  std::vector<Complex> diag(nu);
  for (Index i = 0; i < nu; ++i) diag[i] = t11(i, i);
  auto groups = single_linkage(diag, tau_abs);
  std::vector<Complex> means;
  for (const auto& g : groups) {
    Complex s = 0.0;
    for (Index i : g) s += diag[i];
    means.push_back(s / double(g.size()));
  }
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return eig_order(means[a], means[b]); });

  CMat x(nu, nu);
  Index offset = 0;
  for (std::size_t gi : order) {
    const Complex lambda = means[gi];
    const int na = static_cast<int>(groups[gi].size());
    CMat shifted = t11;
    shifted.diagonal().array() -= lambda;

    // Generalized eigenspace of T11 for this cluster.
    Eigen::JacobiSVD<CMat> svd(matrix_power(shifted, na), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (na < nu) {
      const double kept = sv(nu - na - 1);
      const double dropped = sv(nu - na);
      if (!(kept > 1e3 * dropped)) {
        throw SpectralAmbiguity(
            "generalized eigenspace near " + fmt(lambda.real()) +
                " is not separated; try a larger tau_eig",
            opt.tau_eig * 1e3);
      }
    }
    const CMat z = svd.matrixV().rightCols(na);
    const CMat restricted = z.adjoint() * shifted * z;
    const double thr = 10.0 * tau_abs;
    NilpotentChains chains;
    try {
      chains = jordan_chains(restricted, thr);
    } catch (const SpectralAmbiguity& e) {
      throw SpectralAmbiguity(std::string(e.what()) + " near eigenvalue " +
                                  fmt(lambda.real()) + (lambda.imag() < 0 ? "" : "+") +
                                  fmt(lambda.imag()) + "i",
                              opt.tau_eig * 1e3);
    }
    x.middleCols(offset, na) = z * chains.basis;

    JordanCluster jc;
    jc.lambda = lambda;
    jc.geometric = static_cast<int>(chains.cycles.size());
    jc.algebraic = na;
    jc.cycles = chains.cycles;
    jc.offset = offset;
    out.clusters.push_back(std::move(jc));
    offset += na;
  }

  Eigen::PartialPivLU<CMat> xlu(x);
  CMat left(nu, n);  // Q1^H - Y Q2^H
  left = q.leftCols(nu).adjoint() - y * q.rightCols(n - nu).adjoint();
  out.direct = q.leftCols(nu) * x;
  out.adjoint = xlu.solve(left).adjoint();
  if (!out.direct.allFinite() || !out.adjoint.allFinite()) {
    throw SolverError("unstable basis is not finite");
  }
  out.projector = (out.direct * out.adjoint.adjoint()).real();
  return out;
}

SpectralData spectrum(const OseenOperator& op, const SpectralOptions& opt) {
  return analyze_spectrum(op.matrix, opt);
}

double shift_for_unstable(const std::vector<Complex>& eigenvalues, int target) {
  if (target < 1) throw InputError("target unstable count must be >= 1");
  std::vector<double> re;
  for (const auto& z : eigenvalues) re.push_back(z.real());
  std::sort(re.rbegin(), re.rend());
  // Real parts closer than this are one group (conjugate pairs, clusters).
  const double tol = 1e-8 * (1.0 + std::abs(re.empty() ? 0.0 : re.front()));
  std::size_t k = std::size_t(target);
  while (k < re.size() && re[k - 1] - re[k] <= tol) ++k;
  if (k >= re.size()) throw InputError("not enough eigenvalues for the requested unstable count");
  return -re[k - 1] + 0.25 * (re[k - 1] - re[k]);
}

UnstableSplit project_unstable(const SpectralData& s, const Vec& w) {
  if (w.size() != s.projector.rows()) throw InputError("project_unstable: size mismatch");
  Vec wn = s.projector * w;
  return {wn, w - wn};
}

}  // namespace nsstab
