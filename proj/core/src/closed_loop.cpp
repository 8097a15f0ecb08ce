#include "nsstab/closed_loop.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "nsstab/errors.hpp"

namespace nsstab {

SimMode parse_mode(const std::string& name) {
  if (name == "open") return SimMode::open;
  if (name == "linear") return SimMode::linear;
  if (name == "nonlinear") return SimMode::nonlinear;
  if (name == "original") return SimMode::original;
  throw InputError("unknown simulation mode '" + name + "'");
}

std::string mode_name(SimMode mode) {
  switch (mode) {
    case SimMode::open: return "open";
    case SimMode::linear: return "linear";
    case SimMode::nonlinear: return "nonlinear";
    case SimMode::original: return "original";
  }
  return "?";
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("sim.dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw InputError("sim.t_final must be positive");
  if (record_every < 1) throw InputError("sim.record_every must be >= 1");
  if (!(blowup_factor > 1.0)) throw InputError("sim.blowup_factor must exceed 1");
  if (!(p_time >= 1.0)) throw InputError("sim.p_time must be >= 1");
  if (!(ic.amplitude >= 0.0) || !std::isfinite(ic.amplitude))
    throw InputError("sim.ic_amplitude must be finite and >= 0");
  norms.validate();
}

nlohmann::json SimConfig::to_json() const {
  return {{"dt", dt},
          {"t_final", t_final},
          {"record_every", record_every},
          {"ic", {{"kind", ic.kind}, {"amplitude", ic.amplitude}, {"seed", ic.seed}}},
          {"blowup_factor", blowup_factor},
          {"p_time", p_time},
          {"q", norms.q},
          {"p", norms.p},
          {"scheme", "imex"}};
}

DecayFit fit_decay(const std::vector<double>& times,
                   const std::vector<double>& values, double fraction) {
  DecayFit fit;
  fit.rate = std::numeric_limits<double>::quiet_NaN();
  fit.residual = std::numeric_limits<double>::quiet_NaN();
  if (times.size() != values.size()) throw InputError("fit_decay: length mismatch");
  if (times.empty()) return fit;
  const double t_start = times.back() - fraction * (times.back() - times.front());
  std::vector<double> t, y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t_start) continue;
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) return fit;
    t.push_back(times[k]);
    y.push_back(std::log(values[k]));
  }
  if (t.size() < 10) return fit;
  const double n = double(t.size());
  double tm = 0, ym = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    tm += t[k];
    ym += y[k];
  }
  tm /= n;
  ym /= n;
  double stt = 0, sty = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    stt += (t[k] - tm) * (t[k] - tm);
    sty += (t[k] - tm) * (y[k] - ym);
  }
  if (stt <= 0.0) return fit;
  const double slope = sty / stt;
  double ss = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = y[k] - (ym + slope * (t[k] - tm));
    ss += r * r;
  }
  fit.rate = -slope;
  fit.residual = std::sqrt(ss / n);
  fit.ok = true;
  return fit;
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Trapezoid rule for (int f^p dt)^{1/p}.
double lp_in_time(const std::vector<double>& t, const std::vector<double>& f, double p) {
  double acc = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k)
    acc += 0.5 * (t[k] - t[k - 1]) * (std::pow(f[k], p) + std::pow(f[k - 1], p));
  return std::pow(acc, 1.0 / p);
}

double json_number(double x) {
  return std::isfinite(x) ? x : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void SimTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << "t,lq,w1q,w2q,besov,control,chi\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << num(times[k]) << ',' << num(lq[k]) << ',' << num(w1q[k]) << ','
        << num(w2q[k]) << ',' << num(besov[k]) << ',' << num(control[k]) << ','
        << num(chi[k]) << '\n';
  }
  if (!out) throw InputError("write failed for " + path.string());
}

nlohmann::json SimTrace::summary_json() const {
  nlohmann::json j;
  j["mode"] = mode_name(mode);
  j["samples"] = times.size();
  j["steps"] = steps;
  j["dt"] = dt;
  j["z0_norm"] = z0_norm;
  j["blowup"] = blowup;
  j["fit_ok"] = fit.ok;
  j["fitted_rate"] = json_number(fit.rate);
  j["growth_rate"] = json_number(-fit.rate);
  j["fit_residual"] = json_number(fit.residual);
  j["pressure_norm_lp"] = pressure_norm_lp;
  j["w2q_norm_lp"] = w2q_norm_lp;
  j["w2q_norm_lp_note"] =
      "L^p in time of the recorded W^{2,q} norm; stand-in for the maximal regularity norm";
  j["final_lq"] = lq.empty() ? 0.0 : json_number(lq.back());
  return j;
}

PressureField pressure_solve(const Discretization& disc, const VelocityField& rhs) {
  PressureField chi = disc.projector.potential(rhs);
  chi.normalize();
  return chi;
}

ClosedLoop::ClosedLoop(OseenOperator op, SpectralData spectral,
                       std::optional<FeedbackLaw> law, OmegaMask mask,
                       std::optional<VelocityField> force)
    : op_(std::move(op)),
      s_(std::move(spectral)),
      law_(std::move(law)),
      mask_(std::move(mask)),
      force_(std::move(force)) {
  const Discretization& d = *op_.disc;
  if (mask_.grid() != d.grid) throw InputError("closed loop: mask grid mismatch");
  if (s_.projector.rows() != op_.matrix.rows())
    throw InputError("closed loop: spectral data does not match the operator");
  if (law_ && law_->actuators.fields.rows() != op_.matrix.rows())
    throw InputError("closed loop: law does not match the operator");
  m_omega_ = windowed_gram(d, mask_);
  y_e_coords_ = d.basis.coordinates(op_.y_e);
  if (force_) {
    if (force_->grid() != d.grid) throw InputError("closed loop: force grid mismatch");
    force_coords_ = d.basis.coordinates(*force_);
  }
}

Mat ClosedLoop::generator() const {
  if (!law_) return op_.matrix;
  return op_.matrix + law_->feedback_operator(s_, m_omega_);
}

double ClosedLoop::dt_bound() const {
  const Index n = op_.matrix.rows();
  Mat e = op_.sigma * Mat::Identity(n, n) - op_.advection;
  if (law_) e += law_->feedback_operator(s_, m_omega_);
  // Power iteration on E^T E; the fixed start keeps the bound deterministic.
  Vec x = Vec::Ones(n).normalized();
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vec y = e.transpose() * (e * x);
    const double nrm = y.norm();
    if (nrm == 0.0) return std::numeric_limits<double>::infinity();
    x = y / nrm;
    if (std::abs(nrm - est) <= 1e-10 * nrm) {
      est = nrm;
      break;
    }
    est = nrm;
  }
  // Power iteration approaches the top singular value from below.
  return 0.5 / (1.001 * std::sqrt(est));
}

Vec ClosedLoop::feedback(const Vec& z) const {
  if (!law_) return Vec::Zero(z.size());
  return m_omega_ * law_->real_injection(s_, m_omega_, z);
}

Vec ClosedLoop::nonlinear_term(const Vec& z) const {
  const SolenoidalBasis& b = op_.disc->basis;
  const VelocityField f = b.field(z);
  return b.coordinates(advection(f, f));
}

VelocityField ClosedLoop::control_field(const Vec& z) const {
  const SolenoidalBasis& b = op_.disc->basis;
  if (!law_) return VelocityField(b.grid());
  return mask_.apply(b.field(law_->real_injection(s_, m_omega_, z)));
}

PressureField ClosedLoop::pressure(const Vec& z, bool nonlinear) const {
  const Discretization& d = *op_.disc;
  const VelocityField zf = d.basis.field(z);
  // sigma z is solenoidal and has no pressure part.
  VelocityField rhs = op_.nu * laplacian(zf);
  rhs -= advection(op_.y_e, zf);
  rhs -= advection(zf, op_.y_e);
  if (nonlinear) rhs -= advection(zf, zf);
  if (law_) rhs += control_field(z);
  return pressure_solve(d, rhs);
}

Vec ClosedLoop::initial_state(const InitialCondition& ic) const {
  const Index n = op_.matrix.rows();
  Vec z;
  if (ic.kind == "zero") return Vec::Zero(n);
  if (ic.kind == "unstable") {
    if (s_.n_unstable == 0) throw InputError("ic 'unstable' needs an unstable eigenvalue");
    z = s_.direct.col(0).real();
    if (z.norm() < 1e-12) z = s_.direct.col(0).imag();
  } else if (ic.kind == "stable" || ic.kind == "random") {
    std::mt19937_64 rng(ic.seed);
    std::normal_distribution<double> nd;
    z.resize(n);
    for (Index k = 0; k < n; ++k) z[k] = nd(rng);
    if (ic.kind == "stable") z = project_unstable(s_, z).zeta_n;
  } else {
    throw InputError("unknown initial condition kind '" + ic.kind + "'");
  }
  const double nrm = z.norm();
  if (nrm == 0.0) throw InputError("initial condition has zero norm");
  return z * (ic.amplitude / nrm);
}

ClosedLoop::Integrator::Integrator(const ClosedLoop& loop, double dt, bool feedback)
    : loop_(&loop), dt_(dt), feedback_(feedback && loop.has_law()) {
  const Mat& a = loop.op_.disc->stokes;
  llt_.compute(Mat::Identity(a.rows(), a.cols()) + dt * loop.op_.nu * a);
  if (llt_.info() != Eigen::Success) throw SolverError("implicit Stokes factorization failed");
}

ClosedLoop::Integrator ClosedLoop::integrator(double dt, bool feedback) const {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  return Integrator(*this, dt, feedback);
}

Vec ClosedLoop::Integrator::implicit(const Vec& rhs) const { return llt_.solve(rhs); }

Vec ClosedLoop::Integrator::explicit_linear(const Vec& w) const {
  Vec e = loop_->op_.sigma * w - loop_->op_.advection * w;
  if (feedback_) e += loop_->feedback(w);
  return e;
}

Vec ClosedLoop::Integrator::step_linear(const Vec& w) const {
  return implicit(w + dt_ * explicit_linear(w));
}

Vec ClosedLoop::Integrator::step_nonlinear(const Vec& z) const {
  return implicit(z + dt_ * (explicit_linear(z) - loop_->nonlinear_term(z)));
}

Vec ClosedLoop::Integrator::step_original(const Vec& y) const {
  const ClosedLoop& l = *loop_;
  if (!l.force_) throw InputError("original mode needs the body force");
  const Vec dev = y - l.y_e_coords_;
  Vec e = l.force_coords_ - l.nonlinear_term(y) + l.op_.sigma * dev;
  if (feedback_) e += l.feedback(dev);
  return implicit(y + dt_ * e);
}

SimTrace ClosedLoop::simulate(SimMode mode, const SimConfig& cfg) const {
  cfg.validate();
  const double bound = dt_bound();
  const bool feedback = mode != SimMode::open;
  if (feedback && !law_) throw InputError(mode_name(mode) + " mode needs a feedback law");
  if (cfg.dt > bound) {
    throw InputError("sim.dt = " + num(cfg.dt) + " exceeds the explicit-part bound " +
                     num(bound));
  }
  const Discretization& d = *op_.disc;
  const Integrator stepper = integrator(cfg.dt, feedback);
  const bool nonlinear = mode == SimMode::nonlinear || mode == SimMode::original;
  std::optional<BesovProxy> besov;
  if (cfg.besov) besov.emplace(op_.disc, cfg.norms);
  const double q = cfg.norms.q;

  SimTrace tr;
  tr.mode = mode;
  tr.dt = cfg.dt;
  const Vec z0 = initial_state(cfg.ic);
  tr.z0_norm = z0.norm();
  Vec state = mode == SimMode::original ? Vec(y_e_coords_ + z0) : z0;

  auto perturbation = [&](const Vec& x) -> Vec {
    return mode == SimMode::original ? Vec(x - y_e_coords_) : x;
  };
  auto record = [&](double t, const Vec& x) {
    const Vec z = perturbation(x);
    const VelocityField f = d.basis.field(z);
    tr.times.push_back(t);
    tr.lq.push_back(lq_norm(f, q));
    tr.w1q.push_back(sobolev_norm(f, q, 1));
    tr.w2q.push_back(sobolev_norm(f, q, 2));
    tr.besov.push_back(besov ? (*besov)(f) : 0.0);
    tr.control.push_back(feedback ? std::sqrt(l2_dot(control_field(z), control_field(z)))
                                  : 0.0);
    tr.chi.push_back(cfg.pressure ? sobolev_norm(pressure(z, nonlinear), q, 1) : 0.0);
  };

  const long steps = std::lround(cfg.t_final / cfg.dt);
  record(0.0, state);
  const double threshold = cfg.blowup_factor * tr.lq.front();
  for (long k = 1; k <= steps; ++k) {
    switch (mode) {
      case SimMode::open:
      case SimMode::linear: state = stepper.step_linear(state); break;
      case SimMode::nonlinear: state = stepper.step_nonlinear(state); break;
      case SimMode::original: state = stepper.step_original(state); break;
    }
    tr.steps = int(k);
    const bool finite = state.allFinite();
    if (!finite) {
      tr.blowup = true;
      break;
    }
    if (k % cfg.record_every == 0 || k == steps) {
      record(k * cfg.dt, state);
      if (threshold > 0.0 && !(tr.lq.back() <= threshold)) {
        tr.blowup = true;
        break;
      }
    }
  }

  if (tr.blowup) {
    tr.fit = DecayFit{};
    tr.fit.rate = tr.fit.residual = std::numeric_limits<double>::quiet_NaN();
  } else {
    tr.fit = fit_decay(tr.times, tr.lq);
  }
  tr.pressure_norm_lp = lp_in_time(tr.times, tr.chi, cfg.p_time);
  tr.w2q_norm_lp = lp_in_time(tr.times, tr.w2q, cfg.p_time);
  return tr;
}

}  // namespace nsstab
