#include "nsstab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "nsstab/errors.hpp"
#include "nsstab/io.hpp"

namespace nsstab::pipeline {

namespace {

using nlohmann::json;

constexpr const char* kEquilibrium = "equilibrium.json";
constexpr const char* kVelocity = "equilibrium_velocity.bin";
constexpr const char* kPressure = "equilibrium_pressure.bin";
constexpr const char* kSpectrum = "spectrum.json";
constexpr const char* kDirect = "spectrum_direct.bin";
constexpr const char* kAdjoint = "spectrum_adjoint.bin";
constexpr const char* kController = "controller.json";
constexpr const char* kActuators = "controller_actuators.bin";
constexpr const char* kCoefficients = "controller_coefficients.bin";
constexpr const char* kObservers = "controller_observers.bin";

void write_json(const fs::path& path, const json& j) { io::write_text(path, dump(j)); }

json read_json(const fs::path& path) {
  if (!fs::is_regular_file(path))
    throw InputError("missing artifact " + path.string() + "; run the upstream stage first");
  try {
    return json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw InputError("malformed artifact " + path.string() + ": " + e.what());
  }
}

void check_files(const json& j, const fs::path& dir) {
  for (const auto& [name, hash] : j.at("files").items()) {
    const fs::path p = dir / name;
    if (!fs::is_regular_file(p)) throw InputError("missing artifact block " + p.string());
    if (io::file_hash(p) != hash.get<std::string>())
      throw InputError("hash mismatch for " + p.string() + "; artifact altered");
  }
}

void check_upstream(const json& j, const fs::path& dir) {
  for (const auto& [name, hash] : j.at("upstream").items()) {
    const fs::path p = dir / name;
    if (!fs::is_regular_file(p)) throw InputError("missing upstream artifact " + p.string());
    if (io::file_hash(p) != hash.get<std::string>())
      throw InputError(p.string() + " changed after downstream artifacts were built; rerun");
  }
}

// Loads a JSON artifact and verifies its blocks and its upstream link.
json load_artifact(const fs::path& dir, const char* name) {
  json j = read_json(dir / name);
  try {
    check_files(j, dir);
    check_upstream(j, dir);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed artifact ") + name + ": " + e.what());
  }
  return j;
}

json equilibrium_inputs(const RunConfig& cfg) {
  json j = cfg.to_json();
  json p = j["physics"];
  p.erase("sigma");
  p.erase("target_unstable");
  return {{"grid", j["grid"]}, {"physics", p}};
}

void require_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw InputError("cannot create output directory " + out.string());
}

struct Loaded {
  DiscretizationPtr disc;
  EquilibriumPair eq;
  SpectralData s;
  double sigma = 0.0;
};

EquilibriumPair load_equilibrium(const RunConfig& cfg, const fs::path& out,
                                 const DiscretizationPtr& disc, json& j) {
  j = load_artifact(out, kEquilibrium);
  if (j.at("inputs") != equilibrium_inputs(cfg))
    throw InputError("config grid/physics differ from the equilibrium artifact; rerun steady");
  const auto vel = io::read_matrix(out / kVelocity);
  const auto pre = io::read_matrix(out / kPressure);
  const Grid& g = disc->grid;
  if (vel.data.rows() != g.num_faces() || pre.data.rows() != g.num_cells())
    throw InputError("equilibrium blocks do not match the grid");
  VelocityField y(g, vel.data.col(0));
  PressureField pi(g, pre.data.col(0));
  VelocityField f = make_force(g, cfg.force);
  return EquilibriumPair{y, pi, f, cfg.nu, j.at("residual"), j.at("newton_steps"), {}};
}

Loaded load_through_spectrum(const RunConfig& cfg, const fs::path& out) {
  auto disc = Discretization::create(cfg.grid);
  json eq_json;
  EquilibriumPair eq = load_equilibrium(cfg, out, disc, eq_json);
  const json sj = load_artifact(out, kSpectrum);
  if (sj.at("tau_eig").get<double>() != cfg.tau_eig ||
      sj.at("sigma_setting") != cfg.to_json()["physics"]["sigma"] ||
      sj.at("target_unstable").get<int>() != cfg.target_unstable)
    throw InputError("config spectrum settings differ from the spectrum artifact; rerun spectrum");
  // A block with no columns cannot carry its row count.
  auto block = [&](const char* name) {
    if (sj.at("summary").at("N").get<int>() == 0) return CMat(disc->basis.n_dof(), 0);
    return io::join_complex(io::read_matrix(out / name).data);
  };
  SpectralData s = spectral_from_parts(sj.at("summary"), block(kDirect), block(kAdjoint));
  return Loaded{disc, std::move(eq), std::move(s), sj.at("sigma").get<double>()};
}

double resolve_gamma(const RunConfig& cfg, const SpectralData& s) {
  if (cfg.gamma) return *cfg.gamma;
  const Complex stable = s.first_stable();
  if (!std::isfinite(stable.real()))
    throw InputError("control.gamma = auto needs a stable eigenvalue");
  const double g = std::abs(stable.real()) - cfg.epsilon;
  if (!(g > 0)) throw InputError("control.gamma = auto gives a non-positive rate; lower epsilon");
  return g;
}

SynthesisOptions synthesis_options(const RunConfig& cfg, double gamma) {
  SynthesisOptions opt;
  opt.gamma = gamma;
  opt.delta_ratio = cfg.delta_ratio;
  opt.attempts = cfg.attempts;
  opt.seed = cfg.seed;
  opt.tau_rank = cfg.tau_rank;
  opt.K = cfg.K;
  return opt;
}

std::string hex_name(const char* prefix, SimMode mode, int job, bool sweep) {
  std::string name = std::string(prefix) + mode_name(mode);
  if (sweep) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%02d", job);
    name += buf;
  }
  return name;
}

}  // namespace

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int exit_code(const std::exception& e) {
  if (dynamic_cast<const SpectralAmbiguity*>(&e)) return 3;
  if (dynamic_cast<const SynthesisError*>(&e)) return 4;
  if (dynamic_cast<const NothingToStabilize*>(&e)) return 5;
  if (dynamic_cast<const InputError*>(&e)) return 2;
  return 1;
}

nlohmann::json cmd_steady(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  require_dir(out);
  auto disc = Discretization::create(cfg.grid);
  const SteadySolver solver(disc);
  const VelocityField f = make_force(cfg.grid, cfg.force);
  SteadyOptions opt;
  opt.tol = cfg.newton_tol;
  opt.max_iters = cfg.newton_max_iters;
  const EquilibriumPair eq =
      cfg.nu_start > cfg.nu
          ? solver.continuation(f, cfg.nu_start, cfg.nu, cfg.continuation_steps, opt)
          : solver.solve(f, cfg.nu, opt);

  io::write_matrix(out / kVelocity, cfg.grid.nx, cfg.grid.ny, eq.y_e.data());
  io::write_matrix(out / kPressure, cfg.grid.nx, cfg.grid.ny, eq.pi_e.data());
  json j;
  j["artifact"] = "equilibrium";
  j["inputs"] = equilibrium_inputs(cfg);
  j["nu"] = eq.nu;
  j["residual"] = eq.residual;
  j["newton_steps"] = eq.newton_steps;
  j["history"] = eq.history;
  j["velocity_l2"] = std::sqrt(l2_dot(eq.y_e, eq.y_e));
  j["velocity_max"] = eq.y_e.data().lpNorm<Eigen::Infinity>();
  j["upstream"] = json::object();
  j["files"] = {{kVelocity, io::file_hash(out / kVelocity)},
                {kPressure, io::file_hash(out / kPressure)}};
  write_json(out / kEquilibrium, j);
  return j;
}

nlohmann::json cmd_spectrum(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  auto disc = Discretization::create(cfg.grid);
  json eq_json;
  const EquilibriumPair eq = load_equilibrium(cfg, out, disc, eq_json);
  const OseenOperator base = assemble_oseen(disc, eq, 0.0);
  double sigma = 0.0;
  if (cfg.sigma) {
    sigma = *cfg.sigma;
  } else {
    Eigen::EigenSolver<Mat> es(base.matrix, false);
    if (es.info() != Eigen::Success) throw SolverError("eigenvalue solve failed");
    const auto& ev = es.eigenvalues();
    sigma = std::max(0.0, shift_for_unstable({ev.data(), ev.data() + ev.size()},
                                             cfg.target_unstable));
  }
  SpectralOptions sopt;
  sopt.tau_eig = cfg.tau_eig;
  const SpectralData s = spectrum(with_shift(base, sigma), sopt);

  io::write_matrix(out / kDirect, cfg.grid.nx, cfg.grid.ny, io::split_complex(s.direct));
  io::write_matrix(out / kAdjoint, cfg.grid.nx, cfg.grid.ny, io::split_complex(s.adjoint));
  json j;
  j["artifact"] = "spectrum";
  j["sigma"] = sigma;
  j["sigma_setting"] = cfg.to_json()["physics"]["sigma"];
  j["target_unstable"] = cfg.target_unstable;
  j["tau_eig"] = cfg.tau_eig;
  const Complex fs_ = s.first_stable();
  j["first_stable"] = std::isfinite(fs_.real()) ? json{fs_.real(), fs_.imag()} : json(nullptr);
  int sum = 0;
  for (const auto& c : s.clusters) sum += c.algebraic;
  j["multiplicity_sum"] = sum;
  j["summary"] = s.summary_json();
  j["upstream"] = {{kEquilibrium, io::file_hash(out / kEquilibrium)}};
  j["files"] = {{kDirect, io::file_hash(out / kDirect)}, {kAdjoint, io::file_hash(out / kAdjoint)}};
  write_json(out / kSpectrum, j);
  return j;
}

nlohmann::json cmd_synthesize(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const Loaded l = load_through_spectrum(cfg, out);
  if (l.s.n_unstable == 0) throw NothingToStabilize("nothing to stabilize: N = 0");
  const double gamma = resolve_gamma(cfg, l.s);
  const OmegaMask mask = cfg.mask();
  const FeedbackLaw law = synthesize(l.s, windowed_gram(*l.disc, mask), synthesis_options(cfg, gamma));

  io::write_matrix(out / kActuators, cfg.grid.nx, cfg.grid.ny, io::split_complex(law.actuators.fields));
  io::write_matrix(out / kCoefficients, cfg.grid.nx, cfg.grid.ny,
                   io::split_complex(law.actuators.coefficients));
  io::write_matrix(out / kObservers, cfg.grid.nx, cfg.grid.ny, io::split_complex(law.observers));
  json j;
  j["artifact"] = "controller";
  j["gamma0"] = gamma;
  j["gamma_setting"] = cfg.to_json()["control"]["gamma"];
  j["control"] = cfg.to_json()["control"];
  j["omega"] = cfg.to_json()["omega"];
  j["max_geometric"] = l.s.max_geometric();
  j["law"] = law.summary_json();
  j["upstream"] = {{kSpectrum, io::file_hash(out / kSpectrum)}};
  j["files"] = {{kActuators, io::file_hash(out / kActuators)},
                {kCoefficients, io::file_hash(out / kCoefficients)},
                {kObservers, io::file_hash(out / kObservers)}};
  write_json(out / kController, j);
  return j;
}

std::vector<nlohmann::json> cmd_simulate(const RunConfig& cfg, const fs::path& out,
                                         SimMode mode, int workers) {
  cfg.validate();
  if (workers < 0) throw InputError("--sweep needs a worker count >= 1");
  const Loaded l = load_through_spectrum(cfg, out);
  const OseenOperator op = with_shift(assemble_oseen(l.disc, l.eq, 0.0), l.sigma);
  const OmegaMask mask = cfg.mask();
  const bool sweep = workers > 0;

  std::optional<FeedbackLaw> stored;
  std::string upstream_name = kSpectrum;
  const bool need_law = mode != SimMode::open;
  if (need_law && !(sweep && !cfg.sweep_gammas.empty())) {
    json cj = load_artifact(out, kController);
    if (cj.at("omega") != cfg.to_json()["omega"] || cj.at("control") != cfg.to_json()["control"])
      throw InputError("config control/omega settings differ from the controller; rerun synthesize");
    stored = feedback_from_parts(cj.at("law"),
                                 io::join_complex(io::read_matrix(out / kActuators).data),
                                 io::join_complex(io::read_matrix(out / kCoefficients).data),
                                 io::join_complex(io::read_matrix(out / kObservers).data));
    upstream_name = kController;
  }

  struct Job {
    std::optional<double> gamma;
    double amplitude;
  };
  std::vector<Job> jobs;
  if (!sweep) {
    jobs.push_back({std::nullopt, cfg.sim.ic.amplitude});
  } else {
    std::vector<std::optional<double>> gammas;
    for (double g : cfg.sweep_gammas) gammas.emplace_back(g);
    if (gammas.empty()) gammas.emplace_back(std::nullopt);
    std::vector<double> amps = cfg.sweep_amplitudes;
    if (amps.empty()) amps.push_back(cfg.sim.ic.amplitude);
    for (const auto& g : gammas)
      for (double a : amps) jobs.push_back({g, a});
  }

  const std::string upstream_hash = io::file_hash(out / upstream_name);
  std::vector<json> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto run_job = [&](std::size_t k) {
    try {
      const Job& job = jobs[k];
      std::optional<FeedbackLaw> law = stored;
      if (need_law && job.gamma) {
        law = synthesize(l.s, windowed_gram(*l.disc, mask), synthesis_options(cfg, *job.gamma));
      }
      const ClosedLoop loop(op, l.s, law, mask, l.eq.force);
      SimConfig sc = cfg.sim;
      sc.ic.amplitude = job.amplitude;
      const SimTrace tr = loop.simulate(mode, sc);
      const std::string stem = hex_name("trace_", mode, int(k), sweep);
      tr.write_csv(out / (stem + ".csv"));
      json j;
      j["artifact"] = "trace";
      j["job"] = k;
      j["amplitude"] = job.amplitude;
      j["gamma0"] = law ? json(law->gamma) : json(nullptr);
      j["trace"] = tr.summary_json();
      j["sim"] = sc.to_json();
      j["upstream"] = {{upstream_name, upstream_hash}};
      j["files"] = {{stem + ".csv", io::file_hash(out / (stem + ".csv"))}};
      write_json(out / (stem + ".json"), j);
      results[k] = std::move(j);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  if (!sweep) {
    run_job(0);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, int(jobs.size()));
    for (int w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) run_job(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

namespace {

// Parses a trace CSV; empty optional when it is not a well-formed trace.
std::optional<std::pair<std::vector<double>, std::vector<double>>> read_trace(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line != "t,lq,w1q,w2q,besov,control,chi") return std::nullopt;
  std::vector<double> t, lq;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) return std::nullopt;
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
    if (row.size() != 7) return std::nullopt;
    t.push_back(row[0]);
    lq.push_back(row[1]);
  }
  if (t.empty()) return std::nullopt;
  return std::make_pair(t, lq);
}

}  // namespace

nlohmann::json cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("report: no such directory " + dir.string());
  std::vector<fs::path> traces;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("trace_", 0) == 0 && e.path().extension() == ".json") traces.push_back(e.path());
  }
  if (traces.empty()) throw InputError("report: no traces in " + dir.string());
  std::sort(traces.begin(), traces.end());

  json rows = json::array(), skipped = json::array();
  for (const auto& p : traces) {
    const std::string name = p.filename().string();
    try {
      const json j = json::parse(io::read_text(p));
      const auto& files = j.at("files");
      const std::string csv = files.begin().key();
      const bool intact = fs::is_regular_file(dir / csv) &&
                          io::file_hash(dir / csv) == files.begin().value().get<std::string>();
      const auto data = intact ? read_trace(dir / csv) : std::nullopt;
      if (!data) {
        std::cerr << "warning: skipping " << name << ": trace CSV missing, altered or corrupt\n";
        skipped.push_back(name);
        continue;
      }
      const DecayFit fit = fit_decay(data->first, data->second);
      const auto& tr = j.at("trace");
      const bool blowup = tr.at("blowup");
      rows.push_back({{"trace", csv},
                      {"mode", tr.at("mode")},
                      {"amplitude", j.at("amplitude")},
                      {"gamma0", j.at("gamma0")},
                      {"gamma_fit", fit.ok && !blowup ? json(fit.rate) : json(nullptr)},
                      {"fit_residual", fit.ok && !blowup ? json(fit.residual) : json(nullptr)},
                      {"blowup", blowup},
                      {"pressure_norm_lp", tr.at("pressure_norm_lp")}});
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << name << ": " << e.what() << "\n";
      skipped.push_back(name);
    }
  }

  // gamma_fit against gamma0 for each (mode, amplitude) group with >= 2 rows.
  std::map<std::pair<std::string, double>, std::vector<std::pair<double, double>>> groups;
  for (const auto& r : rows) {
    if (r["gamma0"].is_null()) continue;
    const double fit = r["gamma_fit"].is_null() ? -INFINITY : r["gamma_fit"].get<double>();
    groups[{r["mode"], r["amplitude"]}].emplace_back(r["gamma0"], fit);
  }
  json table = json::array();
  bool monotone = true;
  bool compared = false;
  for (auto& [key, v] : groups) {
    std::sort(v.begin(), v.end());
    bool mono = true;
    for (std::size_t k = 1; k < v.size(); ++k)
      if (!(v[k].second > v[k - 1].second)) mono = false;
    if (v.size() >= 2) {
      compared = true;
      monotone = monotone && mono;
    }
    for (const auto& [g0, gf] : v)
      table.push_back({{"mode", key.first}, {"amplitude", key.second}, {"gamma0", g0},
                       {"gamma_fit", std::isfinite(gf) ? json(gf) : json(nullptr)}});
  }

  json report;
  report["rows"] = rows;
  report["skipped"] = skipped;
  report["gamma_table"] = table;
  report["gamma_monotone"] = compared ? json(monotone) : json(nullptr);
  write_json(dir / "report.json", report);

  std::ofstream csv(dir / "report_rates.csv", std::ios::trunc);
  csv << "gamma0,gamma_fit,mode,amplitude,pressure_norm_lp,trace\n";
  char buf[64];
  auto num = [&](const json& x) -> std::string {
    if (x.is_null()) return "nan";
    std::snprintf(buf, sizeof buf, "%.17g", x.get<double>());
    return buf;
  };
  for (const auto& r : rows) {
    csv << num(r["gamma0"]) << ',' << num(r["gamma_fit"]) << ',' << r["mode"].get<std::string>()
        << ',' << num(r["amplitude"]) << ',' << num(r["pressure_norm_lp"]) << ','
        << r["trace"].get<std::string>() << '\n';
  }
  return report;
}

}  // namespace nsstab::pipeline
