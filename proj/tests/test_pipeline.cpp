#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "nsstab/config.hpp"
#include "nsstab/errors.hpp"
#include "nsstab/io.hpp"
#include "nsstab/pipeline.hpp"

using namespace nsstab;
namespace fs = std::filesystem;
namespace pl = nsstab::pipeline;

namespace {

const char* kSmall = R"(
# small vortex case
grid.nx = 12
grid.ny = 12
grid.lx = 1.3
physics.nu = 0.1
physics.force = vortex
physics.force_amplitude = 20
physics.sigma = auto
physics.target_unstable = 2
omega.x0 = 0.2
omega.x1 = 1.1
omega.y0 = 0.2
omega.y1 = 0.8
control.delta_ratio = 0.5
sim.dt = 2e-4
sim.t_final = 0.4
sim.record_every = 20
sim.besov = false
)";

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("nsstab_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string bytes(const fs::path& p) { return io::read_text(p); }

void run_through_synthesis(const RunConfig& cfg, const fs::path& out) {
  pl::cmd_steady(cfg, out);
  pl::cmd_spectrum(cfg, out);
  pl::cmd_synthesize(cfg, out);
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndAuto) {
  RunConfig c = RunConfig::parse(std::string(kSmall) +
                                 "sweep.gammas = 1, 2 # trailing comment\n"
                                 "; alternative comment\n"
                                 "control.gamma = 1.5\n"
                                 "control.gamma = auto\n"
                                 "norms.strict = false\n"
                                 "omega.smoothing = mollified\n");
  EXPECT_EQ(c.grid.nx, 12);
  EXPECT_DOUBLE_EQ(c.grid.lx, 1.3);
  EXPECT_EQ(c.force.kind, "vortex");
  EXPECT_FALSE(c.sigma.has_value());
  EXPECT_FALSE(c.gamma.has_value());  // last value wins
  EXPECT_EQ(c.sweep_gammas, (std::vector<double>{1.0, 2.0}));
  EXPECT_FALSE(c.norms.strict);
  EXPECT_FALSE(c.sim.norms.strict);
  EXPECT_EQ(c.omega_smoothing, OmegaMask::Smoothing::mollified);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.to_json()["physics"]["sigma"], "auto");
  EXPECT_EQ(c.to_json()["control"]["gamma"], "auto");
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(RunConfig::parse("grid.nz = 3\n"), InputError);
  EXPECT_THROW(RunConfig::parse("grid.nx = twelve\n"), InputError);
  EXPECT_THROW(RunConfig::parse("grid.lx = 1.0x\n"), InputError);
  EXPECT_THROW(RunConfig::parse("just words\n"), InputError);
  EXPECT_THROW(RunConfig::parse("norms.strict = maybe\n"), InputError);
  EXPECT_THROW(RunConfig::parse("physics.nu =\n"), InputError);
  EXPECT_THROW(RunConfig::load("/definitely/not/here.ini"), InputError);
  // omega must sit strictly inside the box
  EXPECT_THROW(RunConfig::parse(std::string(kSmall) + "omega.x1 = 1.3\n").validate(), InputError);
  EXPECT_THROW(RunConfig::parse(std::string(kSmall) + "omega.y0 = 0\n").validate(), InputError);
  // inadmissible norm pair in strict mode
  EXPECT_THROW(RunConfig::parse(std::string(kSmall) + "norms.p = 1.3\n").validate(), InputError);
  EXPECT_NO_THROW(
      RunConfig::parse(std::string(kSmall) + "norms.p = 1.3\nnorms.strict = false\n").validate());
  EXPECT_THROW(RunConfig::parse(std::string(kSmall) + "physics.force = tornado\n").validate(),
               InputError);
}

TEST(Pipeline, ExitCodes) {
  EXPECT_EQ(pl::exit_code(InputError("x")), 2);
  EXPECT_EQ(pl::exit_code(SpectralAmbiguity("x", 1.0)), 3);
  EXPECT_EQ(pl::exit_code(SynthesisError("x")), 4);
  EXPECT_EQ(pl::exit_code(NothingToStabilize("x")), 5);
  EXPECT_EQ(pl::exit_code(SolverError("x")), 1);
}

TEST(Pipeline, ConservativeForceGivesRestState) {
  TempDir dir("conservative");
  RunConfig cfg = RunConfig::parse(
      "grid.nx = 16\ngrid.ny = 16\nphysics.force = conservative\n"
      "physics.force_amplitude = 2\nphysics.sigma = 0\n");
  const auto j = pl::cmd_steady(cfg, dir.path());
  EXPECT_LE(j["velocity_max"].get<double>(), 1e-10);
  const auto p = io::read_matrix(dir.path() / "equilibrium_pressure.bin");
  PressureField g = conservative_potential(cfg.grid, cfg.force);
  g.normalize();
  EXPECT_LT((p.data.col(0) - g.data()).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Pipeline, StokesHasNothingToStabilize) {
  TempDir dir("stokes");
  RunConfig cfg = RunConfig::parse("grid.nx = 10\ngrid.ny = 10\nphysics.sigma = 0\n");
  pl::cmd_steady(cfg, dir.path());
  const auto s = pl::cmd_spectrum(cfg, dir.path());
  EXPECT_EQ(s["summary"]["N"], 0);
  try {
    pl::cmd_synthesize(cfg, dir.path());
    FAIL() << "expected NothingToStabilize";
  } catch (const NothingToStabilize& e) {
    EXPECT_EQ(pl::exit_code(e), 5);
  }
}

TEST(Pipeline, SpectrumAndSynthesisArtifacts) {
  TempDir dir("artifacts");
  const RunConfig cfg = RunConfig::parse(kSmall);
  pl::cmd_steady(cfg, dir.path());
  const auto s = pl::cmd_spectrum(cfg, dir.path());
  const int n = s["summary"]["N"];
  EXPECT_GE(n, 2);
  EXPECT_EQ(s["multiplicity_sum"].get<int>(), n);
  const auto& ev = s["summary"]["eigenvalues"];
  for (std::size_t k = 1; k < ev.size(); ++k)
    EXPECT_GE(ev[k - 1][0].get<double>(), ev[k][0].get<double>());

  const auto c = pl::cmd_synthesize(cfg, dir.path());
  EXPECT_EQ(c["law"]["K"], s["summary"]["max_geometric"]);
  const double gamma0 = c["gamma0"];
  EXPECT_NEAR(gamma0, std::abs(s["first_stable"][0].get<double>()) - cfg.epsilon, 1e-12);
  EXPECT_LE(c["law"]["placed_max_real"].get<double>(), -gamma0 + 1e-6);
}

TEST(Pipeline, DeterministicArtifacts) {
  TempDir a("det_a"), b("det_b");
  const RunConfig cfg = RunConfig::parse(kSmall);
  for (const auto* d : {&a, &b}) {
    run_through_synthesis(cfg, d->path());
    pl::cmd_simulate(cfg, d->path(), SimMode::nonlinear);
  }
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a.path())) {
    const fs::path other = b.path() / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(bytes(e.path()), bytes(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_GE(compared, 12);
}

TEST(Pipeline, HashChainDetectsTampering) {
  TempDir dir("tamper");
  const RunConfig cfg = RunConfig::parse(kSmall);
  run_through_synthesis(cfg, dir.path());
  // Altered binary block.
  const fs::path direct = dir.path() / "spectrum_direct.bin";
  const std::string original = bytes(direct);
  std::string altered = original;
  altered[altered.size() - 1] ^= 1;
  io::write_text(direct, altered);
  EXPECT_THROW(pl::cmd_synthesize(cfg, dir.path()), InputError);
  io::write_text(direct, original);
  EXPECT_NO_THROW(pl::cmd_synthesize(cfg, dir.path()));
  // Upstream JSON rewritten after downstream artifacts were built.
  const fs::path eq = dir.path() / "equilibrium.json";
  io::write_text(eq, bytes(eq) + " ");
  EXPECT_THROW(pl::cmd_synthesize(cfg, dir.path()), InputError);
}

TEST(Pipeline, ConfigDriftIsRejected) {
  TempDir dir("drift");
  const RunConfig cfg = RunConfig::parse(kSmall);
  pl::cmd_steady(cfg, dir.path());
  RunConfig other = RunConfig::parse(std::string(kSmall) + "physics.nu = 0.2\n");
  EXPECT_THROW(pl::cmd_spectrum(other, dir.path()), InputError);
  EXPECT_THROW(pl::cmd_synthesize(cfg, dir.path()), InputError);  // no spectrum yet
}

TEST(Pipeline, OpenLoopGrowsAndSweepsAreIsolated) {
  TempDir dir("sweep");
  RunConfig cfg = RunConfig::parse(std::string(kSmall) +
                                   "sweep.gammas = 1, 2\nsweep.amplitudes = 1e-4, 1e-3\n"
                                   "sim.t_final = 1.5\nsim.pressure = false\n");
  run_through_synthesis(cfg, dir.path());
  const auto open = pl::cmd_simulate(cfg, dir.path(), SimMode::open);
  EXPECT_GT(open[0]["trace"]["growth_rate"].get<double>(), 0.0);

  const auto par = pl::cmd_simulate(cfg, dir.path(), SimMode::linear, 3);
  ASSERT_EQ(par.size(), 4u);
  std::vector<std::string> first;
  for (int k = 0; k < 4; ++k) first.push_back(bytes(dir.path() / ("trace_linear_0" + std::to_string(k) + ".csv")));
  const auto seq = pl::cmd_simulate(cfg, dir.path(), SimMode::linear, 1);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(par[k], seq[k]);
    EXPECT_EQ(first[k], bytes(dir.path() / ("trace_linear_0" + std::to_string(k) + ".csv")));
  }
  EXPECT_EQ(par[0]["gamma0"], 1.0);
  EXPECT_EQ(par[3]["gamma0"], 2.0);
  EXPECT_EQ(par[1]["amplitude"], 1e-3);

  const auto report = pl::cmd_report(dir.path());
  EXPECT_EQ(report["rows"].size(), 5u);  // open + 4 sweep jobs
  EXPECT_EQ(report["gamma_monotone"], true);
  EXPECT_TRUE(fs::exists(dir.path() / "report_rates.csv"));
}

TEST(Pipeline, ReportSkipsCorruptTraces) {
  TempDir dir("report");
  RunConfig cfg = RunConfig::parse(std::string(kSmall) + "sim.pressure = false\n");
  run_through_synthesis(cfg, dir.path());
  EXPECT_THROW(pl::cmd_report(dir.path()), InputError);  // no traces yet
  pl::cmd_simulate(cfg, dir.path(), SimMode::linear);
  auto single = pl::cmd_report(dir.path());
  EXPECT_EQ(single["rows"].size(), 1u);
  EXPECT_TRUE(single["gamma_monotone"].is_null());

  pl::cmd_simulate(cfg, dir.path(), SimMode::nonlinear);
  std::ofstream(dir.path() / "trace_nonlinear.csv", std::ios::app) << "1,2,oops\n";
  auto r = pl::cmd_report(dir.path());
  EXPECT_EQ(r["rows"].size(), 1u);
  ASSERT_EQ(r["skipped"].size(), 1u);
  EXPECT_EQ(r["skipped"][0], "trace_nonlinear.json");
  EXPECT_THROW(pl::cmd_report(dir.path() / "missing"), InputError);
}
