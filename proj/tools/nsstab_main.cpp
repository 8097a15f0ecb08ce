// nsstab command line: steady, spectrum, synthesize, simulate, report.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nsstab/errors.hpp"
#include "nsstab/pipeline.hpp"

namespace pl = nsstab::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Feedback stabilization toolkit for 2-D Navier-Stokes near an equilibrium"};
  app.require_subcommand(1);
  std::string config_path, out_dir, mode = "linear";
  std::optional<std::uint64_t> seed;
  int sweep = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "overrides control.seed and sim.ic_seed");
  };
  auto* steady = app.add_subcommand("steady", "solve for the equilibrium");
  auto* spectrum = app.add_subcommand("spectrum", "unstable spectral splitting");
  auto* synth = app.add_subcommand("synthesize", "build the feedback law");
  auto* simulate = app.add_subcommand("simulate", "integrate the closed loop");
  auto* report = app.add_subcommand("report", "aggregate traces in --out");
  for (auto* sub : {steady, spectrum, synth, simulate}) add_common(sub);
  simulate->add_option("--mode", mode, "open | linear | nonlinear | original")
      ->check(CLI::IsMember({"open", "linear", "nonlinear", "original"}));
  simulate->add_option("--sweep", sweep, "run the sweep.* jobs on this many workers")
      ->check(CLI::PositiveNumber);
  report->add_option("--out", out_dir, "directory holding trace_*.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (report->parsed()) {
      const auto r = pl::cmd_report(out_dir);
      std::cout << "report: " << r["rows"].size() << " rows, " << r["skipped"].size()
                << " skipped -> " << out_dir << "/report.json\n";
      return 0;
    }
    nsstab::RunConfig cfg = nsstab::RunConfig::load(config_path);
    if (seed) cfg.seed = cfg.sim.ic.seed = *seed;
    const std::filesystem::path out = out_dir.empty() ? cfg.out_dir : std::filesystem::path(out_dir);

    if (steady->parsed()) {
      const auto j = pl::cmd_steady(cfg, out);
      std::cout << "steady: residual " << j["residual"] << ", newton steps "
                << j["newton_steps"] << ", |y_e|_inf " << j["velocity_max"] << "\n";
    } else if (spectrum->parsed()) {
      const auto j = pl::cmd_spectrum(cfg, out);
      std::cout << "spectrum: sigma " << j["sigma"] << ", N " << j["summary"]["N"]
                << ", distinct " << j["summary"]["distinct"] << ", max geometric "
                << j["summary"]["max_geometric"] << "\n";
    } else if (synth->parsed()) {
      const auto j = pl::cmd_synthesize(cfg, out);
      std::cout << "synthesize: K " << j["law"]["K"] << ", gamma0 " << j["gamma0"]
                << ", placed max Re " << j["law"]["placed_max_real"] << "\n";
    } else if (simulate->parsed()) {
      const auto jobs = pl::cmd_simulate(cfg, out, nsstab::parse_mode(mode), sweep);
      for (const auto& j : jobs) {
        const auto& t = j["trace"];
        std::cout << "simulate " << t["mode"].get<std::string>() << " job " << j["job"]
                  << ": amplitude " << j["amplitude"] << ", fitted rate " << t["fitted_rate"]
                  << (t["blowup"].get<bool>() ? " (blow-up)" : "") << "\n";
      }
    }
    return 0;
  } catch (const nsstab::SpectralAmbiguity& e) {
    std::cerr << "error: " << e.what() << "\nsuggested spectrum.tau_eig = "
              << e.suggested_tau() << "\n";
    return pl::exit_code(e);
  } catch (const nsstab::SynthesisError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.margins().empty()) {
      std::cerr << "best rank margins:";
      for (double m : e.margins()) std::cerr << ' ' << m;
      std::cerr << "\n";
    }
    return pl::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::exit_code(e);
  }
}
