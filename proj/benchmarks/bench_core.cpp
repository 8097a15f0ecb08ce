#include <random>

#include <benchmark/benchmark.h>

#include "nsstab/closed_loop.hpp"
#include "nsstab/forcing.hpp"

using namespace nsstab;

namespace {

Vec noise(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

void BM_Project(benchmark::State& state) {
  const Grid g(int(state.range(0)), int(state.range(0)));
  const LerayProjector proj(g);
  VelocityField f(g, noise(g.num_faces(), 1));
  f.apply_no_slip();
  for (auto _ : state) benchmark::DoNotOptimize(proj.project(f));
}
BENCHMARK(BM_Project)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Discretization(benchmark::State& state) {
  const Grid g(int(state.range(0)), int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Discretization::create(g));
}
BENCHMARK(BM_Discretization)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);

// Vortex flow used by the shipped configs, shifted to three unstable modes.
struct Vortex {
  OseenOperator op;
  SpectralData s;
  OmegaMask mask;
  FeedbackLaw law;

  explicit Vortex(int n)
      : op(make_op(n)), s(spectrum(op)), mask(OmegaMask::rectangle(op.disc->grid, 0.2, 1.1, 0.2, 0.8)) {
    SynthesisOptions opt;
    opt.gamma = 2.0;
    opt.delta_ratio = 0.5;
    law = synthesize(s, windowed_gram(*op.disc, mask), opt);
  }

  static OseenOperator make_op(int n) {
    const Grid g(n, n, 1.3, 1.0);
    auto disc = Discretization::create(g);
    ForceDescriptor fd;
    fd.kind = "vortex";
    fd.amplitude = 20;
    const OseenOperator base = assemble_oseen(disc, SteadySolver(disc).solve(make_force(g, fd), 0.1));
    const SpectralData s0 = analyze_spectrum(base.matrix);
    std::vector<Complex> ev = s0.eigenvalues;
    return with_shift(base, shift_for_unstable(ev, 2));
  }
};

void BM_Spectrum(benchmark::State& state) {
  const OseenOperator op = Vortex::make_op(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spectrum(op));
}
BENCHMARK(BM_Spectrum)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_Step(benchmark::State& state) {
  const Vortex v(int(state.range(0)));
  const ClosedLoop loop(v.op, v.s, v.law, v.mask);
  const auto stepper = loop.integrator(2e-4);
  Vec w = loop.initial_state({"unstable", 1e-3, 1});
  for (auto _ : state) {
    if (state.range(1))
      w = stepper.step_nonlinear(w);
    else
      w = stepper.step_linear(w);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetLabel(state.range(1) ? "nonlinear" : "linear");
}
BENCHMARK(BM_Step)->Args({12, 0})->Args({12, 1})->Args({24, 0})->Args({24, 1})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
