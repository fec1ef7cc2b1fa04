#include <benchmark/benchmark.h>

#include <cmath>

#include "amh/parabolic/fom.hpp"
#include "amh/parabolic/ml.hpp"
#include "amh/parabolic/rb.hpp"

using namespace amh;
using namespace amh::parabolic;

namespace {

struct Setup {
  std::shared_ptr<const AffineSystem> system = std::make_shared<const AffineSystem>(assemble({}));
  std::shared_ptr<ReducedModel> model = std::make_shared<ReducedModel>(system, PodSettings{});
  std::shared_ptr<CoefficientSurrogate> surrogate;

  Setup() {
    for (double a : {0.2, 1.0, 5.0, 9.0})
      for (double b : {0.3, 3.0, 8.0}) model->absorb_trajectory(solve_fom(*system, {a, b}));
    surrogate = std::make_shared<CoefficientSurrogate>(ParameterBox::uniform(2, 0.1, 10.0), model,
                                                       KernelRidgeSettings{LengthscalePolicy::fixed(0.15), 1e-8, 10});
    for (int i = 0; i < 100; ++i) {
      const double t = (i + 0.5) / 100.0;
      surrogate->add_solution(model->solve({0.1 + 9.9 * t, 0.1 + 9.9 * std::abs(std::sin(7.0 * t))}));
    }
  }
};

Setup& setup() {
  static Setup s;
  return s;
}

const ParameterVector kMu{2.3, 6.1};

void BM_SolveFom(benchmark::State& state) {
  const auto& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(solve_fom(*s.system, kMu));
}

void BM_SolveRb(benchmark::State& state) {
  const auto& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(s.model->solve(kMu));
  state.counters["N"] = static_cast<double>(s.model->dimension());
}

void BM_ErrorEstimate(benchmark::State& state) {
  const auto& s = setup();
  const ReducedTrajectory t = s.model->solve(kMu);
  for (auto _ : state) benchmark::DoNotOptimize(s.model->estimate(kMu, t));
}

void BM_MlPredict(benchmark::State& state) {
  const auto& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(s.surrogate->predict(kMu));
  state.counters["rank"] = static_cast<double>(s.surrogate->training_set().output_basis().cols());
}

void BM_MlRefit(benchmark::State& state) {
  auto& s = setup();
  const ReducedTrajectory t = s.model->solve(kMu);
  for (auto _ : state) s.surrogate->add_solution(t);
}

}  // namespace

BENCHMARK(BM_SolveFom)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SolveRb)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ErrorEstimate)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MlPredict)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MlRefit)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
