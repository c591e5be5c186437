#include <benchmark/benchmark.h>

#include <random>

#include "seabed/catalog.hpp"
#include "seabed/classifiers.hpp"
#include "seabed/dataset.hpp"
#include "seabed/helmholtz.hpp"
#include "seabed/modal.hpp"
#include "seabed/neural.hpp"
#include "seabed/nmla.hpp"
#include "seabed/surface.hpp"

using namespace seabed;

namespace {

HighFreqTemplate sand_template() {
  return backscatter_environment(EnvironmentSet::training(), SedimentClass::kSand).make_template(0.5, 3);
}

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

void BM_ModalSolve(benchmark::State& state) {
  const auto env = lowfreq_environment(EnvironmentSet::training(), SedimentClass::kClay);
  const DepthModel m = build_depth_model(env, 150, static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_modes(m, env.frequency));
  state.counters["nodes"] = static_cast<double>(m.z.size());
}
BENCHMARK(BM_ModalSolve)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_LowFreqDataset(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_lowfreq_dataset(EnvironmentSet::test(3), 50, 18.0, 1));
  }
}
BENCHMARK(BM_LowFreqDataset)->Unit(benchmark::kMillisecond);

void BM_Surface(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_surface(2.0, static_cast<int>(state.range(0)), 0.005, 0.02, ++seed));
  }
}
BENCHMARK(BM_Surface)->Arg(1024)->Arg(8192)->Unit(benchmark::kMicrosecond);

void BM_Assemble(benchmark::State& state) {
  const LayeredDomain d = LayeredDomain::from_template(sand_template());
  for (auto _ : state) benchmark::DoNotOptimize(assemble(d));
}
BENCHMARK(BM_Assemble)->Unit(benchmark::kMillisecond);

void BM_ScatteringSolve(benchmark::State& state) {
  const DiscreteSystem sys = assemble(LayeredDomain::from_template(sand_template()));
  for (auto _ : state) benchmark::DoNotOptimize(solve_scattered(sys));
  state.counters["unknowns"] = static_cast<double>(solve_scattered(sys).stats().unknowns);
}
BENCHMARK(BM_ScatteringSolve)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_AngularSpectrum(benchmark::State& state) {
  const double k = 2 * 3.14159265358979323846 * 15000.0 / 1500.0;
  const double r = 2.5 * 0.1;
  const CircleData c = sample_plane_waves({{1.0, 0.4}, {0.5, 2.0}}, k, {1.0, 1.0}, r, CircleData::min_samples(k, r));
  for (auto _ : state) benchmark::DoNotOptimize(angular_spectrum(c));
}
BENCHMARK(BM_AngularSpectrum)->Unit(benchmark::kMicrosecond);

void BM_Cnn3LossAndGradient(benchmark::State& state) {
  const int length = static_cast<int>(state.range(0));
  Network net = Network::cnn3(length, 1);
  const Eigen::MatrixXd x = gaussian(length, 32, 2);
  std::vector<int> y(32);
  for (int i = 0; i < 32; ++i) y[static_cast<std::size_t>(i)] = i % 4;
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(net.loss(x, y, &grad));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Cnn3LossAndGradient)->Arg(40)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  const Variant v = static_cast<Variant>(state.range(0));
  const LabeledDataset train = generate_lowfreq_dataset(EnvironmentSet::training(), 100, 10.0, 4);
  TrainOptions o;
  o.max_epochs = 20;
  for (auto _ : state) benchmark::DoNotOptimize(fit(v, train, {}, {}, o));
  state.SetLabel(std::string(to_string(v)));
}
BENCHMARK(BM_Fit)
    ->Arg(static_cast<int>(Variant::kLr))
    ->Arg(static_cast<int>(Variant::kSvmLinear))
    ->Arg(static_cast<int>(Variant::kSvmRbf))
    ->Arg(static_cast<int>(Variant::kMlp))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
