#include <benchmark/benchmark.h>

#include <vector>

#include "freemesh/bench.hpp"
#include "freemesh/kernel.hpp"
#include "freemesh/linalg.hpp"
#include "freemesh/multiindex.hpp"
#include "freemesh/transform.hpp"

namespace {

using namespace freemesh;

void BM_MomentRow(benchmark::State& state) {
  const MomentBasis basis(static_cast<int>(state.range(0)));
  const auto points = bench::random_grid(1024, 1);
  std::vector<double> row(basis.rank());
  std::size_t i = 0;
  for (auto _ : state) {
    basis.moment_row(points[i++ % points.size()], row);
    benchmark::DoNotOptimize(row.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MomentRow)->Arg(6)->Arg(12)->Arg(20);

void BM_QrFactor(benchmark::State& state) {
  const MomentBasis basis(static_cast<int>(state.range(0)));
  const DenseMatrix a = vandermonde(bench::random_grid(static_cast<std::size_t>(state.range(1)), 1), basis);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::qr_factor(a));
}
BENCHMARK(BM_QrFactor)->Args({6, 512})->Args({8, 2048})->Unit(benchmark::kMillisecond);

void BM_KernelFactored(benchmark::State& state) {
  const auto points = bench::random_grid(200, 1);
  const MomentBasis basis(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernel::kernel_factored(points, kernel::ShapeParameter(0.1), basis));
}
BENCHMARK(BM_KernelFactored)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_MeshToTree(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MomentBasis basis(static_cast<int>(state.range(1)));
  const auto points = bench::random_grid(n, 1);
  std::vector<double> f;
  for (const auto& p : points) f.push_back(bench::franke3d(p[0], p[1], p[2]));
  for (auto _ : state) {
    state.PauseTiming();
    auto work_points = points;
    auto work_f = f;
    state.ResumeTiming();
    benchmark::DoNotOptimize(mesh_to_tree(work_points, work_f, basis, 1e-8));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MeshToTree)->Args({4096, 8})->Args({32768, 8})->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  auto points = bench::random_grid(32768, 1);
  std::vector<double> f;
  for (const auto& p : points) f.push_back(bench::franke3d(p[0], p[1], p[2]));
  const FmtTree tree = mesh_to_tree(points, f, MomentBasis(8), 1e-8);
  const auto query = bench::random_grid(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(tree, query));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(4096)->Arg(32768)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
