#include "streamopt/noa.hpp"
#include "streamopt/stream_ls.hpp"
#include "streamopt/synthetic.hpp"
#include "streamopt/testbeds/nhpp.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace streamopt;

namespace {

FrameLossPtr coupled_quadratic(Index n, std::mt19937_64& rng) {
  Matrix r = Matrix::Random(n, n);
  r /= r.jacobiSvd().singularValues()(0);
  Matrix p = Matrix::Identity(2 * n, 2 * n);
  p.topRightCorner(n, n) = 0.3 * r.transpose();
  p.bottomLeftCorner(n, n) = 0.3 * r;
  return std::make_shared<StackedQuadraticLoss>(p, Vector::Random(2 * n), false);
}

const nhpp::NhppInstance& nhpp_instance() {
  static const nhpp::NhppInstance inst = nhpp::make_instance(nhpp::SplineNhppConfig{});
  return inst;
}

void newton_system(benchmark::State& state, Execution exec) {
  const auto& inst = nhpp_instance();
  std::vector<FrameLossPtr> losses;
  for (const auto& f : inst.losses) losses.push_back(std::make_shared<LogBarrierLoss>(f, 1e-3));
  const ChainObjective obj(losses);
  const BlockVector y(obj.blocks(), Vector::Constant(inst.config.basis_per_frame, 80.0));
  for (auto _ : state) benchmark::DoNotOptimize(obj.newton_system(y, exec));
}

void BM_NewtonSystemSerial(benchmark::State& state) { newton_system(state, Execution::Serial); }
void BM_NewtonSystemParallel(benchmark::State& state) { newton_system(state, Execution::Parallel); }

void BM_NewtonStep(benchmark::State& state) {
  const Index n = 16;
  const auto b = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::vector<FrameLossPtr> window;
  for (std::size_t t = 0; t < b; ++t) window.push_back(coupled_quadratic(n, rng));
  const BlockVector y(b, Vector::Ones(n));
  const Vector boundary = Vector::Zero(n);
  for (auto _ : state) benchmark::DoNotOptimize(newton_step(window, boundary, y, Execution::Serial));
  state.SetComplexityN(state.range(0));
}

void BM_StreamLsIngest(benchmark::State& state) {
  SyntheticStreamConfig c;
  c.n = 16;
  c.m_min = 32;
  c.m_max = 32;
  c.frames = 200;
  const auto batches = make_synthetic_stream(c);
  const BufferSize buffer = state.range(0) == 0 ? BufferSize::full() : BufferSize::of(state.range(0));
  for (auto _ : state) {
    StreamingLeastSquares s(c.n, 0.0, buffer);
    for (const auto& batch : batches) s.ingest(batch);
    benchmark::DoNotOptimize(s.live());
  }
}

void BM_BlockTridiagonalSolve(benchmark::State& state) {
  SyntheticStreamConfig c;
  c.n = 8;
  c.frames = static_cast<std::size_t>(state.range(0));
  const auto system = normal_equations(make_synthetic_stream(c), 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_block_tridiagonal(system));
  state.SetComplexityN(state.range(0));
}

void BM_DenseSolve(benchmark::State& state) {
  SyntheticStreamConfig c;
  c.n = 8;
  c.frames = static_cast<std::size_t>(state.range(0));
  const auto system = normal_equations(make_synthetic_stream(c), 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_dense(system));
}

}  // namespace

BENCHMARK(BM_NewtonSystemSerial);
BENCHMARK(BM_NewtonSystemParallel);
BENCHMARK(BM_NewtonStep)->RangeMultiplier(2)->Range(4, 32)->Complexity(benchmark::oN);
BENCHMARK(BM_StreamLsIngest)->Arg(0)->Arg(3)->Arg(6);
BENCHMARK(BM_BlockTridiagonalSolve)->RangeMultiplier(4)->Range(16, 256)->Complexity(benchmark::oN);
BENCHMARK(BM_DenseSolve)->RangeMultiplier(4)->Range(16, 64);

BENCHMARK_MAIN();
