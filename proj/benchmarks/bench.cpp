#include <benchmark/benchmark.h>

#include <random>

#include "agpforge/agp.hpp"
#include "agpforge/dynamics.hpp"
#include "agpforge/ring.hpp"
#include "agpforge/spectral.hpp"

using namespace agpforge;

namespace {

PauliString random_string(std::mt19937_64& rng, int n) {
  static constexpr char kAxes[] = {'I', 'X', 'Y', 'Z'};
  PauliString s(n);
  for (int i = 0; i < n; ++i) s.set_pauli(i, kAxes[rng() % 4]);
  return s;
}

void BM_StringMultiply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_string(rng, n);
  const auto b = random_string(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(multiply(a, b));
}
BENCHMARK(BM_StringMultiply)->Arg(16)->Arg(64)->Arg(256)->Arg(1024);

void BM_OpCommutatorIsing(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  auto chain = transverse_ising_chain(L);
  const auto h = chain.operator_at(0.4);
  const auto dh = chain.derivative_at(0.4);
  for (auto _ : state) benchmark::DoNotOptimize(op_commutator(h, dh));
}
BENCHMARK(BM_OpCommutatorIsing)->Arg(8)->Arg(32)->Arg(128);

void BM_GenerateBasis(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  auto chain = transverse_ising_chain(L);
  const auto h = chain.operator_at(0.37);
  const auto dh = chain.derivative_at(0.37);
  for (auto _ : state) benchmark::DoNotOptimize(generate_basis(h, dh));
}
BENCHMARK(BM_GenerateBasis)->Arg(6)->Arg(8)->Arg(10);

void BM_RingSolve(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const RingBasis basis = ring_generate_basis(ring_ising(L, 0.37), ring_ising_derivative(L));
  const RingOperator h = ring_ising(L, 0.5);
  const RingOperator dh = ring_ising_derivative(L);
  for (auto _ : state) benchmark::DoNotOptimize(ring_solve(h, dh, basis));
}
BENCHMARK(BM_RingSolve)->Arg(20)->Arg(50)->Arg(100);

void BM_RingGenerateBasis(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const RingOperator h = ring_ising(L, 0.37);
  const RingOperator dh = ring_ising_derivative(L);
  for (auto _ : state) benchmark::DoNotOptimize(ring_generate_basis(h, dh));
}
BENCHMARK(BM_RingGenerateBasis)->Arg(20)->Arg(50)->Arg(100);

void BM_EvolveStep(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  auto chain = transverse_ising_chain(L);
  const Schedule sched = Schedule::annealing(0.1);
  const StateVector psi0 = ground_state(chain.operator_at(0.0));
  EvolveOptions opt;
  opt.n_steps = 200;
  opt.fidelity_samples = 2;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(chain, {}, sched, psi0, opt));
}
BENCHMARK(BM_EvolveStep)->Arg(6)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_DenseDiagonalize(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  auto chain = transverse_ising_chain(L);
  const DenseMatrix m = to_dense(chain.operator_at(0.5));
  for (auto _ : state) benchmark::DoNotOptimize(diagonalize(m));
}
BENCHMARK(BM_DenseDiagonalize)->Arg(6)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
