// Copyright 2026 The pimkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial vs OpenMP kernels on matrix-vector products and elementwise ops.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pimkit/kernels.hpp"

namespace {

using pimkit::kernels::Wide;

pimkit::manifest::Matrix random_matrix(std::size_t n) {
  std::mt19937_64 rng(n);
  pimkit::manifest::Matrix w(n, n);
  for (auto& x : w.data) x = static_cast<std::int32_t>(rng() % 255) - 127;
  return w;
}

std::vector<std::int64_t> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = static_cast<std::int64_t>(rng() % 255) - 127;
  return v;
}

template <auto Fn>
void BM_Matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = random_matrix(n);
  const auto x = random_vector(n, 1);
  std::vector<Wide> acc(n);
  for (auto _ : state) {
    Fn(w, x, acc);
    benchmark::DoNotOptimize(acc.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <auto Fn>
void BM_Vvadd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n, 2);
  const auto b = random_vector(n, 3);
  std::vector<std::int64_t> out(n);
  for (auto _ : state) {
    Fn(pimkit::kernels::BinaryOp::kAdd, a, b, out, 8);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

BENCHMARK(BM_Matvec<pimkit::kernels::serial::matvec>)->Name("matvec/serial")->Range(64, 2048);
BENCHMARK(BM_Matvec<pimkit::kernels::parallel::matvec>)->Name("matvec/parallel")->Range(64, 2048);
BENCHMARK(BM_Vvadd<pimkit::kernels::serial::binary>)->Name("vvadd/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(BM_Vvadd<pimkit::kernels::parallel::binary>)->Name("vvadd/parallel")->Range(1 << 10, 1 << 20);

}  // namespace

BENCHMARK_MAIN();
