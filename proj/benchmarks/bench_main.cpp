// Copyright 2026 The DnD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>

#include "dnd/autodiff/ops.hpp"
#include "dnd/encoder2d/encoder2d.hpp"
#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/moldata/synthetic.hpp"
#include "dnd/objectives/objectives.hpp"
#include "dnd/util/rng.hpp"

namespace {

using namespace dnd;

ad::Array<float> random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  ad::Array<float> a({rows, cols});
  for (auto& v : a.storage()) v = static_cast<float>(rng.normal());
  return a;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_matrix(n, n, rng);
  const auto b = random_matrix(n, n, rng);
  for (auto _ : state) {
    ad::Tape<float> tape;
    auto x = tape.input(a);
    auto y = tape.input(b);
    auto loss = ad::sum_all(ad::matmul(x, y));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(x.id));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

mol::MoleculeRecord molecule(std::size_t atoms) {
  mol::SyntheticConfig sc;
  sc.count = 1;
  sc.min_atoms = sc.max_atoms = atoms;
  return mol::generate_synthetic(sc).records[0];
}

void BM_Encoder3DInfer(benchmark::State& state) {
  const auto rec = molecule(static_cast<std::size_t>(state.range(0)));
  enc3d::Encoder3D<float> enc(enc3d::Encoder3DConfig{}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(enc.infer(rec.graph, rec.conformer->coords));
}
BENCHMARK(BM_Encoder3DInfer)->Arg(8)->Arg(16)->Arg(30);

void BM_DenoiseLossTrainStep(benchmark::State& state) {
  const auto rec = molecule(static_cast<std::size_t>(state.range(0)));
  enc3d::Encoder3D<float> enc(enc3d::Encoder3DConfig{}, 1);
  enc3d::NoiseHead<float> head(enc3d::Encoder3DConfig{}, 2);
  const auto sample = obj::sample_noise(*rec.conformer, 0.1, 3);
  for (auto _ : state) {
    ad::Tape<float> tape;
    tape.backward(obj::denoise_loss(tape, enc, head, rec.graph, sample));
    tape.accumulate_param_grads();
  }
}
BENCHMARK(BM_DenoiseLossTrainStep)->Arg(8)->Arg(16)->Arg(30);

void BM_Encoder2DEncode(benchmark::State& state) {
  const auto rec = molecule(static_cast<std::size_t>(state.range(0)));
  enc2d::Encoder2DConfig cfg;
  enc2d::Encoder2D<float> enc(cfg, 1);
  const auto tokens = enc2d::tokenize(rec.graph, 7, cfg);
  for (auto _ : state) {
    ad::Tape<float> tape(false);
    benchmark::DoNotOptimize(enc.encode(tape, tokens).nodes.value());
  }
  state.counters["tokens"] = static_cast<double>(tokens.size());
}
BENCHMARK(BM_Encoder2DEncode)->Arg(8)->Arg(16)->Arg(30);

}  // namespace

BENCHMARK_MAIN();
