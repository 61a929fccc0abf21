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

#include "pimkit/lower.hpp"

#include <gtest/gtest.h>

#include "pimkit/selftest.hpp"
#include "pimkit/vm.hpp"

namespace pimkit::lower {
namespace {

using isa::Opcode;

std::vector<Opcode> non_sldi(const std::vector<isa::Instruction>& code) {
  std::vector<Opcode> ops;
  for (const auto& i : code) {
    if (isa::opcode_of(i) != Opcode::kSldi) ops.push_back(isa::opcode_of(i));
  }
  return ops;
}

MlpSpec identity_spec(std::uint32_t n) {
  MlpSpec spec;
  spec.layer_dims = {n, n};
  LayerSpec layer;
  layer.weights = manifest::Matrix(n, n);
  for (std::uint32_t i = 0; i < n; ++i) layer.weights.at(i, i) = 1;
  spec.layers = {layer};
  return spec;
}

ErrorKind error_of(const MlpSpec& spec) {
  try {
    lower_mlp(spec);
  } catch (const LoweringError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "lowering succeeded";
  return ErrorKind::kInvalidSpec;
}

TEST(LowerTest, IdentityLayer) {
  const LoweredMlp m = lower_mlp(identity_spec(2));
  ASSERT_EQ(m.bundle.cores.size(), 1U);
  EXPECT_EQ(non_sldi(m.bundle.cores[0].code),
            (std::vector<Opcode>{Opcode::kLd, Opcode::kMvmul, Opcode::kVvadd, Opcode::kSt}));
  const std::vector<std::int64_t> x = {5, -7};
  EXPECT_EQ(selftest::run_lowered(m, x), x);
}

TEST(LowerTest, TwoCoreSendRecv) {
  fuzz::Rng rng(7);
  MlpSpec spec = selftest::random_mlp(rng, {4, 3, 2});
  spec.layers[1].cores = {1};
  const LoweredMlp m = lower_mlp(spec);
  ASSERT_EQ(m.bundle.cores.size(), 2U);
  EXPECT_EQ(non_sldi(m.bundle.cores[0].code).back(), Opcode::kSend);
  EXPECT_EQ(non_sldi(m.bundle.cores[1].code).front(), Opcode::kRecv);
  const std::vector<std::int64_t> x = {1, -2, 3, -4};
  EXPECT_EQ(selftest::run_lowered(m, x), selftest::reference_forward(spec, x));
}

TEST(LowerTest, GlobalMemoryTransport) {
  fuzz::Rng rng(8);
  MlpSpec spec = selftest::random_mlp(rng, {6, 5, 3});
  spec.layers[0].cores = {0, 1};
  spec.layers[1].cores = {2};
  spec.transport = Transport::kGlobalMemory;
  const LoweredMlp m = lower_mlp(spec);
  for (const auto& core : m.bundle.cores) {
    for (const auto& i : core.code) {
      EXPECT_NE(isa::opcode_of(i), Opcode::kSend);
      EXPECT_NE(isa::opcode_of(i), Opcode::kRecv);
    }
  }
  const std::vector<std::int64_t> x = {10, -20, 30, -40, 50, -60};
  EXPECT_EQ(selftest::run_lowered(m, x), selftest::reference_forward(spec, x));
}

TEST(LowerTest, ReluFusesIntoMvmulWithZeroBias) {
  MlpSpec spec = identity_spec(3);
  spec.layers[0].activation = Activation::kRelu;
  const LoweredMlp m = lower_mlp(spec);
  bool fused = false;
  for (const auto& i : m.bundle.cores[0].code) {
    if (const auto* mv = std::get_if<isa::Mvmul>(&i)) fused = mv->relu == 1;
    EXPECT_NE(isa::opcode_of(i), Opcode::kVrelu);
  }
  EXPECT_TRUE(fused);
  EXPECT_EQ(selftest::run_lowered(m, std::vector<std::int64_t>{-3, 0, 4}),
            (std::vector<std::int64_t>{0, 0, 4}));

  spec.layers[0].bias = {1, 0, 0};
  const LoweredMlp biased = lower_mlp(spec);
  EXPECT_EQ(selftest::run_lowered(biased, std::vector<std::int64_t>{-3, 0, 4}),
            (std::vector<std::int64_t>{0, 0, 4}));
}

TEST(LowerTest, SplitLayerRows) {
  using Parts = std::vector<std::pair<std::uint32_t, std::uint32_t>>;
  EXPECT_EQ(split_layer_rows(8, 2), (Parts{{0, 4}, {4, 8}}));
  EXPECT_EQ(split_layer_rows(8, 3), (Parts{{0, 3}, {3, 6}, {6, 8}}));
  EXPECT_EQ(split_layer_rows(3, 3), (Parts{{0, 1}, {1, 2}, {2, 3}}));
  EXPECT_THROW(split_layer_rows(8, 0), LoweringError);
  EXPECT_THROW(split_layer_rows(2, 3), LoweringError);
}

TEST(LowerTest, Errors) {
  MlpSpec big = identity_spec(64);
  big.local_mem_bytes = 64;
  EXPECT_EQ(error_of(big), ErrorKind::kLayerTooLargeForLocalMemory);

  fuzz::Rng rng(9);
  MlpSpec chain = selftest::random_mlp(rng, {4, 4, 4});
  chain.layers[1].ibiw = 16;
  EXPECT_EQ(error_of(chain), ErrorKind::kWidthUnsupported);

  MlpSpec fixed = identity_spec(2);
  fixed.layers[0].obiw = 16;
  fixed.variable_bitwidth_supported = false;
  EXPECT_EQ(error_of(fixed), ErrorKind::kWidthUnsupported);

  MlpSpec shape = identity_spec(2);
  shape.layer_dims = {3, 2};
  EXPECT_EQ(error_of(shape), ErrorKind::kInvalidSpec);

  EXPECT_THROW(parse_mlp_spec("{\"layer_dims\": ["), LoweringError);
}

TEST(LowerTest, JsonSpec) {
  const MlpSpec spec = parse_mlp_spec(R"({
    "layer_dims": [2, 2],
    "weights": [[[1, 0], [0, 1]]],
    "biases": [[0, 3]],
    "activations": ["relu"],
    "core_assignment": [0],
    "input": [4, -9]
  })");
  ASSERT_EQ(spec.layers.size(), 1U);
  EXPECT_EQ(spec.layers[0].activation, Activation::kRelu);
  const LoweredMlp m = lower_mlp(spec);
  vm::Machine machine = vm::Machine::load(m.bundle);
  ASSERT_EQ(machine.run(100000).status, vm::RunStatus::kCompleted);
  EXPECT_EQ(read_output(machine.gmem(), m.io), (std::vector<std::int64_t>{4, 0}));
}

TEST(LowerTest, WordModeLowering) {
  fuzz::Rng rng(10);
  MlpSpec spec = selftest::random_mlp(rng, {12, 10, 4});
  spec.mode = isa::EncodingMode::kWord32;
  spec.layers[0].cores = {0, 1};
  spec.layers[1].cores = {1};
  const LoweredMlp m = lower_mlp(spec);
  EXPECT_EQ(m.bundle.mode, isa::EncodingMode::kWord32);
  std::vector<std::int64_t> x(12);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<std::int64_t>(i * 9) - 50;
  EXPECT_EQ(selftest::run_lowered(m, x), selftest::reference_forward(spec, x));
}

TEST(LowerTest, WideLayerWidths) {
  fuzz::Rng rng(11);
  MlpSpec spec = selftest::random_mlp(rng, {5, 4, 3}, 8);
  spec.layers[0].obiw = 16;
  spec.layers[1].ibiw = 16;
  spec.layers[1].obiw = 12;
  std::vector<std::int64_t> x = {100, -100, 50, -50, 0};
  EXPECT_EQ(selftest::run_lowered(lower_mlp(spec), x), selftest::reference_forward(spec, x));
}

TEST(LowerTest, RegionsDoNotOverlap) {
  fuzz::Rng rng(12);
  MlpSpec spec = selftest::random_mlp(rng, {16, 12, 8, 4});
  spec.layers[0].cores = {0, 1, 2};
  spec.layers[1].cores = {1, 2};
  spec.layers[2].cores = {0};
  const LoweredMlp m = lower_mlp(spec);
  auto check = [](const std::vector<Region>& regions) {
    for (std::size_t i = 0; i < regions.size(); ++i) {
      for (std::size_t j = i + 1; j < regions.size(); ++j) {
        const Region& a = regions[i];
        const Region& b = regions[j];
        EXPECT_TRUE(a.begin + a.size <= b.begin || b.begin + b.size <= a.begin)
            << a.name << " overlaps " << b.name;
      }
    }
  };
  for (const auto& core : m.plan.local_regions) check(core);
  check(m.plan.global_regions);
  EXPECT_EQ(m.plan.parts.size(), 6U);
  std::vector<std::int64_t> x(16, 3);
  EXPECT_EQ(selftest::run_lowered(m, x), selftest::reference_forward(spec, x));
}

TEST(LowerTest, ElementCodec) {
  const std::vector<std::int64_t> v = {-512, 511, 0, -1};
  const auto bytes = encode_elements(v, 10);
  EXPECT_EQ(bytes.size(), 8U);
  EXPECT_EQ(decode_elements(bytes, 4, 10), v);
}

}  // namespace
}  // namespace pimkit::lower
