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

#include "pimkit/oracle.hpp"

#include <gtest/gtest.h>

#include "pimkit/asm.hpp"
#include "pimkit/fuzz.hpp"
#include "pimkit/lower.hpp"
#include "pimkit/selftest.hpp"

namespace pimkit::oracle {
namespace {

using isa::RegId;

RefEnv fresh_env(std::size_t lmem = 256) {
  RefEnv env;
  env.lmem.assign(lmem, 0);
  env.events.assign(16, 0);
  return env;
}

void put(RefEnv& env, std::uint64_t addr, const std::vector<std::int64_t>& v) {
  const auto bytes = lower::encode_elements(v, 8);
  std::copy(bytes.begin(), bytes.end(), env.lmem.begin() + static_cast<std::ptrdiff_t>(addr));
}

std::vector<std::int64_t> get(const RefEnv& env, std::uint64_t addr, std::size_t n) {
  return lower::decode_elements(std::span(env.lmem).subspan(addr), n, 8);
}

TEST(OracleTest, Vdmul) {
  RefEnv env = fresh_env();
  put(env, 0, {1, 2, 3});
  put(env, 16, {4, 5, 6});
  env.regs[2] = 16;
  env.regs[3] = 64;
  const auto out = ref_exec(isa::Vdmul{RegId{3}, RegId{1}, RegId{2}, 3, {}}, env);
  ASSERT_EQ(out.index(), 0U);
  EXPECT_EQ(get(std::get<RefEnv>(out), 64, 1), std::vector<std::int64_t>{32});
  EXPECT_EQ(std::get<RefEnv>(out).pc, 1U);
}

TEST(OracleTest, MvmulDiagonal) {
  RefEnv env = fresh_env();
  manifest::Matrix w(2, 2);
  w.at(0, 0) = w.at(1, 1) = 2;
  env.groups.push_back(w);
  put(env, 0, {10, -10});
  env.regs[2] = 64;
  const auto out = ref_exec(isa::Mvmul{RegId{2}, RegId{1}, 8, 0, 0}, env);
  ASSERT_EQ(out.index(), 0U);
  EXPECT_EQ(get(std::get<RefEnv>(out), 64, 2), (std::vector<std::int64_t>{20, -20}));
}

TEST(OracleTest, TrapsAreValues) {
  RefEnv env = fresh_env(16);
  env.regs[1] = 12;
  const auto out = ref_exec(isa::Ldi{RegId{1}, 1, 8, 0}, env);
  ASSERT_EQ(out.index(), 1U);
  EXPECT_EQ(std::get<RefTrap>(out).kind, vm::TrapKind::kOutOfBoundsLocal);
}

TEST(OracleTest, CommunicationNeedsPeers) {
  RefEnv env = fresh_env();
  EXPECT_THROW(ref_step(isa::Wait{0, 0}, env), std::logic_error);
  EXPECT_THROW(ref_step(isa::Sync{0, 1}, env, 0), std::logic_error);
  EXPECT_FALSE(ref_step(isa::Sync{0, 0}, env, 0).has_value());
  EXPECT_EQ(env.events[0], 1U);
}

TEST(OracleTest, FcLayer) {
  manifest::Matrix identity(3, 3);
  for (int i = 0; i < 3; ++i) identity.at(i, i) = 1;
  const std::vector<std::int64_t> x = {1, 2, 3};
  const std::vector<std::int64_t> zero(3, 0);
  EXPECT_EQ(ref_fc_layer(identity, x, zero, LayerActivation::kNone, 8), x);

  manifest::Matrix neg(3, 3);
  for (int i = 0; i < 3; ++i) neg.at(i, i) = -1;
  EXPECT_EQ(ref_fc_layer(neg, x, zero, LayerActivation::kRelu, 8),
            (std::vector<std::int64_t>{0, 0, 0}));
  EXPECT_EQ(ref_fc_layer(neg, x, zero, LayerActivation::kNone, 8),
            (std::vector<std::int64_t>{-1, -2, -3}));

  // Saturate first, then wrap on the bias: 200 -> 127, 127 + 1 -> -128.
  manifest::Matrix one(1, 1);
  one.at(0, 0) = 100;
  const std::vector<std::int64_t> two = {2};
  const std::vector<std::int64_t> bias = {1};
  EXPECT_EQ(ref_fc_layer(one, two, bias, LayerActivation::kNone, 8),
            std::vector<std::int64_t>{-128});

  EXPECT_THROW(ref_fc_layer(identity, two, zero, LayerActivation::kNone, 8), DimensionMismatch);
}

TEST(OracleTest, RandomLayerMatchesLoweredExecution) {
  fuzz::Rng rng(fuzz::seed_from_env(41));
  for (int trial = 0; trial < 50; ++trial) {
    lower::MlpSpec spec = selftest::random_mlp(rng, {8, 8});
    spec.layers[0].activation = trial % 2 ? lower::Activation::kRelu : lower::Activation::kNone;
    std::vector<std::int64_t> x(8);
    for (auto& v : x) v = std::uniform_int_distribution<int>(-128, 127)(rng);
    const auto expected = ref_fc_layer(spec.layers[0].weights, x, spec.layers[0].bias,
                                       trial % 2 ? LayerActivation::kRelu : LayerActivation::kNone, 8);
    EXPECT_EQ(selftest::run_lowered(lower::lower_mlp(spec), x), expected);
  }
}

TEST(DiffRunTest, MinimalBundle) {
  manifest::ProgramBundle b;
  b.global_mem_bytes = 64;
  manifest::CoreConfig c;
  c.local_mem_bytes = 64;
  c.code = {isa::Sldi{RegId{1}, 1}};
  b.cores.push_back(c);
  const DiffReport r = diff_run(b);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.summary(), "no divergence, 1 steps, Completed");
}

TEST(DiffRunTest, MutationIsCaughtAtFirstVvadd) {
  manifest::ProgramBundle b;
  b.global_mem_bytes = 64;
  manifest::CoreConfig c;
  c.local_mem_bytes = 64;
  for (const char* line : {"sldi $r1, 0", "sldi $r2, 8", "sldi $r3, 16", "vmax $r3, $r1, $r2, 4",
                           "vvadd $r3, $r1, $r2, 4", "vvadd $r3, $r3, $r2, 4"}) {
    c.code.push_back(assembler::parse_instruction(line));
  }
  b.cores.push_back(c);
  EXPECT_TRUE(diff_run(b).ok());

  DiffOptions options;
  options.seed = 99;
  options.machine.fault = vm::FaultInjection::kVvaddOffByOne;
  const DiffReport r = diff_run(b, options);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.divergence->pc, 4U);
  EXPECT_EQ(r.divergence->step, 4U);
  EXPECT_EQ(r.divergence->field, "lmem[16]");
  EXPECT_EQ(r.divergence->expected, "0");
  EXPECT_EQ(r.divergence->actual, "1");
  const std::string json = r.divergence->to_json();
  for (const char* key : {"seed", "step", "core", "pc", "field", "expected", "actual"}) {
    EXPECT_NE(json.find(std::string("\"") + key + "\""), std::string::npos) << json;
  }
}

TEST(DiffRunTest, FuzzedSingleCorePrograms) {
  const std::uint64_t seed = fuzz::seed_from_env(42);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    fuzz::Rng rng(seed + i);
    fuzz::BundleShape shape;
    shape.cores = 1;
    shape.length = 200;
    DiffOptions options;
    options.seed = seed + i;
    const DiffReport r = diff_run(fuzz::random_bundle(rng, shape), options);
    ASSERT_TRUE(r.ok()) << r.divergence->to_json();
  }
}

TEST(DiffRunTest, FuzzedMultiCoreBundles) {
  const std::uint64_t seed = fuzz::seed_from_env(43);
  for (std::uint64_t i = 0; i < 200; ++i) {
    fuzz::Rng rng(seed + i);
    fuzz::BundleShape shape;
    shape.cores = 2 + i % 3;
    shape.mode = i % 4 == 0 ? isa::EncodingMode::kWord32 : isa::EncodingMode::kWord64;
    DiffOptions options;
    options.seed = seed + i;
    options.machine.overlap = i % 2 ? vm::OverlapMode::kPermissive : vm::OverlapMode::kStrict;
    const DiffReport r = diff_run(fuzz::random_bundle(rng, shape), options);
    ASSERT_TRUE(r.ok()) << r.divergence->to_json();
  }
}

}  // namespace
}  // namespace pimkit::oracle
