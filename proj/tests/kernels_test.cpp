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

#include "pimkit/kernels.hpp"

#include <gtest/gtest.h>

#include <random>

namespace pimkit::kernels {
namespace {

std::vector<std::int64_t> random_vector(std::mt19937_64& rng, std::size_t n, unsigned bits) {
  std::uniform_int_distribution<std::int64_t> d(-(std::int64_t{1} << (bits - 1)),
                                                (std::int64_t{1} << (bits - 1)) - 1);
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

TEST(KernelsTest, WrapAndSaturate) {
  EXPECT_EQ(wrap(128, 8), -128);
  EXPECT_EQ(wrap(-129, 8), 127);
  EXPECT_EQ(wrap(1023, 10), -1);
  EXPECT_EQ(wrap(Wide{1} << 40, 32), 0);
  EXPECT_EQ(saturate(32258, 8), 127);
  EXPECT_EQ(saturate(-32258, 8), -128);
  EXPECT_EQ(saturate(5, 8), 5);
  EXPECT_EQ(saturate(Wide{1} << 70, 32), 2147483647);
}

TEST(KernelsTest, ActivateScalar) {
  const ActivationParams q6{6, 6, 8};
  EXPECT_EQ(activate(Activation::kRelu, -5, q6), 0);
  EXPECT_EQ(activate(Activation::kTanh, 0, q6), 0);
  EXPECT_EQ(activate(Activation::kSigmoid, 0, q6), 32);
  EXPECT_EQ(activate(Activation::kTanh, 127, q6), 62);
  EXPECT_EQ(activate(Activation::kTanh, -128, q6), -62);
}

// Sizes straddle kParallelThreshold so both code paths run.
class SerialParallelTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(SerialParallelTest, Matvec) {
  std::mt19937_64 rng(GetParam());
  const std::size_t rows = GetParam();
  const std::size_t cols = 64;
  manifest::Matrix w(rows, cols);
  for (auto& x : w.data) x = static_cast<std::int32_t>(rng() % 255) - 127;
  const auto x = random_vector(rng, cols, 16);
  std::vector<Wide> a(rows);
  std::vector<Wide> b(rows);
  serial::matvec(w, x, a);
  parallel::matvec(w, x, b);
  EXPECT_EQ(a, b);
  matvec(w, x, b);
  EXPECT_EQ(a, b);
}

TEST_P(SerialParallelTest, Binary) {
  std::mt19937_64 rng(GetParam() + 1);
  const std::size_t n = GetParam() * 64;
  const auto a = random_vector(rng, n, 8);
  auto b = random_vector(rng, n, 8);
  for (const BinaryOp op : {BinaryOp::kAdd, BinaryOp::kSub, BinaryOp::kMul, BinaryOp::kMax,
                            BinaryOp::kShiftLeft, BinaryOp::kShiftRight}) {
    if (op == BinaryOp::kShiftLeft) {
      for (auto& x : b) x = x < 0 ? -x - 1 : x;
    }
    std::vector<std::int64_t> s(n);
    std::vector<std::int64_t> p(n);
    serial::binary(op, a, b, s, 8);
    parallel::binary(op, a, b, p, 8);
    EXPECT_EQ(s, p) << static_cast<int>(op);
  }
}

TEST_P(SerialParallelTest, DotAndActivation) {
  std::mt19937_64 rng(GetParam() + 2);
  const std::size_t n = GetParam() * 64;
  const auto a = random_vector(rng, n, 16);
  const auto b = random_vector(rng, n, 16);
  EXPECT_TRUE(serial::dot(a, b) == parallel::dot(a, b));
  for (const Activation f : {Activation::kRelu, Activation::kTanh, Activation::kSigmoid}) {
    const ActivationParams q{12, 12, 16};
    std::vector<std::int64_t> s(n);
    std::vector<std::int64_t> p(n);
    serial::activation(f, a, s, q);
    parallel::activation(f, a, p, q);
    EXPECT_EQ(s, p);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, SerialParallelTest, ::testing::Values(1, 7, 256, 1024));

}  // namespace
}  // namespace pimkit::kernels
