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

// Data-parallel compute kernels behind the matrix and vector units.
//
// `serial::` is the reference loop nest. `parallel::` is the OpenMP version
// and must produce identical results; all arithmetic is integer except the
// per-element activation functions, which do not reduce across elements.
// The unqualified entry points pick one based on problem size.

#ifndef PIMKIT_KERNELS_HPP_
#define PIMKIT_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>

#include "pimkit/manifest.hpp"

namespace pimkit::kernels {

__extension__ typedef __int128 Wide;

// Work (element operations) below which the serial kernel is used.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

// Two's-complement wrap of `v` into a signed `bits`-wide value.
inline std::int64_t wrap(Wide v, unsigned bits) {
  const auto u = static_cast<unsigned __int128>(v);
  const std::uint64_t low = static_cast<std::uint64_t>(u) &
                            ((bits >= 64) ? ~0ULL : ((1ULL << bits) - 1));
  const std::uint64_t sign = 1ULL << (bits - 1);
  return static_cast<std::int64_t>((low ^ sign) - sign);
}

// Clamp `v` into the signed `bits`-wide range.
inline std::int64_t saturate(Wide v, unsigned bits) {
  const Wide hi = (Wide{1} << (bits - 1)) - 1;
  const Wide lo = -(Wide{1} << (bits - 1));
  if (v > hi) return static_cast<std::int64_t>(hi);
  if (v < lo) return static_cast<std::int64_t>(lo);
  return static_cast<std::int64_t>(v);
}

enum class BinaryOp {
  kAdd,
  kSub,
  kMul,
  kMax,
  kShiftLeft,   // shift counts must be non-negative
  kShiftRight,  // arithmetic
};

enum class Activation { kRelu, kTanh, kSigmoid };

// Fixed-point parameters for tanh/sigmoid. Relu ignores them.
struct ActivationParams {
  unsigned frac_in = 0;
  unsigned frac_out = 0;
  unsigned out_bits = 8;
};

// Scalar activation on one element: relu is max(0, x) wrapped to out_bits;
// tanh/sigmoid interpret x as x / 2^frac_in, evaluate in double precision,
// scale by 2^frac_out, round half away from zero and saturate to out_bits.
std::int64_t activate(Activation f, std::int64_t x, const ActivationParams& p);

namespace serial {

// acc[r] = sum_c w(r, c) * x[c], exact.
void matvec(const manifest::Matrix& w, std::span<const std::int64_t> x,
            std::span<Wide> acc);

// out[i] = wrap(a[i] op b[i], out_bits).
void binary(BinaryOp op, std::span<const std::int64_t> a,
            std::span<const std::int64_t> b, std::span<std::int64_t> out,
            unsigned out_bits);

Wide dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

void activation(Activation f, std::span<const std::int64_t> in,
                std::span<std::int64_t> out, const ActivationParams& p);

}  // namespace serial

namespace parallel {

void matvec(const manifest::Matrix& w, std::span<const std::int64_t> x,
            std::span<Wide> acc);
void binary(BinaryOp op, std::span<const std::int64_t> a,
            std::span<const std::int64_t> b, std::span<std::int64_t> out,
            unsigned out_bits);
Wide dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b);
void activation(Activation f, std::span<const std::int64_t> in,
                std::span<std::int64_t> out, const ActivationParams& p);

}  // namespace parallel

void matvec(const manifest::Matrix& w, std::span<const std::int64_t> x,
            std::span<Wide> acc);
void binary(BinaryOp op, std::span<const std::int64_t> a,
            std::span<const std::int64_t> b, std::span<std::int64_t> out,
            unsigned out_bits);
Wide dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b);
void activation(Activation f, std::span<const std::int64_t> in,
                std::span<std::int64_t> out, const ActivationParams& p);

}  // namespace pimkit::kernels

#endif  // PIMKIT_KERNELS_HPP_
