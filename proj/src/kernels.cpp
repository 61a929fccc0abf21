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

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pimkit::kernels {
namespace {

inline std::int64_t apply(BinaryOp op, std::int64_t a, std::int64_t b,
                          unsigned out_bits) {
  switch (op) {
    case BinaryOp::kAdd:
      return wrap(Wide{a} + b, out_bits);
    case BinaryOp::kSub:
      return wrap(Wide{a} - b, out_bits);
    case BinaryOp::kMul:
      return wrap(Wide{a} * b, out_bits);
    case BinaryOp::kMax:
      return wrap(std::max(a, b), out_bits);
    case BinaryOp::kShiftLeft: {
      const auto s = static_cast<unsigned>(std::min<std::int64_t>(b, 63));
      return wrap(static_cast<Wide>(static_cast<std::uint64_t>(a) << s), out_bits);
    }
    case BinaryOp::kShiftRight: {
      const auto s = static_cast<unsigned>(std::min<std::int64_t>(b, 63));
      return wrap(a >> s, out_bits);
    }
  }
  return 0;
}

std::int64_t round_half_away(double v) {
  return static_cast<std::int64_t>(v < 0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5));
}

}  // namespace

std::int64_t activate(Activation f, std::int64_t x, const ActivationParams& p) {
  if (f == Activation::kRelu) return wrap(std::max<std::int64_t>(x, 0), p.out_bits);
  const double v = std::ldexp(static_cast<double>(x), -static_cast<int>(p.frac_in));
  const double y = f == Activation::kTanh ? std::tanh(v) : 1.0 / (1.0 + std::exp(-v));
  const double scaled = std::ldexp(y, static_cast<int>(p.frac_out));
  const double hi = std::ldexp(1.0, static_cast<int>(p.out_bits) - 1) - 1.0;
  const double lo = -std::ldexp(1.0, static_cast<int>(p.out_bits) - 1);
  const double clamped = std::clamp(scaled, lo - 1.0, hi + 1.0);
  return saturate(round_half_away(clamped), p.out_bits);
}

namespace serial {

void matvec(const manifest::Matrix& w, std::span<const std::int64_t> x,
            std::span<Wide> acc) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    Wide sum = 0;
    const std::int32_t* row = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) sum += Wide{row[c]} * x[c];
    acc[r] = sum;
  }
}

void binary(BinaryOp op, std::span<const std::int64_t> a,
            std::span<const std::int64_t> b, std::span<std::int64_t> out,
            unsigned out_bits) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, a[i], b[i], out_bits);
}

Wide dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  Wide sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += Wide{a[i]} * b[i];
  return sum;
}

void activation(Activation f, std::span<const std::int64_t> in,
                std::span<std::int64_t> out, const ActivationParams& p) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = activate(f, in[i], p);
}

}  // namespace serial

namespace parallel {

void matvec(const manifest::Matrix& w, std::span<const std::int64_t> x,
            std::span<Wide> acc) {
  const auto rows = static_cast<std::ptrdiff_t>(w.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    Wide sum = 0;
    const std::int32_t* row = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) sum += Wide{row[c]} * x[c];
    acc[r] = sum;
  }
}

void binary(BinaryOp op, std::span<const std::int64_t> a,
            std::span<const std::int64_t> b, std::span<std::int64_t> out,
            unsigned out_bits) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = apply(op, a[i], b[i], out_bits);
}

Wide dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  // Integer partial sums combine exactly, so the result does not depend on
  // the thread count.
  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::vector<Wide> partial(static_cast<std::size_t>(threads), 0);
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel num_threads(threads)
  {
    int t = 0;
#ifdef _OPENMP
    t = omp_get_thread_num();
#endif
    Wide sum = 0;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) sum += Wide{a[i]} * b[i];
    partial[static_cast<std::size_t>(t)] = sum;
  }
  Wide total = 0;
  for (const Wide p : partial) total += p;
  return total;
}

void activation(Activation f, std::span<const std::int64_t> in,
                std::span<std::int64_t> out, const ActivationParams& p) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = activate(f, in[i], p);
}

}  // namespace parallel

void matvec(const manifest::Matrix& w, std::span<const std::int64_t> x,
            std::span<Wide> acc) {
  if (w.rows * w.cols >= kParallelThreshold) {
    parallel::matvec(w, x, acc);
  } else {
    serial::matvec(w, x, acc);
  }
}

void binary(BinaryOp op, std::span<const std::int64_t> a,
            std::span<const std::int64_t> b, std::span<std::int64_t> out,
            unsigned out_bits) {
  if (out.size() >= kParallelThreshold) {
    parallel::binary(op, a, b, out, out_bits);
  } else {
    serial::binary(op, a, b, out, out_bits);
  }
}

Wide dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  return a.size() >= kParallelThreshold ? parallel::dot(a, b) : serial::dot(a, b);
}

void activation(Activation f, std::span<const std::int64_t> in,
                std::span<std::int64_t> out, const ActivationParams& p) {
  // Transcendentals cost more per element than integer ops.
  if (in.size() * 16 >= kParallelThreshold) {
    parallel::activation(f, in, out, p);
  } else {
    serial::activation(f, in, out, p);
  }
}

}  // namespace pimkit::kernels
