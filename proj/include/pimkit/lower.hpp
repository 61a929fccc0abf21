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

// Straight-line code generation for small multi-layer perceptrons.
//
// Each layer computes y = act(wrap(saturate(W x) + b)) with W x on the
// matrix unit, the bias on the vector unit and the activation either fused
// into mvmul (ReLU with an all-zero bias) or emitted as a vector
// instruction. A layer may be split by output rows across several cores;
// the first core listed gathers the full output.
//
// All cross-core traffic is emitted in one global order, so every core's
// communication is a subsequence of it and the program cannot deadlock.

#ifndef PIMKIT_LOWER_HPP_
#define PIMKIT_LOWER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pimkit/manifest.hpp"

namespace pimkit::lower {

enum class Activation { kNone, kRelu, kSigmoid, kTanh };
enum class Transport { kSendRecv, kGlobalMemory };

struct LayerSpec {
  manifest::Matrix weights;          // out x in
  std::vector<std::int64_t> bias;    // out elements; empty means zero
  Activation activation = Activation::kNone;
  std::uint32_t ibiw = 8;
  std::uint32_t obiw = 8;
  std::uint32_t mbiw = 8;            // weight bit-width
  std::vector<std::uint32_t> cores = {0};
};

struct MlpSpec {
  std::vector<std::uint32_t> layer_dims;
  std::vector<LayerSpec> layers;
  Transport transport = Transport::kSendRecv;
  bool variable_bitwidth_supported = true;
  isa::EncodingMode mode = isa::EncodingMode::kWord64;
  std::uint32_t local_mem_bytes = manifest::kDefaultLocalMemBytes;
  manifest::ActivationFormat activation_qformat;
  std::optional<std::vector<std::int64_t>> input;  // preloaded into gmem
};

enum class ErrorKind { kInvalidSpec, kLayerTooLargeForLocalMemory, kWidthUnsupported };

class LoweringError : public std::runtime_error {
 public:
  LoweringError(ErrorKind kind, const std::string& message);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Contiguous row ranges [begin, end). The first rows % parts parts get one
// extra row, so 8 rows in 3 parts are 3, 3, 2.
std::vector<std::pair<std::uint32_t, std::uint32_t>> split_layer_rows(std::uint32_t rows,
                                                                      std::uint32_t parts);

struct Region {
  std::string name;
  std::uint64_t begin = 0;
  std::uint64_t size = 0;
};

struct PartPlan {
  std::uint32_t layer = 0;
  std::uint32_t core = 0;
  std::uint32_t group = 0;
  std::uint32_t row_begin = 0;
  std::uint32_t row_end = 0;
  bool relu_fused = false;
};

struct LoweringPlan {
  std::vector<std::vector<Region>> local_regions;  // per core
  std::vector<Region> global_regions;
  std::vector<PartPlan> parts;
  std::vector<std::uint32_t> events_used;  // per core
};

struct IoLayout {
  std::uint64_t input_address = 0;
  std::uint32_t input_count = 0;
  std::uint32_t input_bits = 8;
  std::uint64_t output_address = 0;
  std::uint32_t output_count = 0;
  std::uint32_t output_bits = 8;
};

struct LoweredMlp {
  manifest::ProgramBundle bundle;
  IoLayout io;
  LoweringPlan plan;
};

LoweredMlp lower_mlp(const MlpSpec& spec);

// Element codec used for gmem inputs and outputs.
std::vector<std::uint8_t> encode_elements(std::span<const std::int64_t> values,
                                          std::uint32_t bits);
std::vector<std::int64_t> decode_elements(std::span<const std::uint8_t> bytes,
                                          std::size_t count, std::uint32_t bits);

// Places `x` at the input address, replacing any earlier input.
void set_input(manifest::ProgramBundle& bundle, const IoLayout& io,
               std::span<const std::int64_t> x);
std::vector<std::int64_t> read_output(std::span<const std::uint8_t> gmem, const IoLayout& io);

// JSON form:
//   {"layer_dims": [16, 12, 8, 4],
//    "weights": [[[...]]], "biases": [[...]],
//    "activations": ["relu", "relu", "none"],
//    "widths": [[8, 8], ...], "weight_bits": [8, ...],
//    "core_assignment": [0, [0, 1], 1],
//    "transport": "send_recv" | "global_memory",
//    "variable_bitwidth_supported": true, "mode": 64,
//    "local_mem_bytes": 262144, "activation_qformat": {...},
//    "input": [...]}
MlpSpec parse_mlp_spec(std::string_view json_text);
MlpSpec load_mlp_spec(const std::filesystem::path& path);

}  // namespace pimkit::lower

#endif  // PIMKIT_LOWER_HPP_
