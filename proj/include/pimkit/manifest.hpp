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

// Program bundles: per-core code, logical arrays and array groups, memory
// sizes and activation format. Stored as `.pimbundle.json`.

#ifndef PIMKIT_MANIFEST_HPP_
#define PIMKIT_MANIFEST_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pimkit/isa.hpp"

namespace pimkit::manifest {

inline constexpr std::uint32_t kDefaultLocalMemBytes = 262144;
inline constexpr std::uint64_t kDefaultGlobalMemBytes = 16777216;
inline constexpr std::uint32_t kDefaultEventRegisters = 16;
inline constexpr std::uint32_t kDefaultBitWidth = 8;

// Dense row-major integer matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::int32_t& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int32_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

struct LogicalArray {
  std::uint32_t array_id = 0;
  Matrix weights;  // rows x cols
  // When set, weights were read from this little-endian int32 file and are
  // written back as a reference rather than inline.
  std::optional<std::string> weights_file;
  bool operator==(const LogicalArray&) const = default;
};

struct Tile {
  std::uint32_t array_id = 0;
  std::uint32_t row_offset = 0;
  std::uint32_t col_offset = 0;
  bool operator==(const Tile&) const = default;
};

// Output length is total_rows and input length total_cols:
// y[r] = sum_c W[r][c] * x[c].
struct ArrayGroup {
  std::uint32_t group_id = 0;
  std::vector<Tile> tiles;
  std::uint32_t total_rows = 0;
  std::uint32_t total_cols = 0;
  bool operator==(const ArrayGroup&) const = default;
};

struct CoreConfig {
  std::uint32_t core_id = 0;
  std::vector<isa::Instruction> code;
  std::uint32_t local_mem_bytes = kDefaultLocalMemBytes;
  std::uint32_t event_register_count = kDefaultEventRegisters;
  std::vector<LogicalArray> arrays;
  std::vector<ArrayGroup> groups;
  std::uint32_t initial_ibiw = kDefaultBitWidth;
  std::uint32_t initial_obiw = kDefaultBitWidth;
  bool operator==(const CoreConfig&) const = default;
};

struct GlobalInit {
  std::uint64_t address = 0;
  std::vector<std::uint8_t> bytes;
  bool operator==(const GlobalInit&) const = default;
};

// Fixed-point interpretation for vtanh/vsigm. Unset fields default to
// (bit-width - 2) of the operand at the time of use.
struct ActivationFormat {
  std::optional<std::uint32_t> frac_in;
  std::optional<std::uint32_t> frac_out;

  std::uint32_t input_frac(std::uint32_t ibiw) const {
    return frac_in.value_or(ibiw > 2 ? ibiw - 2 : 0);
  }
  std::uint32_t output_frac(std::uint32_t obiw) const {
    return frac_out.value_or(obiw > 2 ? obiw - 2 : 0);
  }
  bool operator==(const ActivationFormat&) const = default;
};

struct ProgramBundle {
  isa::EncodingMode mode = isa::EncodingMode::kWord64;
  std::vector<CoreConfig> cores;
  std::uint64_t global_mem_bytes = kDefaultGlobalMemBytes;
  std::vector<GlobalInit> global_mem_init;
  ActivationFormat activation_qformat;
  bool variable_bitwidth_supported = true;
  bool operator==(const ProgramBundle&) const = default;
};

struct BundleIssue {
  std::string path;  // JSON-pointer-like location, e.g. "cores[0].groups[1]"
  std::string message;
};

class BundleError : public std::runtime_error {
 public:
  explicit BundleError(std::vector<BundleIssue> issues);
  const std::vector<BundleIssue>& issues() const { return issues_; }

 private:
  std::vector<BundleIssue> issues_;
};

class UnknownGroup : public std::out_of_range {
 public:
  UnknownGroup(std::uint32_t core, std::uint32_t group);
};

// Every structural and cross-reference problem in `bundle`; empty when valid.
std::vector<BundleIssue> check_bundle(const ProgramBundle& bundle);

// Throws BundleError when check_bundle reports anything.
void validate_bundle(const ProgramBundle& bundle);

// Parses and validates. Relative weight-file paths resolve against base_dir.
ProgramBundle parse_bundle(std::string_view json_text,
                           const std::filesystem::path& base_dir = {});

ProgramBundle load_bundle_file(const std::filesystem::path& path);

std::string serialize_bundle(const ProgramBundle& bundle);

// Scatters the group's tiles into a total_rows x total_cols matrix.
Matrix assemble_group_matrix(const CoreConfig& core, std::uint32_t group_id);

// Lazily assembled group matrices for one core.
class GroupCache {
 public:
  explicit GroupCache(const CoreConfig& core) : core_(&core) {}
  const Matrix& get(std::uint32_t group_id);

 private:
  const CoreConfig* core_;
  std::map<std::uint32_t, Matrix> cache_;
};

}  // namespace pimkit::manifest

#endif  // PIMKIT_MANIFEST_HPP_
