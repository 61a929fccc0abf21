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

#include "pimkit/manifest.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pimkit/fuzz.hpp"

namespace pimkit::manifest {
namespace {

constexpr const char* kMinimal = R"({
  "cores": [{
    "core_id": 0,
    "code": ["sldi $r1, 0", "sldi $r2, 16", "mvmul $r2, $r1, 8, 0, 0"],
    "arrays": [{"array_id": 0, "weights": [[1, 0], [0, 1]]}],
    "groups": [{"group_id": 0, "total_rows": 2, "total_cols": 2,
                "tiles": [{"array_id": 0, "row_offset": 0, "col_offset": 0}]}]
  }]
})";

bool mentions(const BundleError& e, const std::string& text) {
  for (const auto& issue : e.issues()) {
    if (issue.path.find(text) != std::string::npos ||
        issue.message.find(text) != std::string::npos) {
      return true;
    }
  }
  return false;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

TEST(ManifestTest, MinimalBundleParses) {
  const ProgramBundle b = parse_bundle(kMinimal);
  ASSERT_EQ(b.cores.size(), 1U);
  const CoreConfig& c = b.cores[0];
  EXPECT_EQ(c.local_mem_bytes, kDefaultLocalMemBytes);
  EXPECT_EQ(c.event_register_count, kDefaultEventRegisters);
  EXPECT_EQ(c.initial_ibiw, 8U);
  EXPECT_EQ(b.global_mem_bytes, kDefaultGlobalMemBytes);
  ASSERT_EQ(c.groups.size(), 1U);
  EXPECT_EQ(c.groups[0].total_rows, 2U);
  EXPECT_EQ(c.groups[0].total_cols, 2U);
  Matrix identity(2, 2);
  identity.at(0, 0) = identity.at(1, 1) = 1;
  EXPECT_EQ(assemble_group_matrix(c, 0), identity);
}

TEST(ManifestTest, OverlappingTilesAreRejected) {
  const std::string text = replace(
      kMinimal, R"("tiles": [{"array_id": 0, "row_offset": 0, "col_offset": 0}])",
      R"("tiles": [{"array_id": 0, "row_offset": 0, "col_offset": 0},
                   {"array_id": 0, "row_offset": 0, "col_offset": 0}])");
  try {
    parse_bundle(text);
    FAIL() << "overlapping tiles accepted";
  } catch (const BundleError& e) {
    EXPECT_TRUE(mentions(e, "overlap")) << e.what();
    EXPECT_TRUE(mentions(e, "cores[0].groups[0]")) << e.what();
  }
}

TEST(ManifestTest, GapsInTilingAreRejected) {
  const std::string text = replace(kMinimal, R"("total_rows": 2, "total_cols": 2)",
                                   R"("total_rows": 2, "total_cols": 3)");
  EXPECT_THROW(parse_bundle(text), BundleError);
}

TEST(ManifestTest, SetbwNeedsVariableBitWidth) {
  std::string text = replace(kMinimal, R"("sldi $r1, 0")", R"("setbw 8, 16")");
  text = replace(text, "{\n  \"cores\"", "{\"variable_bitwidth_supported\": false, \"cores\"");
  try {
    parse_bundle(text);
    FAIL() << "setbw accepted without variable bit-width";
  } catch (const BundleError& e) {
    EXPECT_TRUE(mentions(e, "variable bit-width")) << e.what();
  }
}

TEST(ManifestTest, WeightOutsideMbiwIsRejected) {
  const std::string text = replace(kMinimal, "[[1, 0], [0, 1]]", "[[1, 0], [0, 200]]");
  try {
    parse_bundle(text);
    FAIL() << "weight 200 accepted for mbiw=8";
  } catch (const BundleError& e) {
    EXPECT_TRUE(mentions(e, "mbiw")) << e.what();
  }
}

TEST(ManifestTest, UnknownGroupAndCoreAreRejected) {
  EXPECT_THROW(parse_bundle(replace(kMinimal, "mvmul $r2, $r1, 8, 0, 0",
                                    "mvmul $r2, $r1, 8, 0, 1")),
               BundleError);
  EXPECT_THROW(parse_bundle(replace(kMinimal, R"("sldi $r1, 0")", R"("send $r1, 3, 4")")),
               BundleError);
  EXPECT_THROW(parse_bundle(replace(kMinimal, R"("sldi $r1, 0")", R"("send $r1, 0, 4")")),
               BundleError);
}

TEST(ManifestTest, MalformedJsonIsAnError) {
  EXPECT_THROW(parse_bundle("{\"cores\": ["), BundleError);
  EXPECT_THROW(parse_bundle("[]"), BundleError);
}

TEST(ManifestTest, HorizontalTiling) {
  CoreConfig c;
  Matrix a(2, 2);
  a.data = {1, 2, 3, 4};
  Matrix b(2, 2);
  b.data = {5, 6, 7, 8};
  c.arrays = {LogicalArray{0, a, std::nullopt}, LogicalArray{1, b, std::nullopt}};
  c.groups = {ArrayGroup{0, {Tile{0, 0, 0}, Tile{1, 0, 2}}, 2, 4}};
  Matrix expected(2, 4);
  expected.data = {1, 2, 5, 6, 3, 4, 7, 8};
  EXPECT_EQ(assemble_group_matrix(c, 0), expected);
  EXPECT_THROW(assemble_group_matrix(c, 1), std::exception);
}

TEST(ManifestTest, RandomQuadTilingMatchesScatter) {
  fuzz::Rng rng(fuzz::seed_from_env(31));
  std::uniform_int_distribution<int> value(-128, 127);
  std::uniform_int_distribution<std::uint32_t> cut(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t r = cut(rng);
    const std::uint32_t col = cut(rng);
    CoreConfig c;
    const std::uint32_t rows[2] = {r, 4 - r};
    const std::uint32_t cols[2] = {col, 4 - col};
    std::vector<Tile> tiles;
    for (std::uint32_t i = 0; i < 2; ++i) {
      for (std::uint32_t j = 0; j < 2; ++j) {
        Matrix w(rows[i], cols[j]);
        for (auto& x : w.data) x = value(rng);
        const auto id = static_cast<std::uint32_t>(c.arrays.size());
        c.arrays.push_back(LogicalArray{id, w, std::nullopt});
        tiles.push_back(Tile{id, i == 0 ? 0 : r, j == 0 ? 0 : col});
      }
    }
    std::shuffle(tiles.begin(), tiles.end(), rng);
    c.groups = {ArrayGroup{0, tiles, 4, 4}};
    Matrix scatter(4, 4);
    for (const Tile& t : tiles) {
      const Matrix& w = c.arrays[t.array_id].weights;
      for (std::size_t i = 0; i < w.rows; ++i) {
        for (std::size_t j = 0; j < w.cols; ++j) scatter.at(t.row_offset + i, t.col_offset + j) = w.at(i, j);
      }
    }
    ASSERT_EQ(assemble_group_matrix(c, 0), scatter);
  }
}

TEST(ManifestTest, MinimalRoundTripIsExactAndStable) {
  const ProgramBundle b = parse_bundle(kMinimal);
  const std::string once = serialize_bundle(b);
  EXPECT_EQ(serialize_bundle(b), once);
  EXPECT_EQ(parse_bundle(once), b);
}

TEST(ManifestTest, FuzzedBundlesRoundTrip) {
  fuzz::Rng rng(fuzz::seed_from_env(32));
  for (int i = 0; i < 100; ++i) {
    fuzz::BundleShape shape;
    shape.cores = 1 + i % 4;
    shape.length = 40;
    shape.mode = i % 3 == 0 ? isa::EncodingMode::kWord32 : isa::EncodingMode::kWord64;
    const ProgramBundle b = fuzz::random_bundle(rng, shape);
    ASSERT_EQ(parse_bundle(serialize_bundle(b)), b) << "bundle " << i;
  }
}

TEST(ManifestTest, ExternalWeightFile) {
  const auto dir = std::filesystem::temp_directory_path() / "pimkit_manifest_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "w.wbin", std::ios::binary);
    const std::int32_t w[4] = {1, -2, 3, -4};
    out.write(reinterpret_cast<const char*>(w), sizeof w);
  }
  const std::string text = replace(kMinimal, R"("weights": [[1, 0], [0, 1]])",
                                   R"("weights_file": "w.wbin", "rows": 2, "cols": 2)");
  const ProgramBundle b = parse_bundle(text, dir);
  const Matrix& w = b.cores[0].arrays[0].weights;
  EXPECT_EQ(w.data, (std::vector<std::int32_t>{1, -2, 3, -4}));
  EXPECT_EQ(b.cores[0].arrays[0].weights_file, std::optional<std::string>("w.wbin"));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace pimkit::manifest
