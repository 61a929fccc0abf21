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

// Drives the built pimkit binary and checks exit codes and output.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "pimkit/isa.hpp"
#include "pimkit/lower.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pimkit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(PIMKIT_CLI) + " " + args + " 2>" + err.string();
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return o;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = slurp(err);
    return o;
  }

  static std::string data(const std::string& name) {
    return std::string(PIMKIT_TESTDATA) + "/" + name;
  }

  fs::path dir_;
};

TEST_F(CliTest, AssembleAndDisassemble) {
  const fs::path bin = dir_ / "dot.pimi";
  Outcome o = run("asm " + data("dot.pasm") + " -o " + bin.string());
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string bytes = slurp(bin);
  ASSERT_GE(bytes.size(), 12U);
  EXPECT_EQ(bytes.substr(0, 4), "PIMI");
  EXPECT_EQ(bytes.size(), 12U + 4 * 8);

  o = run("disasm " + bin.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("vdmul $r3, $r1, $r2, 3"), std::string::npos) << o.out;
}

TEST_F(CliTest, WordModeStream) {
  const fs::path bin = dir_ / "dot32.pimi";
  const Outcome o = run("asm " + data("dot.pasm") + " --mode 32 -o " + bin.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(slurp(bin).size(), 12U + 4 * 4);
}

TEST_F(CliTest, UnknownMnemonicNamesTheLine) {
  const Outcome o = run("asm " + data("bad_mnemonic.pasm") + " -o " + (dir_ / "x").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find(":3"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("vfoo"), std::string::npos) << o.err;
}

TEST_F(CliTest, OffsetsRejectedInWordMode) {
  const Outcome o = run("asm " + data("offsets.pasm") + " --mode 32 -o " + (dir_ / "x").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("offsets are not supported in 32-bit mode"), std::string::npos) << o.err;
}

TEST_F(CliTest, IdentityMlpRoundTripsTheInput) {
  const fs::path bundle = dir_ / "mlp.json";
  const fs::path gmem = dir_ / "gmem.bin";
  Outcome o = run("gen-mlp " + data("identity_mlp.json") + " -o " + bundle.string());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto io = nlohmann::json::parse(o.out);

  o = run("run " + bundle.string() + " --gmem-out " + gmem.string() + " --stats " +
          (dir_ / "stats.json").string() + " --trace " + (dir_ / "trace.txt").string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("status Completed"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("gmem_digest 0x"), std::string::npos) << o.out;

  const std::string image = slurp(gmem);
  pimkit::lower::IoLayout layout;
  layout.output_address = io["output_address"];
  layout.output_count = io["output_count"];
  layout.output_bits = io["output_bits"];
  const std::vector<std::uint8_t> bytes(image.begin(), image.end());
  EXPECT_EQ(pimkit::lower::read_output(bytes, layout),
            (std::vector<std::int64_t>{7, -3, 100, -128}));

  const auto stats = nlohmann::json::parse(slurp(dir_ / "stats.json"));
  EXPECT_GT(stats["steps"].get<int>(), 0);
  EXPECT_FALSE(slurp(dir_ / "trace.txt").empty());
}

TEST_F(CliTest, DeadlockExitsWithTwo) {
  const Outcome o = run("run " + data("deadlock.json"));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("Deadlock"), std::string::npos) << o.err;
}

TEST_F(CliTest, StepLimit) {
  const Outcome o = run("run " + data("loop.json") + " --max-steps 1");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("StepLimitExceeded"), std::string::npos) << o.err;
}

TEST_F(CliTest, MissingFileIsUserError) {
  EXPECT_EQ(run("run " + (dir_ / "absent.json").string()).code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
}

TEST_F(CliTest, Diff) {
  Outcome o = run("diff " + data("loop.json"));
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("no divergence"), std::string::npos) << o.out;
  o = run("diff --fuzz 20 --cores 2 --seed 4");
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("0 divergent"), std::string::npos) << o.out;
}

TEST_F(CliTest, Selftest) {
  Outcome o = run("selftest --seed 11");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("roundtrip"), std::string::npos) << o.out;
  o = run("selftest --seed 11 --inject-fault");
  EXPECT_EQ(o.code, 2) << o.out;
  EXPECT_NE(o.out.find("FAIL"), std::string::npos) << o.out;
}

}  // namespace
