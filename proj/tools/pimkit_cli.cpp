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

// pimkit: assemble, disassemble, run, generate and self-test PIM programs.
//
// Exit status: 0 on success, 1 on user error, 2 on trap or divergence.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pimkit/asm.hpp"
#include "pimkit/fuzz.hpp"
#include "pimkit/isa.hpp"
#include "pimkit/lower.hpp"
#include "pimkit/manifest.hpp"
#include "pimkit/oracle.hpp"
#include "pimkit/selftest.hpp"
#include "pimkit/vm.hpp"

namespace {

namespace fs = std::filesystem;
using namespace pimkit;

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kTrapped = 2;

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  const std::string s = read_text(path);
  return {s.begin(), s.end()};
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw UserError("cannot write " + path.string());
}

void write_file(const fs::path& path, std::span<const std::uint8_t> data) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

isa::EncodingMode parse_mode(int bits) {
  return bits == 32 ? isa::EncodingMode::kWord32 : isa::EncodingMode::kWord64;
}

std::string digest_text(std::uint64_t digest) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, digest);
  return buf;
}

// ---------------------------------------------------------------------------

struct AsmArgs {
  std::string input;
  std::string output;
  int mode = 64;
};

int cmd_asm(const AsmArgs& args) {
  const std::string text = read_text(args.input);
  const assembler::AssembleResult result = assembler::assemble(text);
  if (!result.ok()) {
    for (const auto& d : result.diagnostics()) {
      std::cerr << args.input << ":" << d.line << ":" << d.column << ": " << d.message << "\n";
    }
    return kUserError;
  }
  const auto mode = parse_mode(args.mode);
  const assembler::SourceProgram& program = result.program();
  fs::path out = args.output.empty() ? fs::path(args.input).replace_extension(".bin")
                                     : fs::path(args.output);
  std::vector<std::pair<fs::path, std::vector<std::uint8_t>>> files;
  for (const assembler::Section& section : program.sections) {
    for (std::size_t k = 0; k < section.instructions.size(); ++k) {
      try {
        isa::encode(section.instructions[k], mode);
      } catch (const isa::IsaError& e) {
        std::cerr << args.input << ":" << section.source_lines[k] << ": " << e.what() << "\n";
        return kUserError;
      }
    }
    fs::path path = out;
    if (program.sections.size() > 1) {
      path = out.parent_path() / (out.stem().string() + ".core" +
                                  std::to_string(section.core_id) + out.extension().string());
    }
    files.emplace_back(path, isa::write_stream(section.instructions, mode));
  }
  for (const auto& [path, bytes] : files) {
    write_file(path, bytes);
    std::cout << path.string() << "\n";
  }
  return kOk;
}

struct DisasmArgs {
  std::string input;
  std::string output;
  std::uint32_t core = 0;
};

int cmd_disasm(const DisasmArgs& args) {
  isa::DecodedStream stream;
  try {
    stream = isa::read_stream(read_bytes(args.input));
  } catch (const isa::IsaError& e) {
    throw UserError(args.input + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw UserError(args.input + ": " + e.what());
  }
  assembler::SourceProgram program;
  program.sections.push_back(assembler::Section{args.core, stream.code, {}});
  const std::string text = assembler::disassemble(program);
  if (args.output.empty()) {
    std::cout << text;
  } else {
    write_file(args.output, text);
  }
  return kOk;
}

struct RunArgs {
  std::string bundle;
  std::string trace;
  std::string stats;
  std::string gmem_out;
  std::uint64_t max_steps = 1'000'000;
  bool permissive = false;
};

int cmd_run(const RunArgs& args) {
  const manifest::ProgramBundle bundle = manifest::load_bundle_file(args.bundle);
  vm::MachineOptions options;
  options.overlap = args.permissive ? vm::OverlapMode::kPermissive : vm::OverlapMode::kStrict;
  vm::Machine machine = vm::Machine::load(bundle, options);
  std::ofstream trace;
  if (!args.trace.empty()) {
    trace.open(args.trace);
    if (!trace) throw UserError("cannot write " + args.trace);
    machine.set_trace_sink([&](const vm::TraceEvent& e) { trace << e.to_line() << "\n"; });
  }
  const vm::RunResult result = machine.run(args.max_steps);
  if (trace.is_open()) trace.close();
  if (!args.stats.empty()) write_file(args.stats, result.stats_json() + "\n");
  if (!args.gmem_out.empty()) write_file(args.gmem_out, machine.gmem());
  std::cout << "status " << vm::to_string(result.status) << "\n"
            << "steps " << result.steps << "\n"
            << "gmem_digest " << digest_text(machine.gmem_digest()) << "\n";
  if (result.status == vm::RunStatus::kTrapped) {
    std::cerr << result.trap->to_json() << "\n";
    return kTrapped;
  }
  if (result.status == vm::RunStatus::kStepLimitExceeded) {
    nlohmann::ordered_json j;
    j["kind"] = "StepLimitExceeded";
    j["steps"] = result.steps;
    std::cerr << j.dump() << "\n";
    return kTrapped;
  }
  return kOk;
}

struct GenArgs {
  std::string spec;
  std::string output;
};

int cmd_gen_mlp(const GenArgs& args) {
  const lower::MlpSpec spec = lower::load_mlp_spec(args.spec);
  const lower::LoweredMlp lowered = lower::lower_mlp(spec);
  write_file(args.output, manifest::serialize_bundle(lowered.bundle));
  nlohmann::ordered_json io;
  io["input_address"] = lowered.io.input_address;
  io["input_count"] = lowered.io.input_count;
  io["input_bits"] = lowered.io.input_bits;
  io["output_address"] = lowered.io.output_address;
  io["output_count"] = lowered.io.output_count;
  io["output_bits"] = lowered.io.output_bits;
  std::cout << io.dump() << "\n";
  return kOk;
}

struct DiffArgs {
  std::string bundle;
  std::size_t fuzz = 0;
  std::uint32_t cores = 2;
  std::size_t length = 200;
  std::uint64_t max_steps = 1'000'000;
  std::optional<std::uint64_t> seed;
  bool permissive = false;
  bool inject_fault = false;
};

int cmd_diff(const DiffArgs& args) {
  oracle::DiffOptions options;
  options.max_steps = args.max_steps;
  options.seed = args.seed.value_or(fuzz::seed_from_env(1));
  options.machine.overlap =
      args.permissive ? vm::OverlapMode::kPermissive : vm::OverlapMode::kStrict;
  if (args.inject_fault) options.machine.fault = vm::FaultInjection::kVvaddOffByOne;

  if (!args.bundle.empty()) {
    const oracle::DiffReport report =
        oracle::diff_run(manifest::load_bundle_file(args.bundle), options);
    std::cout << report.summary() << "\n";
    if (!report.ok()) {
      std::cerr << report.divergence->to_json() << "\n";
      return kTrapped;
    }
    return kOk;
  }
  if (args.fuzz == 0) throw UserError("diff needs a bundle path or --fuzz N");

  const auto n = static_cast<std::ptrdiff_t>(args.fuzz);
  std::vector<std::optional<oracle::Divergence>> found(args.fuzz);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    oracle::DiffOptions local = options;
    local.seed = options.seed + static_cast<std::uint64_t>(i);
    fuzz::Rng rng(local.seed);
    fuzz::BundleShape shape;
    shape.cores = args.cores;
    shape.length = args.length;
    found[i] = oracle::diff_run(fuzz::random_bundle(rng, shape), local).divergence;
  }
  std::size_t divergent = 0;
  for (const auto& d : found) {
    if (!d) continue;
    if (divergent++ == 0) std::cerr << d->to_json() << "\n";
  }
  std::cout << args.fuzz << " bundles, " << divergent << " divergent\n";
  return divergent == 0 ? kOk : kTrapped;
}

struct SelftestArgs {
  std::optional<std::uint64_t> seed;
  bool full = false;
  bool inject_fault = false;
};

int cmd_selftest(const SelftestArgs& args) {
  selftest::SuiteOptions options;
  options.seed = args.seed.value_or(fuzz::seed_from_env(1));
  options.counts = args.full ? selftest::full_counts() : selftest::reduced_counts();
  if (args.inject_fault) options.fault = vm::FaultInjection::kVvaddOffByOne;
  bool ok = true;
  for (const selftest::PropertyResult& r : selftest::run_suite(options)) {
    ok = ok && r.passed;
    std::printf("%s  %-26s %8" PRIu64 " cases  %6.2f s", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.cases, r.seconds);
    if (!r.detail.empty()) std::printf("  %s", r.detail.c_str());
    std::printf("\n");
  }
  std::printf("seed %" PRIu64 "\n", options.seed);
  return ok ? kOk : kTrapped;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pimkit: PIM instruction set toolchain"};
  app.require_subcommand(1);

  AsmArgs asm_args;
  auto* asm_cmd = app.add_subcommand("asm", "Assemble a .pasm file into PIMI program streams");
  asm_cmd->add_option("input", asm_args.input, "Assembly source")->required();
  asm_cmd->add_option("-o,--output", asm_args.output, "Output path (one file per .core)");
  asm_cmd->add_option("--mode", asm_args.mode, "Instruction width")->check(CLI::IsMember({32, 64}));

  DisasmArgs disasm_args;
  auto* disasm_cmd = app.add_subcommand("disasm", "Disassemble a PIMI program stream");
  disasm_cmd->add_option("input", disasm_args.input, "Program stream")->required();
  disasm_cmd->add_option("-o,--output", disasm_args.output, "Write text here instead of stdout");
  disasm_cmd->add_option("--core", disasm_args.core, "Core id for the .core directive");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run a program bundle");
  run_cmd->add_option("bundle", run_args.bundle, "Bundle JSON")->required();
  run_cmd->add_option("--trace", run_args.trace, "Write one line per retired instruction");
  run_cmd->add_option("--stats", run_args.stats, "Write run statistics as JSON");
  run_cmd->add_option("--gmem-out", run_args.gmem_out, "Write the final global memory image");
  run_cmd->add_option("--max-steps", run_args.max_steps, "Step limit");
  auto* strict = run_cmd->add_flag("--strict-overlap", "Overlapping operands trap (default)");
  auto* permissive =
      run_cmd->add_flag("--permissive-overlap", run_args.permissive, "Snapshot sources instead");
  strict->excludes(permissive);

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-mlp", "Lower an MLP spec to a program bundle");
  gen_cmd->add_option("spec", gen_args.spec, "MLP spec JSON")->required();
  gen_cmd->add_option("-o,--output", gen_args.output, "Bundle JSON to write")->required();

  DiffArgs diff_args;
  auto* diff_cmd = app.add_subcommand("diff", "Check the vm against the reference semantics");
  diff_cmd->add_option("bundle", diff_args.bundle, "Bundle JSON");
  diff_cmd->add_option("--fuzz", diff_args.fuzz, "Check N generated bundles instead");
  diff_cmd->add_option("--cores", diff_args.cores, "Cores per generated bundle")
      ->check(CLI::Range(1, 8));
  diff_cmd->add_option("--length", diff_args.length, "Instructions per generated core");
  diff_cmd->add_option("--max-steps", diff_args.max_steps, "Step limit");
  diff_cmd->add_option("--seed", diff_args.seed, "Seed (default: PIMKIT_SEED or 1)");
  diff_cmd->add_flag("--permissive-overlap", diff_args.permissive, "Permissive overlap mode");
  diff_cmd->add_flag("--inject-fault", diff_args.inject_fault)->group("");

  SelftestArgs self_args;
  auto* self_cmd = app.add_subcommand("selftest", "Run the property suite at reduced size");
  self_cmd->add_option("--seed", self_args.seed, "Seed (default: PIMKIT_SEED or 1)");
  self_cmd->add_flag("--full", self_args.full, "Use the full case counts");
  self_cmd->add_flag("--inject-fault", self_args.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  try {
    if (*asm_cmd) return cmd_asm(asm_args);
    if (*disasm_cmd) return cmd_disasm(disasm_args);
    if (*run_cmd) return cmd_run(run_args);
    if (*gen_cmd) return cmd_gen_mlp(gen_args);
    if (*diff_cmd) return cmd_diff(diff_args);
    if (*self_cmd) return cmd_selftest(self_args);
  } catch (const manifest::BundleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue.path << ": " << issue.message << "\n";
    return kUserError;
  } catch (const lower::LoweringError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  }
  return kUserError;
}
