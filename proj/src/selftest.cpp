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

#include "pimkit/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "pimkit/asm.hpp"
#include "pimkit/isa.hpp"
#include "pimkit/kernels.hpp"
#include "pimkit/oracle.hpp"

namespace pimkit::selftest {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t smin(std::uint32_t bits) { return -(std::int64_t{1} << (bits - 1)); }
std::int64_t smax(std::uint32_t bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

std::int64_t uniform(fuzz::Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

// Times `body`, which fills in passed/cases/detail.
PropertyResult timed(const std::string& name, const std::function<void(PropertyResult&)>& body) {
  PropertyResult r;
  r.name = name;
  const auto start = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

void fail_once(PropertyResult& r, const std::string& detail) {
  if (r.passed) r.detail = detail;
  r.passed = false;
}

oracle::LayerActivation to_oracle(lower::Activation a) {
  switch (a) {
    case lower::Activation::kRelu:
      return oracle::LayerActivation::kRelu;
    case lower::Activation::kSigmoid:
      return oracle::LayerActivation::kSigmoid;
    case lower::Activation::kTanh:
      return oracle::LayerActivation::kTanh;
    case lower::Activation::kNone:
      break;
  }
  return oracle::LayerActivation::kNone;
}

std::string join(std::span<const std::int64_t> v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

// Edge-heavy input vector at `bits`.
std::vector<std::int64_t> random_input(fuzz::Rng& rng, std::size_t n, std::uint32_t bits,
                                       std::size_t index) {
  std::vector<std::int64_t> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (index) {
      case 0:
        x[i] = smax(bits);
        break;
      case 1:
        x[i] = smin(bits);
        break;
      case 2:
        x[i] = i % 2 ? smin(bits) : smax(bits);
        break;
      default:
        x[i] = uniform(rng, smin(bits), smax(bits));
    }
  }
  return x;
}

manifest::ProgramBundle single_core(std::vector<isa::Instruction> code, std::uint32_t lmem_bytes,
                                    std::uint32_t ibiw, std::uint32_t obiw) {
  manifest::ProgramBundle b;
  manifest::CoreConfig c;
  c.code = std::move(code);
  c.local_mem_bytes = lmem_bytes;
  c.initial_ibiw = ibiw;
  c.initial_obiw = obiw;
  b.cores.push_back(std::move(c));
  b.global_mem_bytes = 4096;
  return b;
}

// Runs the bundle on the vm with `lmem` preloaded into core 0, checks it
// against the oracle step by step and returns the final local memory.
std::vector<std::uint8_t> run_checked(const manifest::ProgramBundle& bundle,
                                      const std::vector<std::uint8_t>& lmem,
                                      PropertyResult& r, const std::string& label) {
  oracle::DiffOptions options;
  options.init.resize(1);
  options.init[0].lmem = lmem;
  const oracle::DiffReport report = oracle::diff_run(bundle, options);
  if (!report.ok()) fail_once(r, label + ": " + report.divergence->to_json());
  vm::Machine m = vm::Machine::load(bundle);
  m.core(0).lmem = lmem;
  const vm::RunResult result = m.run(10'000);
  if (result.status != vm::RunStatus::kCompleted) {
    fail_once(r, label + ": run ended " + std::string(vm::to_string(result.status)) +
                     (result.trap ? " " + result.trap->to_json() : ""));
  }
  return m.core(0).lmem;
}

void put(std::vector<std::uint8_t>& mem, std::uint64_t addr, std::span<const std::int64_t> v,
         std::uint32_t bits) {
  const auto bytes = lower::encode_elements(v, bits);
  std::copy(bytes.begin(), bytes.end(), mem.begin() + static_cast<std::ptrdiff_t>(addr));
}

std::vector<std::int64_t> get(const std::vector<std::uint8_t>& mem, std::uint64_t addr,
                              std::size_t n, std::uint32_t bits) {
  return lower::decode_elements(std::span(mem).subspan(addr), n, bits);
}

}  // namespace

Counts full_counts() { return Counts{}; }

Counts reduced_counts() {
  Counts c;
  c.codec = 10'000;
  c.assembler = 1'000;
  c.per_opcode = 500;
  c.mlp_inputs = 20;
  c.split_draws = 10;
  c.sync_repeats = 10;
  c.determinism_bundles = 5;
  c.bitwidth_cases = 100;
  c.edge_cases = 200;
  return c;
}

PropertyResult codec_roundtrip(std::uint64_t seed, std::size_t per_mode) {
  return timed("codec roundtrip", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    for (const auto mode : {isa::EncodingMode::kWord64, isa::EncodingMode::kWord32}) {
      for (std::size_t i = 0; i < per_mode; ++i) {
        const isa::Instruction instr = fuzz::random_instruction(rng, mode);
        const std::uint64_t word = isa::encode(instr, mode);
        ++r.cases;
        if (isa::decode(word, mode) != instr) {
          fail_once(r, "decode(encode(" + assembler::to_text(instr) + ")) differs");
        }
      }
    }
  });
}

PropertyResult assembler_roundtrip(std::uint64_t seed, std::size_t programs) {
  return timed("assembler roundtrip", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    for (std::size_t i = 0; i < programs; ++i) {
      const assembler::SourceProgram program = fuzz::random_program(rng);
      const std::string text = assembler::disassemble(program);
      const assembler::AssembleResult back = assembler::assemble(text);
      ++r.cases;
      if (!back.ok()) {
        fail_once(r, "program " + std::to_string(i) + " failed to assemble: " +
                         assembler::format(back.diagnostics().front()));
      } else if (!(back.program() == program)) {
        fail_once(r, "program " + std::to_string(i) + " changed after a roundtrip");
      }
    }
  });
}

PropertyResult opcode_differential(std::uint64_t seed, std::size_t per_opcode,
                                   vm::FaultInjection fault) {
  return timed("per-opcode differential", [&](PropertyResult& r) {
    const auto ops = isa::all_opcodes();
    const auto n = static_cast<std::ptrdiff_t>(ops.size());
    std::vector<std::string> failures(ops.size());
    std::vector<std::uint64_t> traps(ops.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const isa::Opcode op = ops[k];
      fuzz::Rng rng(seed * 1'000'003 + static_cast<std::uint64_t>(op));
      for (std::size_t i = 0; i < per_opcode; ++i) {
        fuzz::OpcodeCase c = fuzz::random_opcode_case(rng, op);
        c.options.seed = seed;
        c.options.machine.fault = fault;
        const oracle::DiffReport report = oracle::diff_run(c.bundle, c.options);
        if (report.trap) ++traps[k];
        if (!report.ok() && failures[k].empty()) {
          failures[k] = std::string(isa::mnemonic(op)) + " case " + std::to_string(i) + ": " +
                        report.divergence->to_json();
        }
      }
    }
    std::uint64_t trapped = 0;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      r.cases += per_opcode;
      trapped += traps[k];
      if (!failures[k].empty()) fail_once(r, failures[k]);
    }
    if (r.passed) {
      r.detail = std::to_string(ops.size()) + " opcodes, " + std::to_string(trapped) +
                 " trapping cases";
    }
  });
}

std::vector<std::int64_t> reference_forward(const lower::MlpSpec& spec,
                                            std::span<const std::int64_t> x) {
  std::vector<std::int64_t> v;
  for (const std::int64_t e : x) v.push_back(kernels::wrap(e, spec.layers.front().ibiw));
  for (const lower::LayerSpec& layer : spec.layers) {
    std::vector<std::int64_t> bias = layer.bias;
    if (bias.empty()) bias.assign(layer.weights.rows, 0);
    v = oracle::ref_fc_layer(layer.weights, v, bias, to_oracle(layer.activation), layer.obiw,
                             spec.activation_qformat);
  }
  return v;
}

lower::MlpSpec random_mlp(fuzz::Rng& rng, const std::vector<std::uint32_t>& dims,
                          std::uint32_t bits) {
  lower::MlpSpec spec;
  spec.layer_dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    lower::LayerSpec layer;
    layer.ibiw = layer.obiw = layer.mbiw = bits;
    layer.weights = manifest::Matrix(dims[l + 1], dims[l]);
    for (auto& w : layer.weights.data) w = static_cast<std::int32_t>(uniform(rng, smin(bits), smax(bits)));
    layer.bias.resize(dims[l + 1]);
    for (auto& b : layer.bias) b = uniform(rng, smin(bits), smax(bits));
    spec.layers.push_back(std::move(layer));
  }
  return spec;
}

std::vector<std::int64_t> run_lowered(const lower::LoweredMlp& lowered,
                                      std::span<const std::int64_t> x) {
  manifest::ProgramBundle bundle = lowered.bundle;
  lower::set_input(bundle, lowered.io, x);
  vm::Machine m = vm::Machine::load(bundle);
  const vm::RunResult result = m.run(1'000'000);
  if (result.status != vm::RunStatus::kCompleted) {
    throw std::runtime_error("lowered program ended " +
                             std::string(vm::to_string(result.status)) +
                             (result.trap ? " " + result.trap->to_json() : ""));
  }
  return lower::read_output(m.gmem(), lowered.io);
}

PropertyResult mlp_end_to_end(std::uint64_t seed, std::size_t inputs) {
  return timed("end-to-end MLP", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    lower::MlpSpec spec = random_mlp(rng, {16, 12, 8, 4});
    spec.layers[0].activation = lower::Activation::kRelu;
    spec.layers[1].activation = lower::Activation::kRelu;
    std::fill(spec.layers[0].bias.begin(), spec.layers[0].bias.end(), 0);  // fused ReLU

    struct Variant {
      std::string name;
      std::vector<std::vector<std::uint32_t>> cores;
      lower::Transport transport;
    };
    const std::vector<Variant> variants = {
        {"1 core", {{0}, {0}, {0}}, lower::Transport::kSendRecv},
        {"2 cores send/recv", {{0}, {1}, {0}}, lower::Transport::kSendRecv},
        {"2 cores gmem", {{0}, {1}, {0}}, lower::Transport::kGlobalMemory},
    };
    std::vector<lower::LoweredMlp> lowered;
    for (const Variant& v : variants) {
      lower::MlpSpec s = spec;
      for (std::size_t l = 0; l < s.layers.size(); ++l) s.layers[l].cores = v.cores[l];
      s.transport = v.transport;
      lowered.push_back(lower::lower_mlp(s));
    }
    for (std::size_t i = 0; i < inputs; ++i) {
      const auto x = random_input(rng, 16, 8, i);
      const auto expected = reference_forward(spec, x);
      for (std::size_t k = 0; k < variants.size(); ++k) {
        ++r.cases;
        const auto got = run_lowered(lowered[k], x);
        if (got != expected) {
          fail_once(r, variants[k].name + " input " + join(x) + ": expected " + join(expected) +
                           ", got " + join(got));
        }
      }
    }
  });
}

PropertyResult split_invariance(std::uint64_t seed, std::size_t draws) {
  return timed("split invariance", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    for (std::size_t d = 0; d < draws; ++d) {
      const auto in = static_cast<std::uint32_t>(uniform(rng, 1, 16));
      lower::MlpSpec spec = random_mlp(rng, {in, 8});
      spec.layers[0].activation = static_cast<lower::Activation>(d % 4);
      spec.transport = d % 2 ? lower::Transport::kGlobalMemory : lower::Transport::kSendRecv;
      const auto x = random_input(rng, in, 8, d);
      std::vector<std::vector<std::int64_t>> outputs;
      for (const std::vector<std::uint32_t>& cores :
           {std::vector<std::uint32_t>{0}, {0, 1}, {0, 1, 2}}) {
        spec.layers[0].cores = cores;
        outputs.push_back(run_lowered(lower::lower_mlp(spec), x));
        ++r.cases;
      }
      const auto expected = reference_forward(spec, x);
      if (outputs[0] != expected) {
        fail_once(r, "draw " + std::to_string(d) + " unsplit " + join(outputs[0]) +
                         " differs from reference " + join(expected));
      }
      for (std::size_t k = 1; k < outputs.size(); ++k) {
        if (outputs[k] != outputs[0]) {
          fail_once(r, "draw " + std::to_string(d) + " split into " + std::to_string(k + 1) +
                           " gives " + join(outputs[k]) + ", unsplit " + join(outputs[0]));
        }
      }
    }
  });
}

manifest::ProgramBundle sync_twice_bundle() {
  manifest::ProgramBundle b;
  b.global_mem_bytes = 4096;
  manifest::CoreConfig c0;
  c0.core_id = 0;
  c0.local_mem_bytes = 256;
  c0.code = {isa::Wait{0, 2}, isa::Wait{0, 0}, isa::Sldi{isa::RegId{1}, 7}};
  manifest::CoreConfig c1;
  c1.core_id = 1;
  c1.local_mem_bytes = 256;
  c1.code = {isa::Sync{0, 0}, isa::Sync{0, 0}};
  b.cores = {c0, c1};
  return b;
}

manifest::ProgramBundle unmatched_send_bundle() {
  manifest::ProgramBundle b;
  b.global_mem_bytes = 4096;
  manifest::CoreConfig c0;
  c0.core_id = 0;
  c0.local_mem_bytes = 256;
  c0.code = {isa::Send{isa::RegId{0}, 1, 4, 0}};
  manifest::CoreConfig c1;
  c1.core_id = 1;
  c1.local_mem_bytes = 256;
  c1.code = {isa::Sldi{isa::RegId{1}, 1}};
  b.cores = {c0, c1};
  return b;
}

RunRecord record_run(const manifest::ProgramBundle& bundle, std::uint64_t max_steps,
                     vm::MachineOptions options) {
  RunRecord rec;
  vm::Machine m = vm::Machine::load(bundle, options);
  m.set_trace_sink([&](const vm::TraceEvent& e) { rec.trace.push_back(e.to_line()); });
  rec.result = m.run(max_steps);
  rec.stats = rec.result.stats_json();
  rec.digest = m.gmem_digest();
  return rec;
}

PropertyResult sync_semantics(std::size_t repeats) {
  return timed("synchronization semantics", [&](PropertyResult& r) {
    const manifest::ProgramBundle twice = sync_twice_bundle();
    const manifest::ProgramBundle unmatched = unmatched_send_bundle();
    std::optional<RunRecord> first_twice;
    std::optional<RunRecord> first_unmatched;
    for (std::size_t i = 0; i < repeats; ++i) {
      r.cases += 2;
      vm::Machine m = vm::Machine::load(twice);
      const vm::RunResult res = m.run(1000);
      if (res.status != vm::RunStatus::kCompleted) {
        fail_once(r, "sync-twice run ended " + std::string(vm::to_string(res.status)));
      } else if (m.core(0).events[0] != 0 || m.core(0).regs[1] != 7) {
        fail_once(r, "sync-twice left ev0=" + std::to_string(m.core(0).events[0]) +
                         " r1=" + std::to_string(m.core(0).regs[1]));
      }
      RunRecord a = record_run(twice);
      RunRecord b = record_run(unmatched);
      if (!b.result.trap || b.result.trap->kind != vm::TrapKind::kDeadlock) {
        fail_once(r, "unmatched send did not deadlock: " + b.stats);
      }
      if (!first_twice) {
        first_twice = std::move(a);
        first_unmatched = std::move(b);
        continue;
      }
      if (a.trace != first_twice->trace || a.stats != first_twice->stats) {
        fail_once(r, "sync-twice run " + std::to_string(i) + " differs from run 0");
      }
      if (b.trace != first_unmatched->trace || b.stats != first_unmatched->stats ||
          b.result.trap->to_json() != first_unmatched->result.trap->to_json()) {
        fail_once(r, "unmatched-send run " + std::to_string(i) + " differs from run 0");
      }
    }
  });
}

PropertyResult determinism(std::uint64_t seed, std::size_t bundles) {
  return timed("determinism", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    for (std::size_t i = 0; i < bundles; ++i) {
      fuzz::BundleShape shape;
      shape.cores = 2 + static_cast<std::uint32_t>(i % 3);
      shape.length = 150;
      const manifest::ProgramBundle bundle = fuzz::random_bundle(rng, shape);
      const RunRecord a = record_run(bundle);
      const RunRecord b = record_run(bundle);
      ++r.cases;
      if (a.trace != b.trace) fail_once(r, "bundle " + std::to_string(i) + ": traces differ");
      if (a.stats != b.stats) fail_once(r, "bundle " + std::to_string(i) + ": stats differ");
      if (a.digest != b.digest) fail_once(r, "bundle " + std::to_string(i) + ": digests differ");
    }
  });
}

PropertyResult variable_bitwidth(std::uint64_t seed, std::size_t cases) {
  return timed("variable bit-width", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    using isa::RegId;
    constexpr std::uint64_t kA = 0, kB = 64, kC = 128, kD = 192, kE = 320, kF = 448, kG = 576,
                            kH = 704;
    for (std::size_t i = 0; i < cases; ++i) {
      const auto n = static_cast<std::uint32_t>(uniform(rng, 1, 48));
      const auto upper = static_cast<std::int32_t>(uniform(rng, -200, 200));
      const auto lower = static_cast<std::int32_t>(uniform(rng, -200, upper));
      const auto a = random_input(rng, n, 8, i % 8);
      const auto b = random_input(rng, n, 8, (i / 8) % 8);
      const std::vector<isa::Instruction> code = {
          isa::Sldi{RegId{1}, kA}, isa::Sldi{RegId{2}, kB}, isa::Sldi{RegId{3}, kC},
          isa::Sldi{RegId{4}, kD}, isa::Sldi{RegId{5}, kE}, isa::Sldi{RegId{6}, kF},
          isa::Sldi{RegId{7}, kG}, isa::Sldi{RegId{8}, kH}, isa::Sldi{RegId{10}, upper},
          isa::Sldi{RegId{11}, lower}, isa::Sldi{RegId{12}, 511}, isa::Sldi{RegId{13}, -512},
          isa::Vvadd{RegId{3}, RegId{1}, RegId{2}, n, {}},
          isa::Setbw{8, 16},
          isa::Vrsu{RegId{4}, RegId{3}, RegId{10}, n, {}},
          isa::Setbw{16, 16},
          isa::Vrsl{RegId{5}, RegId{4}, RegId{11}, n, {}},
          isa::Setbw{16, 10},
          isa::Vrsu{RegId{6}, RegId{5}, RegId{12}, n, {}},
          isa::Setbw{10, 10},
          isa::Vvadd{RegId{7}, RegId{6}, RegId{6}, n, {}},
          isa::Setbw{10, 16},
          isa::Vrsl{RegId{8}, RegId{7}, RegId{13}, n, {}},
      };
      const auto bundle = single_core(code, 1024, 8, 8);
      std::vector<std::uint8_t> lmem(1024);
      put(lmem, kA, a, 8);
      put(lmem, kB, b, 8);
      const auto out = run_checked(bundle, lmem, r, "case " + std::to_string(i));
      ++r.cases;

      // Direct expectation for each stage.
      bool ok = true;
      const auto f_bytes = std::span(out).subspan(kF, 2 * n);
      const auto h = get(out, kH, n, 16);
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::int64_t c = kernels::wrap(a[k] + b[k], 8);
        const std::int64_t d = std::min<std::int64_t>(c, upper);
        const std::int64_t e = std::max<std::int64_t>(d, lower);
        const std::int64_t f = std::min<std::int64_t>(e, 511);
        const std::int64_t g = kernels::wrap(2 * f, 10);
        const std::int64_t hv = std::max<std::int64_t>(g, -512);
        const auto f_raw = static_cast<std::uint16_t>(f & 0x3FF);
        ok = ok && get(out, kC + k, 1, 8)[0] == c && get(out, kD + 2 * k, 1, 16)[0] == d &&
             get(out, kE + 2 * k, 1, 16)[0] == e && f_bytes[2 * k] == (f_raw & 0xFF) &&
             f_bytes[2 * k + 1] == (f_raw >> 8) && get(out, kG + 2 * k, 1, 10)[0] == g &&
             h[k] == hv;
      }
      if (!ok) fail_once(r, "case " + std::to_string(i) + " a=" + join(a) + " b=" + join(b));
    }
  });
}

PropertyResult saturation_wrap(std::uint64_t seed, std::size_t cases) {
  return timed("saturation/wrap edges", [&](PropertyResult& r) {
    fuzz::Rng rng(seed);
    using isa::RegId;
    std::uint64_t saturated = 0;
    std::uint64_t wrapped = 0;
    for (std::size_t i = 0; i < cases; ++i) {
      const std::string label = "case " + std::to_string(i);
      const std::size_t pattern = i % 3;  // all-max, all-min, alternating
      ++r.cases;
      if (i % 2 == 0) {
        // mvmul: maximal magnitudes, or sums landing next to +-2^(obiw-1).
        const bool boundary = (i / 2) % 4 == 3;
        const std::uint32_t obiw = boundary ? 8 : static_cast<std::uint32_t>(uniform(rng, 2, 16));
        const std::uint32_t ibiw = boundary ? 16 : static_cast<std::uint32_t>(uniform(rng, 2, 16));
        const std::uint32_t mbiw = boundary ? 2 : static_cast<std::uint32_t>(uniform(rng, 2, 16));
        const auto rows = static_cast<std::uint32_t>(uniform(rng, 1, 16));
        const auto cols = static_cast<std::uint32_t>(uniform(rng, 1, 32));
        manifest::Matrix w(rows, cols);
        std::vector<std::int64_t> x(cols);
        const auto wmax = static_cast<std::int32_t>(smax(mbiw));
        const auto wmin = static_cast<std::int32_t>(smin(mbiw));
        for (std::uint32_t c = 0; c < cols; ++c) {
          if (boundary) {
            // Row k sums to +-2^(obiw-1) + (k % 4 - 2).
            x[c] = 0;
          } else {
            x[c] = pattern == 1 ? smin(ibiw) : pattern == 2 && c % 2 ? smin(ibiw) : smax(ibiw);
          }
          for (std::uint32_t rr = 0; rr < rows; ++rr) {
            w.at(rr, c) = pattern == 0 ? wmax : pattern == 1 ? wmin : (rr + c) % 2 ? wmin : wmax;
          }
        }
        if (boundary) {
          std::fill(w.data.begin(), w.data.end(), 0);
          const std::int64_t edge = (i / 8) % 2 ? smin(obiw) : smax(obiw) + 1;
          x[0] = edge + static_cast<std::int64_t>(i % 5) - 2;
          for (std::uint32_t rr = 0; rr < rows; ++rr) w.at(rr, 0) = rr % 2 ? -1 : 1;
        }
        const std::uint32_t relu = uniform(rng, 0, 1);
        manifest::ProgramBundle bundle = single_core(
            {isa::Sldi{RegId{1}, 0}, isa::Sldi{RegId{2}, 512},
             isa::Mvmul{RegId{2}, RegId{1}, mbiw, relu, 0}},
            1024, ibiw, obiw);
        manifest::CoreConfig& core = bundle.cores[0];
        core.arrays.push_back(manifest::LogicalArray{0, w, std::nullopt});
        core.groups.push_back(manifest::ArrayGroup{0, {manifest::Tile{0, 0, 0}}, rows, cols});
        std::vector<std::uint8_t> lmem(1024);
        put(lmem, 0, x, ibiw);
        const auto out = run_checked(bundle, lmem, r, label);
        const auto y = get(out, 512, rows, obiw);
        const std::vector<std::int64_t> zero(rows, 0);
        const auto expected =
            oracle::ref_fc_layer(w, x, zero,
                                 relu ? oracle::LayerActivation::kRelu
                                      : oracle::LayerActivation::kNone,
                                 obiw);
        if (y != expected) {
          fail_once(r, label + " mvmul expected " + join(expected) + ", got " + join(y));
        }
        for (const std::int64_t v : y) saturated += v == smax(obiw) || v == smin(obiw);
      } else {
        // vvadd at ibiw = obiw = 8.
        const auto n = static_cast<std::uint32_t>(uniform(rng, 1, 64));
        std::vector<std::int64_t> a(n);
        std::vector<std::int64_t> b(n);
        for (std::uint32_t k = 0; k < n; ++k) {
          const std::int64_t hi = smax(8);
          const std::int64_t lo = smin(8);
          a[k] = pattern == 0 ? hi : pattern == 1 ? lo : k % 2 ? lo : hi;
          b[k] = pattern == 2 ? (k % 2 ? hi : lo) : (uniform(rng, 0, 3) == 0 ? uniform(rng, lo, hi) : a[k]);
        }
        const auto bundle = single_core(
            {isa::Sldi{RegId{1}, 0}, isa::Sldi{RegId{2}, 128}, isa::Sldi{RegId{3}, 256},
             isa::Vvadd{RegId{3}, RegId{1}, RegId{2}, n, {}}},
            512, 8, 8);
        std::vector<std::uint8_t> lmem(512);
        put(lmem, 0, a, 8);
        put(lmem, 128, b, 8);
        const auto out = run_checked(bundle, lmem, r, label);
        const auto y = get(out, 256, n, 8);
        oracle::RefEnv env;
        env.lmem = lmem;
        env.events.assign(manifest::kDefaultEventRegisters, 0);
        for (const auto& instr : bundle.cores[0].code) {
          if (const auto trap = oracle::ref_step(instr, env)) {
            fail_once(r, label + " oracle trapped: " + trap->detail);
          }
        }
        if (y != get(env.lmem, 256, n, 8)) {
          fail_once(r, label + " vvadd differs from the oracle: " + join(y));
        }
        for (std::uint32_t k = 0; k < n; ++k) wrapped += a[k] + b[k] != y[k];
      }
    }
    if (saturated == 0 || wrapped == 0) {
      fail_once(r, "cases did not reach the saturation and wrap edges");
    }
    if (r.passed) {
      r.detail = std::to_string(saturated) + " saturated outputs, " + std::to_string(wrapped) +
                 " wrapped sums";
    }
  });
}

std::vector<PropertyResult> run_suite(const SuiteOptions& options) {
  const Counts& c = options.counts;
  const std::uint64_t s = options.seed;
  return {
      codec_roundtrip(s, c.codec),
      assembler_roundtrip(s + 1, c.assembler),
      opcode_differential(s + 2, c.per_opcode, options.fault),
      mlp_end_to_end(s + 3, c.mlp_inputs),
      split_invariance(s + 4, c.split_draws),
      sync_semantics(c.sync_repeats),
      determinism(s + 5, c.determinism_bundles),
      variable_bitwidth(s + 6, c.bitwidth_cases),
      saturation_wrap(s + 7, c.edge_cases),
  };
}

}  // namespace pimkit::selftest
