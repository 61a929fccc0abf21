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

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace pimkit::oracle {
namespace {

using Int = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                         boost::multiprecision::et_off>;
using vm::TrapKind;

struct Fault {
  RefTrap trap;
};

[[noreturn]] void fail(TrapKind kind, std::string detail) {
  throw Fault{RefTrap{kind, std::move(detail)}};
}

Int pow2(unsigned n) { return Int(1) << n; }

Int wrap_to(const Int& v, unsigned bits) {
  const Int m = pow2(bits);
  Int r = v % m;
  if (r < 0) r += m;
  if (r >= pow2(bits - 1)) r -= m;
  return r;
}

Int saturate_to(const Int& v, unsigned bits) {
  const Int hi = pow2(bits - 1) - 1;
  const Int lo = -pow2(bits - 1);
  if (v > hi) return hi;
  if (v < lo) return lo;
  return v;
}

std::uint32_t to_u32(const Int& v) {
  Int r = v % pow2(32);
  if (r < 0) r += pow2(32);
  return r.convert_to<std::uint32_t>();
}

std::int32_t to_s32(std::uint32_t v) { return wrap_to(Int(v), 32).convert_to<std::int32_t>(); }

unsigned bytes_for(unsigned bits) { return (bits + 7) / 8; }

std::string show(const Int& v) { return v.str(); }

void need_local(const RefEnv& env, const Int& addr, const Int& len) {
  if (len == 0) return;
  if (addr + len > env.lmem.size()) {
    fail(TrapKind::kOutOfBoundsLocal, "lmem [" + show(addr) + ", +" + show(len) + ")");
  }
}

void need_global(const std::vector<std::uint8_t>& gmem, const Int& addr, const Int& len) {
  if (len == 0) return;
  if (addr + len > gmem.size()) {
    fail(TrapKind::kOutOfBoundsGlobal, "gmem [" + show(addr) + ", +" + show(len) + ")");
  }
}

// Bit-by-bit element access: bit i of the element is bit (i % 8) of byte
// (i / 8); bit (bits - 1) is the sign.
Int read_elem(const std::vector<std::uint8_t>& mem, const Int& addr, unsigned bits) {
  const auto base = addr.convert_to<std::size_t>();
  Int v = 0;
  for (unsigned i = 0; i < bits; ++i) {
    if ((mem[base + i / 8] >> (i % 8)) & 1U) boost::multiprecision::bit_set(v, i);
  }
  if (boost::multiprecision::bit_test(v, bits - 1)) v -= pow2(bits);
  return v;
}

void write_elem(std::vector<std::uint8_t>& mem, const Int& addr, const Int& value,
                unsigned bits) {
  Int u = value % pow2(bits);
  if (u < 0) u += pow2(bits);
  const auto base = addr.convert_to<std::size_t>();
  for (unsigned k = 0; k < bytes_for(bits); ++k) {
    std::uint8_t b = 0;
    for (unsigned j = 0; j < 8; ++j) {
      const unsigned i = 8 * k + j;
      if (i < bits && boost::multiprecision::bit_test(u, i)) b |= static_cast<std::uint8_t>(1U << j);
    }
    mem[base + k] = b;
  }
}

// Elements at addr, addr + stride*b, addr + 2*stride*b, ...
std::vector<Int> read_vec(const RefEnv& env, const Int& addr, std::uint64_t n, unsigned bits,
                          const Int& stride = 1) {
  std::vector<Int> out;
  const unsigned b = bytes_for(bits);
  for (std::uint64_t i = 0; i < n; ++i) need_local(env, addr + Int(i) * stride * b, b);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back(read_elem(env.lmem, addr + Int(i) * stride * b, bits));
  }
  return out;
}

void write_vec(RefEnv& env, const Int& addr, const std::vector<Int>& values, unsigned bits) {
  const unsigned b = bytes_for(bits);
  need_local(env, addr, Int(values.size()) * b);
  for (std::size_t i = 0; i < values.size(); ++i) {
    write_elem(env.lmem, addr + Int(i) * b, values[i], bits);
  }
}

Int with_offset(std::uint32_t base, const isa::Offset& off, unsigned slot, unsigned elem_bytes) {
  if (((off.select >> slot) & 1U) == 0) return Int(base);
  return Int(base) + Int(elem_bytes) * off.value;
}

Int global_base(const RefEnv& env, isa::RegId r) {
  return Int(env.regs[r.index]) + (Int(env.regs[r.index + 1]) << 32);
}

bool ranges_meet(const Int& a, const Int& alen, const Int& b, const Int& blen) {
  if (alen == 0 || blen == 0) return false;
  return a < b + blen && b < a + alen;
}

std::uint32_t default_frac(std::optional<std::uint32_t> f, std::uint32_t bits) {
  if (f) return *f;
  return bits >= 2 ? bits - 2 : 0;
}

Int activate(isa::Opcode op, const Int& x, unsigned frac_in, unsigned frac_out,
             unsigned out_bits) {
  const double v = x.convert_to<double>() / std::pow(2.0, frac_in);
  const double y = op == isa::Opcode::kVtanh ? std::tanh(v) : 1.0 / (1.0 + std::exp(-v));
  const double r = std::round(y * std::pow(2.0, frac_out));
  const double hi = std::pow(2.0, out_bits - 1) - 1;
  const double lo = -std::pow(2.0, out_bits - 1);
  if (r >= hi) return saturate_to(Int(static_cast<long long>(hi)), out_bits);
  if (r <= lo) return saturate_to(Int(static_cast<long long>(lo)), out_bits);
  return Int(static_cast<long long>(r));
}

std::vector<std::uint8_t> copy_bytes(const std::vector<std::uint8_t>& mem, const Int& addr,
                                     const Int& len) {
  const auto a = addr.convert_to<std::size_t>();
  const auto n = len.convert_to<std::size_t>();
  return std::vector<std::uint8_t>(mem.begin() + a, mem.begin() + a + n);
}

void put_bytes(std::vector<std::uint8_t>& mem, const Int& addr,
               const std::vector<std::uint8_t>& bytes) {
  const auto a = addr.convert_to<std::size_t>();
  for (std::size_t i = 0; i < bytes.size(); ++i) mem[a + i] = bytes[i];
}

void exec(const isa::Instruction& instr, RefEnv& env, std::uint32_t self) {
  using isa::Opcode;
  const Opcode op = isa::opcode_of(instr);
  auto& R = env.regs;
  const unsigned ib = env.bw.ibiw, ob = env.bw.obiw;
  const unsigned iby = bytes_for(ib), oby = bytes_for(ob);

  switch (op) {
    case Opcode::kSldi: {
      const auto& in = std::get<isa::Sldi>(instr);
      R[in.rd.index] = to_u32(Int(in.imm));
      return;
    }
    case Opcode::kSld: {
      const auto& in = std::get<isa::Sld>(instr);
      const Int addr = global_base(env, in.rs1) + in.offset_byte;
      need_global(env.gmem, addr, 4);
      Int v = 0;
      for (unsigned k = 0; k < 4; ++k) {
        v += Int(env.gmem[(addr + k).convert_to<std::size_t>()]) << (8 * k);
      }
      R[in.rd.index] = to_u32(v);
      return;
    }
    case Opcode::kSadd:
    case Opcode::kSsub:
    case Opcode::kSmul: {
      isa::RegId rd, rs1, rs2;
      std::visit(
          [&](const auto& x) {
            if constexpr (requires { x.rs2; x.rd; x.rs1; }) {
              rd = x.rd;
              rs1 = x.rs1;
              rs2 = x.rs2;
            }
          },
          instr);
      const Int a = R[rs1.index], b = R[rs2.index];
      const Int v = op == Opcode::kSadd ? a + b : (op == Opcode::kSsub ? a - b : a * b);
      R[rd.index] = to_u32(v);
      return;
    }
    case Opcode::kSaddi: {
      const auto& in = std::get<isa::Saddi>(instr);
      R[in.rd.index] = to_u32(Int(R[in.rs1.index]) + Int(in.imm));
      return;
    }
    case Opcode::kSmuli: {
      const auto& in = std::get<isa::Smuli>(instr);
      R[in.rd.index] = to_u32(Int(R[in.rs1.index]) * Int(in.imm));
      return;
    }
    case Opcode::kSetbw: {
      const auto& in = std::get<isa::Setbw>(instr);
      if (!env.variable_bw) fail(TrapKind::kInvalidInstructionForHardware, "setbw");
      env.bw = RefWidths{in.ibiw, in.obiw};
      return;
    }
    case Opcode::kMvmul: {
      const auto& in = std::get<isa::Mvmul>(instr);
      if (in.group >= env.groups.size()) fail(TrapKind::kUnknownGroup, "mvmul group");
      const manifest::Matrix& w = env.groups[in.group];
      const auto x = read_vec(env, R[in.rs1.index], w.cols, ib);
      std::vector<Int> y;
      for (std::size_t r = 0; r < w.rows; ++r) {
        Int acc = 0;
        for (std::size_t c = 0; c < w.cols; ++c) acc += Int(w.at(r, c)) * x[c];
        if (in.relu == 1 && acc < 0) acc = 0;
        y.push_back(saturate_to(acc, ob));
      }
      write_vec(env, R[in.rd.index], y, ob);
      return;
    }
    case Opcode::kVvadd:
    case Opcode::kVsub:
    case Opcode::kVmax:
    case Opcode::kVmul:
    case Opcode::kVvsll:
    case Opcode::kVvsra: {
      isa::RegId rd, rs1, rs2;
      std::uint32_t len = 0;
      isa::Offset off;
      std::visit(
          [&](const auto& x) {
            if constexpr (requires { x.offset.select; x.rs2; x.len; }) {
              rd = x.rd;
              rs1 = x.rs1;
              rs2 = x.rs2;
              len = x.len;
              off = x.offset;
            }
          },
          instr);
      const bool ibiw_out = op == Opcode::kVvadd || op == Opcode::kVsub || op == Opcode::kVmax;
      const unsigned out_bits = ibiw_out ? ib : ob;
      const auto a = read_vec(env, with_offset(R[rs1.index], off, 1, iby), len, ib);
      const auto b = read_vec(env, with_offset(R[rs2.index], off, 2, iby), len, ib);
      std::vector<Int> out;
      for (std::uint32_t i = 0; i < len; ++i) {
        if ((op == Opcode::kVvsll || op == Opcode::kVvsra) && b[i] < 0) {
          fail(TrapKind::kNegativeShift, "shift count " + show(b[i]));
        }
      }
      for (std::uint32_t i = 0; i < len; ++i) {
        Int v;
        switch (op) {
          case Opcode::kVvadd:
            v = a[i] + b[i];
            break;
          case Opcode::kVsub:
            v = a[i] - b[i];
            break;
          case Opcode::kVmax:
            v = a[i] > b[i] ? a[i] : b[i];
            break;
          case Opcode::kVmul:
            v = a[i] * b[i];
            break;
          case Opcode::kVvsll: {
            const unsigned s = b[i] > 63 ? 63U : b[i].convert_to<unsigned>();
            v = a[i] * pow2(s);
            break;
          }
          default: {
            const unsigned s = b[i] > 63 ? 63U : b[i].convert_to<unsigned>();
            // Floor division by 2^s.
            const Int d = pow2(s);
            v = a[i] >= 0 ? a[i] / d : -((-a[i] + d - 1) / d);
            break;
          }
        }
        out.push_back(wrap_to(v, out_bits));
      }
      write_vec(env, with_offset(R[rd.index], off, 0, bytes_for(out_bits)), out, out_bits);
      return;
    }
    case Opcode::kVdmul: {
      const auto& in = std::get<isa::Vdmul>(instr);
      if (in.len == 0) fail(TrapKind::kLengthMismatch, "vdmul len 0");
      const auto a = read_vec(env, with_offset(R[in.rs1.index], in.offset, 1, iby), in.len, ib);
      const auto b = read_vec(env, with_offset(R[in.rs2.index], in.offset, 2, iby), in.len, ib);
      Int acc = 0;
      for (std::uint32_t i = 0; i < in.len; ++i) acc += a[i] * b[i];
      write_vec(env, R[in.rd.index], {wrap_to(acc, ob)}, ob);
      return;
    }
    case Opcode::kVavg: {
      const auto& in = std::get<isa::Vavg>(instr);
      if (in.len == 0) fail(TrapKind::kLengthMismatch, "vavg len 0");
      const Int stride = R[in.rs2.index];
      if (stride == 0) fail(TrapKind::kLengthMismatch, "vavg stride 0");
      const Int base = Int(R[in.rs1.index]) + Int(iby) * in.offset_value;
      const auto a = read_vec(env, base, in.len, ib, stride);
      Int sum = 0;
      for (const Int& v : a) sum += v;
      // cpp_int division truncates toward zero.
      write_vec(env, R[in.rd.index], {wrap_to(sum / Int(in.len), ob)}, ob);
      return;
    }
    case Opcode::kVrelu:
    case Opcode::kVtanh:
    case Opcode::kVsigm: {
      isa::RegId rd, rs1;
      std::uint32_t len = 0;
      isa::Offset off;
      std::visit(
          [&](const auto& x) {
            if constexpr (requires { x.offset.select; x.len; x.rs1; x.rd; } &&
                          !requires { x.rs2; }) {
              rd = x.rd;
              rs1 = x.rs1;
              len = x.len;
              off = x.offset;
            }
          },
          instr);
      const unsigned out_bits = op == Opcode::kVrelu ? ib : ob;
      const auto a = read_vec(env, with_offset(R[rs1.index], off, 1, iby), len, ib);
      std::vector<Int> out;
      const unsigned fi = default_frac(env.qformat.frac_in, ib);
      const unsigned fo = default_frac(env.qformat.frac_out, ob);
      for (const Int& v : a) {
        if (op == Opcode::kVrelu) {
          out.push_back(wrap_to(v < 0 ? Int(0) : v, out_bits));
        } else {
          out.push_back(activate(op, v, fi, fo, out_bits));
        }
      }
      write_vec(env, with_offset(R[rd.index], off, 0, bytes_for(out_bits)), out, out_bits);
      return;
    }
    case Opcode::kVmv: {
      const auto& in = std::get<isa::Vmv>(instr);
      if (in.len == 0) return;
      const Int stride = R[in.rs2.index];
      const Int src = R[in.rs1.index], dst = R[in.rd.index];
      const auto vals = read_vec(env, src, in.len, ib, stride);
      need_local(env, dst, Int(in.len) * iby);
      if (env.strict_overlap) {
        for (std::uint32_t i = 0; i < in.len; ++i) {
          if (ranges_meet(src + Int(i) * stride * iby, iby, dst, Int(in.len) * iby)) {
            fail(TrapKind::kOverlapUndefined, "vmv gather overlaps destination");
          }
        }
      }
      write_vec(env, dst, vals, ib);
      return;
    }
    case Opcode::kVrsu:
    case Opcode::kVrsl: {
      isa::RegId rd, rs1, rs2;
      std::uint32_t len = 0;
      isa::Offset off;
      std::visit(
          [&](const auto& x) {
            if constexpr (requires { x.offset.select; x.rs2; x.len; }) {
              rd = x.rd;
              rs1 = x.rs1;
              rs2 = x.rs2;
              len = x.len;
              off = x.offset;
            }
          },
          instr);
      if (!env.variable_bw) fail(TrapKind::kInvalidInstructionForHardware, "resize");
      if (len == 0) return;
      const Int src = with_offset(R[rs1.index], off, 1, iby);
      const Int dst = with_offset(R[rd.index], off, 0, oby);
      const Int bound = to_s32(R[rs2.index]);
      need_local(env, src, Int(len) * iby);
      need_local(env, dst, Int(len) * oby);
      auto clamp = [&](const Int& v) {
        if (op == Opcode::kVrsu) return v > bound ? bound : v;
        return v < bound ? bound : v;
      };
      if (oby > iby && ranges_meet(src, Int(len) * iby, dst, Int(len) * oby)) {
        if (env.strict_overlap) fail(TrapKind::kOverlapUndefined, "widening resize overlaps");
        std::vector<Int> vals = read_vec(env, src, len, ib);
        for (Int& v : vals) v = wrap_to(clamp(v), ob);
        write_vec(env, dst, vals, ob);
        return;
      }
      for (std::uint32_t i = 0; i < len; ++i) {
        const Int v = read_elem(env.lmem, src + Int(i) * iby, ib);
        write_elem(env.lmem, dst + Int(i) * oby, wrap_to(clamp(v), ob), ob);
      }
      return;
    }
    case Opcode::kLd: {
      const auto& in = std::get<isa::Ld>(instr);
      const Int g = global_base(env, in.rs1) + (((in.offset.select >> 1) & 1U) ? in.offset.value : 0U);
      const Int l = with_offset(R[in.rd.index], in.offset, 0, 1);
      need_global(env.gmem, g, in.size);
      need_local(env, l, in.size);
      if (in.size > 0) put_bytes(env.lmem, l, copy_bytes(env.gmem, g, in.size));
      return;
    }
    case Opcode::kSt: {
      const auto& in = std::get<isa::St>(instr);
      const Int g = global_base(env, in.rd) + ((in.offset.select & 1U) ? in.offset.value : 0U);
      const Int l = with_offset(R[in.rs1.index], in.offset, 1, 1);
      need_local(env, l, in.size);
      need_global(env.gmem, g, in.size);
      if (in.size > 0) put_bytes(env.gmem, g, copy_bytes(env.lmem, l, in.size));
      return;
    }
    case Opcode::kLdi: {
      const auto& in = std::get<isa::Ldi>(instr);
      const Int l = Int(R[in.rd.index]) + in.offset_byte;
      need_local(env, l, in.size);
      if (in.size > 0) {
        put_bytes(env.lmem, l, std::vector<std::uint8_t>(in.size, static_cast<std::uint8_t>(in.imm)));
      }
      return;
    }
    case Opcode::kLmv: {
      const auto& in = std::get<isa::Lmv>(instr);
      const Int dst = with_offset(R[in.rd.index], in.offset, 0, 1);
      const Int src = with_offset(R[in.rs1.index], in.offset, 1, 1);
      need_local(env, src, in.size);
      need_local(env, dst, in.size);
      if (env.strict_overlap && ranges_meet(src, in.size, dst, in.size)) {
        fail(TrapKind::kOverlapUndefined, "lmv ranges overlap");
      }
      if (in.size > 0) put_bytes(env.lmem, dst, copy_bytes(env.lmem, src, in.size));
      return;
    }
    case Opcode::kSync: {
      const auto& in = std::get<isa::Sync>(instr);
      if (in.core != self) throw std::logic_error("sync to another core needs ref_sync");
      ref_sync(env, in.ev);
      return;
    }
    case Opcode::kWait:
    case Opcode::kSend:
    case Opcode::kRecv:
      throw std::logic_error("communication instructions need peers");
  }
}

}  // namespace

std::optional<RefTrap> ref_step(const isa::Instruction& instr, RefEnv& env, std::uint32_t self) {
  try {
    exec(instr, env, self);
  } catch (const Fault& f) {
    return f.trap;
  }
  ++env.pc;
  return std::nullopt;
}

std::variant<RefEnv, RefTrap> ref_exec(const isa::Instruction& instr, RefEnv env,
                                       std::uint32_t self) {
  if (auto trap = ref_step(instr, env, self)) return *trap;
  return env;
}

std::optional<RefTrap> ref_send_source_check(const RefEnv& sender, const isa::Send& send) {
  try {
    need_local(sender, Int(sender.regs[send.rs1.index]) + send.offset_byte, send.size);
  } catch (const Fault& f) {
    return f.trap;
  }
  return std::nullopt;
}

std::optional<RefTrap> ref_transfer(RefEnv& sender, const isa::Send& send, RefEnv& receiver,
                                    const isa::Recv& recv) {
  try {
    if (send.size != recv.size) {
      fail(TrapKind::kSizeMismatchSendRecv,
           std::to_string(send.size) + " vs " + std::to_string(recv.size));
    }
    const Int src = Int(sender.regs[send.rs1.index]) + send.offset_byte;
    const Int dst = Int(receiver.regs[recv.rd.index]) + recv.offset_byte;
    need_local(sender, src, send.size);
    need_local(receiver, dst, recv.size);
    if (send.size > 0) put_bytes(receiver.lmem, dst, copy_bytes(sender.lmem, src, send.size));
  } catch (const Fault& f) {
    return f.trap;
  }
  ++sender.pc;
  ++receiver.pc;
  return std::nullopt;
}

void ref_sync(RefEnv& target, std::uint32_t ev) {
  target.events.at(ev) = to_u32(Int(target.events.at(ev)) + 1);
}

bool ref_wait(RefEnv& env, const isa::Wait& wait) {
  if (env.events.at(wait.ev) != wait.val) return false;
  env.events[wait.ev] = 0;
  ++env.pc;
  return true;
}

manifest::Matrix ref_group_matrix(const manifest::CoreConfig& core, std::uint32_t group_id) {
  for (const auto& g : core.groups) {
    if (g.group_id != group_id) continue;
    manifest::Matrix m(g.total_rows, g.total_cols);
    for (const auto& t : g.tiles) {
      for (const auto& a : core.arrays) {
        if (a.array_id != t.array_id) continue;
        for (std::size_t r = 0; r < a.weights.rows; ++r) {
          for (std::size_t c = 0; c < a.weights.cols; ++c) {
            m.at(t.row_offset + r, t.col_offset + c) = a.weights.at(r, c);
          }
        }
      }
    }
    return m;
  }
  throw manifest::UnknownGroup(core.core_id, group_id);
}

std::vector<RefEnv> ref_power_up(const manifest::ProgramBundle& bundle, bool strict_overlap) {
  std::vector<RefEnv> out;
  for (const auto& core : bundle.cores) {
    RefEnv env;
    env.lmem.assign(core.local_mem_bytes, 0);
    env.events.assign(core.event_register_count, 0);
    env.bw = RefWidths{core.initial_ibiw, core.initial_obiw};
    std::uint32_t max_id = 0;
    for (const auto& g : core.groups) max_id = std::max(max_id, g.group_id + 1);
    env.groups.resize(max_id);
    for (const auto& g : core.groups) env.groups[g.group_id] = ref_group_matrix(core, g.group_id);
    env.qformat = bundle.activation_qformat;
    env.variable_bw = bundle.variable_bitwidth_supported;
    env.strict_overlap = strict_overlap;
    out.push_back(std::move(env));
  }
  return out;
}

std::vector<std::uint8_t> ref_initial_gmem(const manifest::ProgramBundle& bundle) {
  std::vector<std::uint8_t> g(bundle.global_mem_bytes, 0);
  for (const auto& init : bundle.global_mem_init) {
    for (std::size_t i = 0; i < init.bytes.size(); ++i) g[init.address + i] = init.bytes[i];
  }
  return g;
}

std::vector<std::int64_t> ref_fc_layer(const manifest::Matrix& w,
                                       std::span<const std::int64_t> x,
                                       std::span<const std::int64_t> bias,
                                       LayerActivation activation, std::uint32_t obiw,
                                       const manifest::ActivationFormat& qformat) {
  if (w.cols != x.size() || w.rows != bias.size()) {
    throw DimensionMismatch("layer is " + std::to_string(w.rows) + "x" +
                            std::to_string(w.cols) + ", input " + std::to_string(x.size()) +
                            ", bias " + std::to_string(bias.size()));
  }
  std::vector<std::int64_t> y;
  for (std::size_t r = 0; r < w.rows; ++r) {
    Int acc = 0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += Int(w.at(r, c)) * Int(x[c]);
    Int v = wrap_to(saturate_to(acc, obiw) + Int(bias[r]), obiw);
    switch (activation) {
      case LayerActivation::kNone:
        break;
      case LayerActivation::kRelu:
        if (v < 0) v = 0;
        break;
      case LayerActivation::kSigmoid:
      case LayerActivation::kTanh:
        v = activate(activation == LayerActivation::kTanh ? isa::Opcode::kVtanh
                                                          : isa::Opcode::kVsigm,
                     v, default_frac(qformat.frac_in, obiw), default_frac(qformat.frac_out, obiw),
                     obiw);
        break;
    }
    y.push_back(v.convert_to<std::int64_t>());
  }
  return y;
}

// ---------------------------------------------------------------------------
// Differential driver

std::string Divergence::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["step"] = step;
  j["core"] = core;
  j["pc"] = pc;
  j["field"] = field;
  j["expected"] = expected;
  j["actual"] = actual;
  return j.dump();
}

std::string DiffReport::summary() const {
  if (divergence) return "divergence: " + divergence->to_json();
  std::string s = "no divergence, " + std::to_string(steps) + " steps, " +
                  std::string(vm::to_string(status));
  if (trap) s += " (" + std::string(vm::to_string(trap->kind)) + ")";
  return s;
}

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

struct Mismatch {
  std::string field, expected, actual;
};

std::optional<Mismatch> compare_core(const vm::CoreState& got, const RefEnv& want) {
  if (got.pc != want.pc) return Mismatch{"pc", std::to_string(want.pc), std::to_string(got.pc)};
  for (unsigned i = 0; i < isa::kNumRegisters; ++i) {
    if (got.regs[i] != want.regs[i]) {
      return Mismatch{"regs[" + std::to_string(i) + "]", hex32(want.regs[i]), hex32(got.regs[i])};
    }
  }
  if (got.bw.ibiw != want.bw.ibiw || got.bw.obiw != want.bw.obiw) {
    return Mismatch{"bw",
                    std::to_string(want.bw.ibiw) + "," + std::to_string(want.bw.obiw),
                    std::to_string(got.bw.ibiw) + "," + std::to_string(got.bw.obiw)};
  }
  for (std::size_t i = 0; i < want.events.size(); ++i) {
    if (got.events.at(i) != want.events[i]) {
      return Mismatch{"events[" + std::to_string(i) + "]", std::to_string(want.events[i]),
                      std::to_string(got.events[i])};
    }
  }
  for (std::size_t i = 0; i < want.lmem.size(); ++i) {
    if (got.lmem.at(i) != want.lmem[i]) {
      return Mismatch{"lmem[" + std::to_string(i) + "]", std::to_string(want.lmem[i]),
                      std::to_string(got.lmem[i])};
    }
  }
  return std::nullopt;
}

std::optional<Mismatch> compare_gmem(std::span<const std::uint8_t> got,
                                     const std::vector<std::uint8_t>& want) {
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (got[i] != want[i]) {
      return Mismatch{"gmem[" + std::to_string(i) + "]", std::to_string(want[i]),
                      std::to_string(got[i])};
    }
  }
  return std::nullopt;
}

enum class Plan { kExecute, kTrapAtVisit, kDeadlock, kDone };

struct Choice {
  Plan plan = Plan::kDone;
  std::uint32_t core = 0;
  std::optional<RefTrap> trap;
};

const isa::Instruction* current(const manifest::ProgramBundle& b, const RefEnv& e,
                                std::uint32_t id) {
  const auto& code = b.cores[id].code;
  return e.pc < code.size() ? &code[e.pc] : nullptr;
}

// Round-robin choice of the next core, from the architectural rules alone.
Choice choose(const manifest::ProgramBundle& b, const std::vector<RefEnv>& refs,
              std::uint32_t last) {
  const auto n = static_cast<std::uint32_t>(refs.size());
  for (std::uint32_t k = 1; k <= n; ++k) {
    const std::uint32_t id = (last + k) % n;
    const isa::Instruction* in = current(b, refs[id], id);
    if (in == nullptr) continue;
    if (const auto* w = std::get_if<isa::Wait>(in)) {
      if (refs[id].events.at(w->ev) == w->val) return {Plan::kExecute, id, std::nullopt};
      continue;
    }
    if (const auto* s = std::get_if<isa::Send>(in)) {
      if (auto t = ref_send_source_check(refs[id], *s)) return {Plan::kTrapAtVisit, id, t};
      const isa::Instruction* peer = current(b, refs[s->core], s->core);
      const auto* r = peer ? std::get_if<isa::Recv>(peer) : nullptr;
      if (r != nullptr && r->core == id) return {Plan::kExecute, id, std::nullopt};
      continue;
    }
    if (const auto* r = std::get_if<isa::Recv>(in)) {
      const isa::Instruction* peer = current(b, refs[r->core], r->core);
      const auto* s = peer ? std::get_if<isa::Send>(peer) : nullptr;
      if (s != nullptr && s->core == id) return {Plan::kExecute, id, std::nullopt};
      continue;
    }
    return {Plan::kExecute, id, std::nullopt};
  }
  for (std::uint32_t id = 0; id < n; ++id) {
    if (current(b, refs[id], id) != nullptr) return {Plan::kDeadlock, id, std::nullopt};
  }
  return {Plan::kDone, 0, std::nullopt};
}

}  // namespace

DiffReport diff_run(const manifest::ProgramBundle& bundle, const DiffOptions& options) {
  vm::Machine m = vm::Machine::load(bundle, options.machine);
  std::vector<RefEnv> refs =
      ref_power_up(bundle, options.machine.overlap == vm::OverlapMode::kStrict);
  std::vector<std::uint8_t> gmem = options.gmem ? *options.gmem : ref_initial_gmem(bundle);
  if (gmem.size() != bundle.global_mem_bytes) {
    throw std::invalid_argument("diff_run: gmem image size differs from the bundle");
  }
  std::copy(gmem.begin(), gmem.end(), m.gmem().begin());
  for (std::size_t i = 0; i < options.init.size() && i < refs.size(); ++i) {
    const CoreInit& init = options.init[i];
    vm::CoreState& c = m.core(i);
    if (init.regs) c.regs = refs[i].regs = *init.regs;
    if (init.lmem) {
      if (init.lmem->size() != refs[i].lmem.size()) {
        throw std::invalid_argument("diff_run: lmem image size differs from the core");
      }
      c.lmem = refs[i].lmem = *init.lmem;
    }
    if (init.bw) {
      c.bw = *init.bw;
      refs[i].bw = RefWidths{init.bw->ibiw, init.bw->obiw};
    }
    if (init.events) {
      if (init.events->size() != refs[i].events.size()) {
        throw std::invalid_argument("diff_run: event count differs from the core");
      }
      c.events = refs[i].events = *init.events;
    }
  }

  std::vector<vm::TraceEvent> events;
  m.set_trace_sink([&](const vm::TraceEvent& e) { events.push_back(e); });

  DiffReport report;
  const auto n = static_cast<std::uint32_t>(refs.size());
  std::uint32_t last = n - 1;
  auto diverge = [&](std::uint64_t step, std::uint32_t core, std::uint32_t pc, Mismatch mm) {
    report.divergence = Divergence{options.seed, step, core, pc,
                                   std::move(mm.field), std::move(mm.expected),
                                   std::move(mm.actual)};
    return report;
  };
  auto trap_text = [](const std::optional<vm::Trap>& t) {
    return t ? std::string(vm::to_string(t->kind)) + "@" + std::to_string(t->core) + ":" +
                   std::to_string(t->pc)
             : std::string("none");
  };

  for (std::uint64_t step = 0;; ++step) {
    const Choice choice = choose(bundle, refs, last);
    if (choice.plan == Plan::kDone) {
      if (!m.all_finished()) return diverge(step, 0, 0, {"finished", "all", "some running"});
      report.status = vm::RunStatus::kCompleted;
      break;
    }
    if (step >= options.max_steps) {
      report.status = vm::RunStatus::kStepLimitExceeded;
      break;
    }

    const std::uint32_t id = choice.core;
    const std::uint32_t pc = refs[id].pc;
    events.clear();
    const vm::StepResult got = m.step();

    // Expected outcome of this step on the shadow state.
    std::optional<vm::Trap> want_trap;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> want_events;  // (core, pc)
    std::vector<std::uint32_t> touched;
    bool gmem_written = false;
    if (choice.plan == Plan::kDeadlock) {
      want_trap = vm::Trap{vm::TrapKind::kDeadlock, id, pc, {}};
    } else if (choice.plan == Plan::kTrapAtVisit) {
      want_trap = vm::Trap{choice.trap->kind, id, pc, choice.trap->detail};
    } else {
      const isa::Instruction& in = bundle.cores[id].code[pc];
      std::optional<RefTrap> t;
      if (const auto* w = std::get_if<isa::Wait>(&in)) {
        ref_wait(refs[id], *w);
        want_events.push_back({id, pc});
        touched.push_back(id);
      } else if (const auto* s = std::get_if<isa::Send>(&in)) {
        RefEnv& peer = refs[s->core];
        const auto& r = std::get<isa::Recv>(bundle.cores[s->core].code[peer.pc]);
        want_events = {{id, pc}, {s->core, peer.pc}};
        t = ref_transfer(refs[id], *s, peer, r);
        touched = {id, s->core};
      } else if (const auto* r = std::get_if<isa::Recv>(&in)) {
        RefEnv& peer = refs[r->core];
        const auto& s = std::get<isa::Send>(bundle.cores[r->core].code[peer.pc]);
        want_events = {{r->core, peer.pc}, {id, pc}};
        t = ref_transfer(peer, s, refs[id], *r);
        touched = {r->core, id};
      } else if (const auto* sy = std::get_if<isa::Sync>(&in); sy && sy->core != id) {
        ref_sync(refs[sy->core], sy->ev);
        ++refs[id].pc;
        want_events.push_back({id, pc});
        touched = {id, sy->core};
      } else {
        std::swap(refs[id].gmem, gmem);
        t = ref_step(in, refs[id], id);
        std::swap(refs[id].gmem, gmem);
        want_events.push_back({id, pc});
        touched.push_back(id);
        gmem_written = std::holds_alternative<isa::St>(in);
      }
      if (t) want_trap = vm::Trap{t->kind, id, pc, t->detail};
    }

    if (want_trap || got.status == vm::StepStatus::kTrapped) {
      const bool same = want_trap && got.trap && got.trap->kind == want_trap->kind &&
                        got.trap->core == want_trap->core && got.trap->pc == want_trap->pc;
      if (!same) return diverge(step, id, pc, {"trap", trap_text(want_trap), trap_text(got.trap)});
      report.status = vm::RunStatus::kTrapped;
      report.trap = got.trap;
      report.steps = step;
      return report;
    }
    if (got.status != vm::StepStatus::kProgressed) {
      return diverge(step, id, pc, {"progress", "step executed", "no progress"});
    }
    bool schedule_ok = events.size() == want_events.size();
    for (std::size_t i = 0; schedule_ok && i < events.size(); ++i) {
      schedule_ok = events[i].core == want_events[i].first &&
                    events[i].pc == want_events[i].second && events[i].step == step;
    }
    if (!schedule_ok) {
      std::string want = "c" + std::to_string(id) + ":" + std::to_string(pc);
      std::string have = events.empty() ? std::string("nothing")
                                        : "c" + std::to_string(events[0].core) + ":" +
                                              std::to_string(events[0].pc);
      return diverge(step, id, pc, {"schedule", want, have});
    }
    last = id;
    for (const std::uint32_t c : touched) {
      if (auto mm = compare_core(m.core(c), refs[c])) return diverge(step, c, pc, *mm);
    }
    if (gmem_written) {
      if (auto mm = compare_gmem(m.gmem(), gmem)) return diverge(step, id, pc, *mm);
    }
    report.steps = step + 1;
  }

  for (std::uint32_t c = 0; c < n; ++c) {
    if (auto mm = compare_core(m.core(c), refs[c])) {
      return diverge(report.steps, c, refs[c].pc, *mm);
    }
  }
  if (auto mm = compare_gmem(m.gmem(), gmem)) return diverge(report.steps, 0, 0, *mm);
  return report;
}

}  // namespace pimkit::oracle
