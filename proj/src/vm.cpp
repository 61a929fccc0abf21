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

#include "pimkit/vm.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "pimkit/asm.hpp"
#include "pimkit/kernels.hpp"

namespace pimkit::vm {
namespace {

using kernels::Wide;

template <class T>
inline constexpr bool kIsVectorBinary = false;
template <isa::Opcode Op>
inline constexpr bool kIsVectorBinary<isa::VectorBinary<Op>> = true;
template <class T>
inline constexpr bool kIsVectorUnary = false;
template <isa::Opcode Op>
inline constexpr bool kIsVectorUnary<isa::VectorUnary<Op>> = true;
template <class T>
inline constexpr bool kIsScalarReg = false;
template <isa::Opcode Op>
inline constexpr bool kIsScalarReg<isa::ScalarReg<Op>> = true;
template <class T>
inline constexpr bool kIsScalarImm = false;
template <isa::Opcode Op>
inline constexpr bool kIsScalarImm<isa::ScalarImm<Op>> = true;

std::uint32_t elem_bytes(unsigned bits) { return (bits + 7) / 8; }

std::string range_text(std::uint64_t addr, std::uint64_t size) {
  std::ostringstream os;
  os << "[" << addr << ", +" << size << ")";
  return os.str();
}

}  // namespace

std::string_view to_string(CoreStatus s) {
  switch (s) {
    case CoreStatus::kReady:
      return "Ready";
    case CoreStatus::kBlockedSend:
      return "BlockedSend";
    case CoreStatus::kBlockedRecv:
      return "BlockedRecv";
    case CoreStatus::kBlockedWait:
      return "BlockedWait";
    case CoreStatus::kFinished:
      return "Finished";
  }
  return "?";
}

std::string_view to_string(TrapKind kind) {
  switch (kind) {
    case TrapKind::kOutOfBoundsLocal:
      return "OutOfBoundsLocal";
    case TrapKind::kOutOfBoundsGlobal:
      return "OutOfBoundsGlobal";
    case TrapKind::kUnknownGroup:
      return "UnknownGroup";
    case TrapKind::kLengthMismatch:
      return "LengthMismatch";
    case TrapKind::kOverlapUndefined:
      return "OverlapUndefined";
    case TrapKind::kNegativeShift:
      return "NegativeShift";
    case TrapKind::kInvalidInstructionForHardware:
      return "InvalidInstructionForHardware";
    case TrapKind::kSizeMismatchSendRecv:
      return "SizeMismatchSendRecv";
    case TrapKind::kDeadlock:
      return "Deadlock";
  }
  return "?";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kCompleted:
      return "Completed";
    case RunStatus::kTrapped:
      return "Trapped";
    case RunStatus::kStepLimitExceeded:
      return "StepLimitExceeded";
  }
  return "?";
}

std::string Trap::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(kind));
  j["core"] = core;
  j["pc"] = pc;
  j["detail"] = detail;
  return j.dump();
}

std::uint64_t effective_address(std::uint32_t base, const isa::Offset& offset, Slot slot,
                                std::uint32_t elem_bytes) {
  if (!offset.applies_to(static_cast<unsigned>(slot))) return base;
  return std::uint64_t{base} + std::uint64_t{elem_bytes} * offset.value;
}

std::uint64_t global_address(const CoreState& core, isa::RegId even_reg) {
  return std::uint64_t{core.regs[even_reg.index]} |
         (std::uint64_t{core.regs[even_reg.index + 1]} << 32);
}

std::int64_t load_element(std::span<const std::uint8_t> bytes, unsigned bits) {
  std::uint64_t raw = 0;
  for (std::size_t i = 0; i < elem_bytes(bits); ++i) {
    raw |= std::uint64_t{bytes[i]} << (8 * i);
  }
  return kernels::wrap(static_cast<Wide>(raw), bits);
}

void store_element(std::span<std::uint8_t> bytes, std::int64_t value, unsigned bits) {
  const std::uint64_t mask = bits >= 64 ? ~0ULL : (1ULL << bits) - 1;
  const std::uint64_t raw = static_cast<std::uint64_t>(value) & mask;
  for (std::size_t i = 0; i < elem_bytes(bits); ++i) {
    bytes[i] = static_cast<std::uint8_t>(raw >> (8 * i));
  }
}

std::string Effect::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case EffectKind::kRegister: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%08x", static_cast<unsigned>(begin));
      os << "c" << core << ".r" << index << "=" << buf;
      break;
    }
    case EffectKind::kLocal:
      os << "c" << core << ".lmem[" << begin << ".." << begin + size - 1 << "]";
      break;
    case EffectKind::kGlobal:
      os << "gmem[" << begin << ".." << begin + size - 1 << "]";
      break;
    case EffectKind::kEvent:
      os << "c" << core << ".ev" << index << "=" << begin;
      break;
    case EffectKind::kMessage:
      os << "msg c" << core << "->c" << index << " " << size << "B";
      break;
    case EffectKind::kBitWidth:
      os << "c" << core << ".bw ibiw=" << begin << " obiw=" << size;
      break;
  }
  return os.str();
}

std::string TraceEvent::to_line() const {
  std::string out = std::to_string(step) + "\t" + std::to_string(core) + "\t" +
                    std::to_string(pc) + "\t" + text + "\t";
  if (effects.empty()) return out + "-";
  for (std::size_t i = 0; i < effects.size(); ++i) {
    if (i > 0) out += "; ";
    out += effects[i].to_string();
  }
  return out;
}

std::string RunResult::stats_json() const {
  nlohmann::ordered_json j;
  j["status"] = std::string(to_string(status));
  j["steps"] = steps;
  nlohmann::ordered_json ops = nlohmann::ordered_json::object();
  for (const isa::Opcode op : isa::all_opcodes()) {
    const auto n = per_opcode[static_cast<unsigned>(op) - 1];
    if (n != 0) ops[std::string(isa::mnemonic(op))] = n;
  }
  j["per_opcode"] = ops;
  j["per_core"] = per_core;
  j["bytes_sent"] = bytes_sent;
  nlohmann::ordered_json traps = nlohmann::ordered_json::array();
  if (trap) traps.push_back(nlohmann::ordered_json::parse(trap->to_json()));
  j["traps"] = traps;
  return j.dump();
}

Machine Machine::load(const manifest::ProgramBundle& bundle, MachineOptions options) {
  if (options.defer_capability_checks && !bundle.variable_bitwidth_supported) {
    manifest::ProgramBundle relaxed = bundle;
    relaxed.variable_bitwidth_supported = true;
    manifest::validate_bundle(relaxed);
  } else {
    manifest::validate_bundle(bundle);
  }
  Machine m;
  m.options_ = options;
  m.qformat_ = bundle.activation_qformat;
  m.variable_bw_ = bundle.variable_bitwidth_supported;
  for (const manifest::CoreConfig& cfg : bundle.cores) {
    CoreState s;
    s.lmem.assign(cfg.local_mem_bytes, 0);
    s.events.assign(cfg.event_register_count, 0);
    s.bw = BitWidthState{cfg.initial_ibiw, cfg.initial_obiw};
    s.status = cfg.code.empty() ? CoreStatus::kFinished : CoreStatus::kReady;
    m.cores_.push_back(std::move(s));
    m.code_.push_back(cfg.code);
    std::vector<manifest::Matrix> groups;
    for (const auto& g : cfg.groups) {
      groups.push_back(manifest::assemble_group_matrix(cfg, g.group_id));
    }
    m.groups_.push_back(std::move(groups));
  }
  m.gmem_.assign(bundle.global_mem_bytes, 0);
  for (const auto& init : bundle.global_mem_init) {
    std::copy(init.bytes.begin(), init.bytes.end(),
              m.gmem_.begin() + static_cast<std::ptrdiff_t>(init.address));
  }
  m.per_core_.assign(m.cores_.size(), 0);
  m.last_started_ = static_cast<std::uint32_t>(m.cores_.size() - 1);
  return m;
}

const manifest::Matrix& Machine::group_matrix(std::size_t core, std::uint32_t group) const {
  return groups_.at(core).at(group);
}

std::size_t Machine::pending_messages(std::uint32_t from, std::uint32_t to) const {
  const auto it = mailboxes_.find({from, to});
  return it == mailboxes_.end() ? 0 : it->second.size();
}

bool Machine::all_finished() const {
  for (std::size_t i = 0; i < cores_.size(); ++i) {
    if (cores_[i].pc < code_[i].size()) return false;
  }
  return true;
}

std::uint64_t Machine::gmem_digest() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const std::uint8_t b : gmem_) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

RunResult Machine::snapshot(RunStatus status) const {
  RunResult r;
  r.status = status;
  r.steps = step_count_;
  r.trap = trap_;
  r.per_opcode = per_opcode_;
  r.per_core = per_core_;
  r.bytes_sent = bytes_sent_;
  return r;
}

StepResult Machine::step() {
  if (trap_) return {StepStatus::kTrapped, trap_};
  const auto n = static_cast<std::uint32_t>(cores_.size());
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t id = (last_started_ + 1 + k) % n;
    std::vector<TraceEvent> events;
    Visit v;
    try {
      v = visit(id, events);
    } catch (const TrapSignal& t) {
      trap_ = Trap{t.kind, id, cores_[id].pc, t.detail};
      return {StepStatus::kTrapped, trap_};
    }
    if (v == Visit::kExecuted) {
      last_started_ = id;
      ++step_count_;
      if (trace_sink_) {
        for (const TraceEvent& e : events) trace_sink_(e);
      }
      return {StepStatus::kProgressed, std::nullopt};
    }
  }
  for (std::uint32_t id = 0; id < n; ++id) {
    if (cores_[id].status != CoreStatus::kFinished) {
      std::ostringstream os;
      os << "no core can progress;";
      for (std::uint32_t j = 0; j < n; ++j) {
        os << " c" << j << "=" << to_string(cores_[j].status);
      }
      trap_ = Trap{TrapKind::kDeadlock, id, cores_[id].pc, os.str()};
      return {StepStatus::kTrapped, trap_};
    }
  }
  return {StepStatus::kAllBlockedOrFinished, std::nullopt};
}

RunResult Machine::run(std::uint64_t max_steps) {
  std::uint64_t taken = 0;
  while (true) {
    if (trap_) return snapshot(RunStatus::kTrapped);
    if (all_finished()) return snapshot(RunStatus::kCompleted);
    if (taken >= max_steps) return snapshot(RunStatus::kStepLimitExceeded);
    const StepResult r = step();
    if (r.status == StepStatus::kTrapped) return snapshot(RunStatus::kTrapped);
    if (r.status == StepStatus::kAllBlockedOrFinished) {
      return snapshot(RunStatus::kCompleted);
    }
    ++taken;
  }
}

TraceEvent Machine::begin_event(std::uint32_t core_id) const {
  TraceEvent e;
  e.step = step_count_;
  e.core = core_id;
  e.pc = cores_[core_id].pc;
  e.text = assembler::to_text(code_[core_id][e.pc]);
  return e;
}

void Machine::retire(std::uint32_t core_id, TraceEvent&) {
  CoreState& c = cores_[core_id];
  const isa::Opcode op = isa::opcode_of(code_[core_id][c.pc]);
  ++per_opcode_[static_cast<unsigned>(op) - 1];
  ++per_core_[core_id];
  ++c.pc;
  c.status = c.pc >= code_[core_id].size() ? CoreStatus::kFinished : CoreStatus::kReady;
}

Machine::Visit Machine::visit(std::uint32_t id, std::vector<TraceEvent>& events) {
  CoreState& c = cores_[id];
  if (c.pc >= code_[id].size()) {
    c.status = CoreStatus::kFinished;
    return Visit::kFinished;
  }
  const isa::Instruction& instr = code_[id][c.pc];

  if (const auto* w = std::get_if<isa::Wait>(&instr)) {
    if (w->ev >= c.events.size()) {
      throw TrapSignal{TrapKind::kInvalidInstructionForHardware, "no event register"};
    }
    if (c.events[w->ev] != w->val) {
      c.status = CoreStatus::kBlockedWait;
      return Visit::kBlocked;
    }
    TraceEvent e = begin_event(id);
    c.events[w->ev] = 0;
    e.effects.push_back({EffectKind::kEvent, id, w->ev, 0, 0});
    retire(id, e);
    events.push_back(std::move(e));
    return Visit::kExecuted;
  }

  if (const auto* s = std::get_if<isa::Send>(&instr)) {
    // The source range is checked on every visit, matched or not.
    const auto src = local(id, std::uint64_t{c.regs[s->rs1.index]} + s->offset_byte, s->size);
    if (at_matching_recv(s->core, id)) {
      complete_rendezvous(id, s->core, events);
      return Visit::kExecuted;
    }
    auto& box = mailboxes_[{id, s->core}];
    if (box.empty()) {
      box.push_back(Message{id, s->core, std::vector<std::uint8_t>(src.begin(), src.end())});
    }
    c.status = CoreStatus::kBlockedSend;
    return Visit::kBlocked;
  }

  if (const auto* r = std::get_if<isa::Recv>(&instr)) {
    if (at_matching_send(r->core, id)) {
      complete_rendezvous(r->core, id, events);
      return Visit::kExecuted;
    }
    c.status = CoreStatus::kBlockedRecv;
    return Visit::kBlocked;
  }

  TraceEvent e = begin_event(id);
  execute(id, instr, e);
  retire(id, e);
  events.push_back(std::move(e));
  return Visit::kExecuted;
}

bool Machine::at_matching_recv(std::uint32_t receiver, std::uint32_t sender) const {
  const CoreState& p = cores_.at(receiver);
  if (p.pc >= code_[receiver].size()) return false;
  const auto* r = std::get_if<isa::Recv>(&code_[receiver][p.pc]);
  return r != nullptr && r->core == sender;
}

bool Machine::at_matching_send(std::uint32_t sender, std::uint32_t receiver) const {
  const CoreState& p = cores_.at(sender);
  if (p.pc >= code_[sender].size()) return false;
  const auto* s = std::get_if<isa::Send>(&code_[sender][p.pc]);
  return s != nullptr && s->core == receiver;
}

void Machine::complete_rendezvous(std::uint32_t sender, std::uint32_t receiver,
                                  std::vector<TraceEvent>& events) {
  const auto& s = std::get<isa::Send>(code_[sender][cores_[sender].pc]);
  const auto& r = std::get<isa::Recv>(code_[receiver][cores_[receiver].pc]);
  if (s.size != r.size) {
    std::ostringstream os;
    os << "core " << sender << " sends " << s.size << " bytes, core " << receiver
       << " receives " << r.size;
    throw TrapSignal{TrapKind::kSizeMismatchSendRecv, os.str()};
  }
  std::vector<std::uint8_t> payload;
  auto& box = mailboxes_[{sender, receiver}];
  if (!box.empty()) {
    payload = std::move(box.front().bytes);
    box.pop_front();
  } else {
    const auto src = local(
        sender, std::uint64_t{cores_[sender].regs[s.rs1.index]} + s.offset_byte, s.size);
    payload.assign(src.begin(), src.end());
  }
  const std::uint64_t dst_addr = std::uint64_t{cores_[receiver].regs[r.rd.index]} + r.offset_byte;
  auto dst = local(receiver, dst_addr, r.size);
  std::copy(payload.begin(), payload.end(), dst.begin());

  TraceEvent es = begin_event(sender);
  es.effects.push_back({EffectKind::kMessage, sender, receiver, 0, s.size});
  TraceEvent er = begin_event(receiver);
  if (r.size > 0) er.effects.push_back({EffectKind::kLocal, receiver, 0, dst_addr, r.size});
  retire(sender, es);
  retire(receiver, er);
  bytes_sent_ += s.size;
  events.push_back(std::move(es));
  events.push_back(std::move(er));
}

std::span<std::uint8_t> Machine::local(std::uint32_t core_id, std::uint64_t addr,
                                       std::uint64_t size) {
  auto& mem = cores_[core_id].lmem;
  if (size == 0) return {};
  if (addr > mem.size() || size > mem.size() - addr) {
    throw TrapSignal{TrapKind::kOutOfBoundsLocal,
                     "lmem" + range_text(addr, size) + " outside " +
                         std::to_string(mem.size()) + " bytes"};
  }
  return std::span<std::uint8_t>(mem).subspan(addr, size);
}

std::span<std::uint8_t> Machine::global(std::uint64_t addr, std::uint64_t size) {
  if (size == 0) return {};
  if (addr > gmem_.size() || size > gmem_.size() - addr) {
    throw TrapSignal{TrapKind::kOutOfBoundsGlobal,
                     "gmem" + range_text(addr, size) + " outside " +
                         std::to_string(gmem_.size()) + " bytes"};
  }
  return std::span<std::uint8_t>(gmem_).subspan(addr, size);
}

std::vector<std::int64_t> Machine::read_vector(std::uint32_t core_id, std::uint64_t addr,
                                               std::uint64_t count, unsigned bits,
                                               std::uint64_t stride_elems) {
  std::vector<std::int64_t> out;
  if (count == 0) return out;
  const std::uint32_t b = elem_bytes(bits);
  const auto span = local(core_id, addr, ((count - 1) * stride_elems + 1) * b);
  out.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    out[i] = load_element(span.subspan(i * stride_elems * b, b), bits);
  }
  return out;
}

void Machine::write_vector(std::uint32_t core_id, std::uint64_t addr,
                           std::span<const std::int64_t> values, unsigned bits,
                           TraceEvent& ev) {
  if (values.empty()) return;
  const std::uint32_t b = elem_bytes(bits);
  const auto span = local(core_id, addr, values.size() * b);
  for (std::size_t i = 0; i < values.size(); ++i) {
    store_element(span.subspan(i * b, b), values[i], bits);
  }
  ev.effects.push_back({EffectKind::kLocal, core_id, 0, addr, values.size() * b});
}

void Machine::set_reg(std::uint32_t core_id, isa::RegId rd, std::uint32_t value,
                      TraceEvent& ev) {
  cores_[core_id].regs[rd.index] = value;
  ev.effects.push_back({EffectKind::kRegister, core_id, rd.index, value, 0});
}

void Machine::execute(std::uint32_t id, const isa::Instruction& instr, TraceEvent& ev) {
  CoreState& c = cores_[id];
  const BitWidthState bw = c.bw;
  auto reg = [&](isa::RegId r) { return c.regs[r.index]; };
  // An address past 2^64 is out of range for any non-empty access.
  auto checked_add = [](std::uint64_t a, std::uint64_t b) {
    return a > ~0ULL - b ? ~0ULL : a + b;
  };

  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        constexpr isa::Opcode kOp = T::kOpcode;

        if constexpr (std::is_same_v<T, isa::Sldi>) {
          set_reg(id, in.rd, static_cast<std::uint32_t>(in.imm), ev);
        } else if constexpr (std::is_same_v<T, isa::Sld>) {
          const auto addr = checked_add(global_address(c, in.rs1), in.offset_byte);
          const auto src = global(addr, 4);
          std::uint32_t v = 0;
          for (unsigned i = 0; i < 4; ++i) v |= std::uint32_t{src[i]} << (8 * i);
          set_reg(id, in.rd, v, ev);
        } else if constexpr (kIsScalarReg<T>) {
          const std::uint32_t a = reg(in.rs1), b = reg(in.rs2);
          std::uint32_t v = 0;
          if constexpr (kOp == isa::Opcode::kSadd) v = a + b;
          if constexpr (kOp == isa::Opcode::kSsub) v = a - b;
          if constexpr (kOp == isa::Opcode::kSmul) {
            v = static_cast<std::uint32_t>(std::uint64_t{a} * b);
          }
          set_reg(id, in.rd, v, ev);
        } else if constexpr (kIsScalarImm<T>) {
          const std::uint32_t a = reg(in.rs1);
          const auto imm = static_cast<std::uint32_t>(in.imm);
          const std::uint32_t v = kOp == isa::Opcode::kSaddi
                                      ? a + imm
                                      : static_cast<std::uint32_t>(std::uint64_t{a} * imm);
          set_reg(id, in.rd, v, ev);
        } else if constexpr (std::is_same_v<T, isa::Setbw>) {
          if (!variable_bw_) {
            throw TrapSignal{TrapKind::kInvalidInstructionForHardware,
                             "setbw requires variable bit-width hardware"};
          }
          c.bw = BitWidthState{in.ibiw, in.obiw};
          ev.effects.push_back({EffectKind::kBitWidth, id, 0, in.ibiw, in.obiw});
        } else if constexpr (std::is_same_v<T, isa::Mvmul>) {
          if (in.group >= groups_[id].size()) {
            throw TrapSignal{TrapKind::kUnknownGroup,
                             "group " + std::to_string(in.group) + " does not exist"};
          }
          const manifest::Matrix& w = groups_[id][in.group];
          const auto x = read_vector(id, reg(in.rs1), w.cols, bw.ibiw);
          std::vector<Wide> acc(w.rows);
          kernels::matvec(w, x, acc);
          std::vector<std::int64_t> y(w.rows);
          for (std::size_t r = 0; r < w.rows; ++r) {
            Wide v = acc[r];
            if (in.relu && v < 0) v = 0;
            y[r] = kernels::saturate(v, bw.obiw);
          }
          write_vector(id, reg(in.rd), y, bw.obiw, ev);
        } else if constexpr (kOp == isa::Opcode::kVdmul) {
          if (in.len == 0) throw TrapSignal{TrapKind::kLengthMismatch, "vdmul needs imm_len >= 1"};
          const auto a = read_vector(
              id, effective_address(reg(in.rs1), in.offset, Slot::kRs1, bw.ibyw()), in.len,
              bw.ibiw);
          const auto b = read_vector(
              id, effective_address(reg(in.rs2), in.offset, Slot::kRs2, bw.ibyw()), in.len,
              bw.ibiw);
          const std::int64_t out[] = {kernels::wrap(kernels::dot(a, b), bw.obiw)};
          write_vector(id, reg(in.rd), out, bw.obiw, ev);
        } else if constexpr (kOp == isa::Opcode::kVrsu || kOp == isa::Opcode::kVrsl) {
          if (!variable_bw_) {
            throw TrapSignal{TrapKind::kInvalidInstructionForHardware,
                             std::string(isa::mnemonic(kOp)) +
                                 " requires variable bit-width hardware"};
          }
          const std::uint64_t src =
              effective_address(reg(in.rs1), in.offset, Slot::kRs1, bw.ibyw());
          const std::uint64_t dst =
              effective_address(reg(in.rd), in.offset, Slot::kRd, bw.obyw());
          const auto bound = static_cast<std::int32_t>(reg(in.rs2));
          if (in.len == 0) return;
          auto src_span = local(id, src, std::uint64_t{in.len} * bw.ibyw());
          auto dst_span = local(id, dst, std::uint64_t{in.len} * bw.obyw());
          const bool overlap = src < dst + dst_span.size() && dst < src + src_span.size();
          auto clamp = [&](std::int64_t v) {
            return kOp == isa::Opcode::kVrsu ? std::min<std::int64_t>(v, bound)
                                             : std::max<std::int64_t>(v, bound);
          };
          if (overlap && bw.obyw() > bw.ibyw()) {
            if (options_.overlap == OverlapMode::kStrict) {
              throw TrapSignal{TrapKind::kOverlapUndefined,
                               "widening resize with overlapping source and destination"};
            }
            auto v = read_vector(id, src, in.len, bw.ibiw);
            for (auto& e : v) e = kernels::wrap(clamp(e), bw.obiw);
            write_vector(id, dst, v, bw.obiw, ev);
            return;
          }
          for (std::uint32_t i = 0; i < in.len; ++i) {
            const std::int64_t v =
                load_element(src_span.subspan(std::size_t{i} * bw.ibyw(), bw.ibyw()), bw.ibiw);
            store_element(dst_span.subspan(std::size_t{i} * bw.obyw(), bw.obyw()),
                          kernels::wrap(clamp(v), bw.obiw), bw.obiw);
          }
          ev.effects.push_back({EffectKind::kLocal, id, 0, dst, dst_span.size()});
        } else if constexpr (kIsVectorBinary<T>) {
          // vvadd vsub vmax: ibiw in and out. vmul vvsll vvsra: obiw out.
          constexpr bool kOutIsObiw = kOp == isa::Opcode::kVmul ||
                                      kOp == isa::Opcode::kVvsll ||
                                      kOp == isa::Opcode::kVvsra;
          const unsigned out_bits = kOutIsObiw ? bw.obiw : bw.ibiw;
          const std::uint32_t out_bytes = elem_bytes(out_bits);
          const auto a = read_vector(
              id, effective_address(reg(in.rs1), in.offset, Slot::kRs1, bw.ibyw()), in.len,
              bw.ibiw);
          const auto b = read_vector(
              id, effective_address(reg(in.rs2), in.offset, Slot::kRs2, bw.ibyw()), in.len,
              bw.ibiw);
          kernels::BinaryOp op = kernels::BinaryOp::kAdd;
          if constexpr (kOp == isa::Opcode::kVsub) op = kernels::BinaryOp::kSub;
          if constexpr (kOp == isa::Opcode::kVmul) op = kernels::BinaryOp::kMul;
          if constexpr (kOp == isa::Opcode::kVmax) op = kernels::BinaryOp::kMax;
          if constexpr (kOp == isa::Opcode::kVvsll) op = kernels::BinaryOp::kShiftLeft;
          if constexpr (kOp == isa::Opcode::kVvsra) op = kernels::BinaryOp::kShiftRight;
          if constexpr (kOp == isa::Opcode::kVvsll || kOp == isa::Opcode::kVvsra) {
            for (std::size_t i = 0; i < b.size(); ++i) {
              if (b[i] < 0) {
                throw TrapSignal{TrapKind::kNegativeShift,
                                 "shift element " + std::to_string(i) + " is " +
                                     std::to_string(b[i])};
              }
            }
          }
          std::vector<std::int64_t> out(in.len);
          kernels::binary(op, a, b, out, out_bits);
          if constexpr (kOp == isa::Opcode::kVvadd) {
            if (options_.fault == FaultInjection::kVvaddOffByOne && !out.empty()) {
              out[0] = kernels::wrap(Wide{out[0]} + 1, out_bits);
            }
          }
          write_vector(id, effective_address(reg(in.rd), in.offset, Slot::kRd, out_bytes), out,
                       out_bits, ev);
        } else if constexpr (std::is_same_v<T, isa::Vavg>) {
          if (in.len == 0) throw TrapSignal{TrapKind::kLengthMismatch, "vavg needs imm_len >= 1"};
          const std::uint32_t stride = reg(in.rs2);
          if (stride == 0) throw TrapSignal{TrapKind::kLengthMismatch, "vavg needs stride >= 1"};
          const std::uint64_t base =
              std::uint64_t{reg(in.rs1)} + std::uint64_t{bw.ibyw()} * in.offset_value;
          const auto a = read_vector(id, base, in.len, bw.ibiw, stride);
          Wide sum = 0;
          for (const std::int64_t v : a) sum += v;
          const std::int64_t out[] = {kernels::wrap(sum / Wide{in.len}, bw.obiw)};
          write_vector(id, reg(in.rd), out, bw.obiw, ev);
        } else if constexpr (kIsVectorUnary<T>) {
          // vrelu keeps ibiw for its output; vtanh/vsigm write obiw.
          constexpr bool kRelu = kOp == isa::Opcode::kVrelu;
          const unsigned out_bits = kRelu ? bw.ibiw : bw.obiw;
          const auto a = read_vector(
              id, effective_address(reg(in.rs1), in.offset, Slot::kRs1, bw.ibyw()), in.len,
              bw.ibiw);
          kernels::ActivationParams p;
          p.frac_in = qformat_.input_frac(bw.ibiw);
          p.frac_out = qformat_.output_frac(bw.obiw);
          p.out_bits = out_bits;
          const auto f = kRelu ? kernels::Activation::kRelu
                               : (kOp == isa::Opcode::kVtanh ? kernels::Activation::kTanh
                                                             : kernels::Activation::kSigmoid);
          std::vector<std::int64_t> out(in.len);
          kernels::activation(f, a, out, p);
          write_vector(id,
                       effective_address(reg(in.rd), in.offset, Slot::kRd, elem_bytes(out_bits)),
                       out, out_bits, ev);
        } else if constexpr (std::is_same_v<T, isa::Vmv>) {
          if (in.len == 0) return;
          const std::uint32_t stride = reg(in.rs2);
          const std::uint32_t b = bw.ibyw();
          const std::uint64_t src = reg(in.rs1), dst = reg(in.rd);
          const auto values = read_vector(id, src, in.len, bw.ibiw, stride);
          local(id, dst, std::uint64_t{in.len} * b);
          if (options_.overlap == OverlapMode::kStrict) {
            const std::uint64_t dst_end = dst + std::uint64_t{in.len} * b;
            for (std::uint64_t i = 0; i < in.len; ++i) {
              const std::uint64_t cell = src + i * stride * b;
              if (cell < dst_end && dst < cell + b) {
                throw TrapSignal{TrapKind::kOverlapUndefined,
                                 "vmv source element " + std::to_string(i) +
                                     " overlaps the destination"};
              }
            }
          }
          write_vector(id, dst, values, bw.ibiw, ev);
        } else if constexpr (std::is_same_v<T, isa::Ld>) {
          const std::uint64_t dst = effective_address(reg(in.rd), in.offset, Slot::kRd, 1);
          const std::uint64_t gsrc = checked_add(
              global_address(c, in.rs1), in.offset.applies_to(1) ? in.offset.value : 0);
          const auto from = global(gsrc, in.size);
          const auto to = local(id, dst, in.size);
          std::copy(from.begin(), from.end(), to.begin());
          if (in.size > 0) ev.effects.push_back({EffectKind::kLocal, id, 0, dst, in.size});
        } else if constexpr (std::is_same_v<T, isa::St>) {
          const std::uint64_t gdst = checked_add(
              global_address(c, in.rd), in.offset.applies_to(0) ? in.offset.value : 0);
          const std::uint64_t src = effective_address(reg(in.rs1), in.offset, Slot::kRs1, 1);
          const auto from = local(id, src, in.size);
          const auto to = global(gdst, in.size);
          std::copy(from.begin(), from.end(), to.begin());
          if (in.size > 0) ev.effects.push_back({EffectKind::kGlobal, id, 0, gdst, in.size});
        } else if constexpr (std::is_same_v<T, isa::Ldi>) {
          const std::uint64_t dst = std::uint64_t{reg(in.rd)} + in.offset_byte;
          const auto to = local(id, dst, in.size);
          std::fill(to.begin(), to.end(), static_cast<std::uint8_t>(in.imm));
          if (in.size > 0) ev.effects.push_back({EffectKind::kLocal, id, 0, dst, in.size});
        } else if constexpr (std::is_same_v<T, isa::Lmv>) {
          const std::uint64_t dst = effective_address(reg(in.rd), in.offset, Slot::kRd, 1);
          const std::uint64_t src = effective_address(reg(in.rs1), in.offset, Slot::kRs1, 1);
          const auto from = local(id, src, in.size);
          const auto to = local(id, dst, in.size);
          if (in.size > 0 && src < dst + in.size && dst < src + in.size) {
            if (options_.overlap == OverlapMode::kStrict) {
              throw TrapSignal{TrapKind::kOverlapUndefined,
                               "lmv source " + range_text(src, in.size) +
                                   " overlaps destination " + range_text(dst, in.size)};
            }
            std::memmove(to.data(), from.data(), in.size);
          } else {
            std::copy(from.begin(), from.end(), to.begin());
          }
          if (in.size > 0) ev.effects.push_back({EffectKind::kLocal, id, 0, dst, in.size});
        } else if constexpr (std::is_same_v<T, isa::Sync>) {
          CoreState& target = cores_.at(in.core);
          if (in.ev >= target.events.size()) {
            throw TrapSignal{TrapKind::kInvalidInstructionForHardware, "no event register"};
          }
          const std::uint32_t v = ++target.events[in.ev];
          ev.effects.push_back({EffectKind::kEvent, in.core, in.ev, v, 0});
        } else if constexpr (std::is_same_v<T, isa::Wait> || std::is_same_v<T, isa::Send> ||
                             std::is_same_v<T, isa::Recv>) {
          // Scheduled in visit().
        } else {
          static_assert(sizeof(T) == 0, "unhandled instruction");
        }
      },
      instr);
}

}  // namespace pimkit::vm
