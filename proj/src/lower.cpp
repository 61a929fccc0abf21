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

#include "pimkit/lower.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pimkit/kernels.hpp"

namespace pimkit::lower {
namespace {

using isa::RegId;

constexpr std::uint32_t kFirstScratchReg = 1;
constexpr std::uint32_t kLastScratchReg = 27;
constexpr RegId kGlobalLow{28};  // r28/r29 hold the 64-bit global address
constexpr std::uint64_t kGlobalAlign = 8;
constexpr std::uint64_t kMinGlobalBytes = 4096;

std::uint32_t bytes_for(std::uint32_t bits) { return (bits + 7) / 8; }

std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw LoweringError(kind, message);
}

std::int64_t signed_min(std::uint32_t bits) { return -(std::int64_t{1} << (bits - 1)); }
std::int64_t signed_max(std::uint32_t bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

std::uint32_t max_field(isa::EncodingMode mode) {
  return mode == isa::EncodingMode::kWord32 ? 2047 : 65535;
}

// Emits one core's straight-line code and owns its local memory layout.
class CoreEmitter {
 public:
  CoreEmitter(std::uint32_t id, std::uint32_t local_bytes, isa::EncodingMode mode)
      : id_(id), local_bytes_(local_bytes), mode_(mode) {
    config_.core_id = id;
    config_.local_mem_bytes = local_bytes;
  }

  manifest::CoreConfig& config() { return config_; }
  std::vector<Region>& regions() { return regions_; }
  std::uint32_t id() const { return id_; }

  std::uint64_t alloc(const std::string& name, std::uint64_t bytes, std::uint32_t layer) {
    const std::uint64_t begin = align_up(next_, 4);
    if (begin + bytes > local_bytes_) {
      std::ostringstream os;
      os << "layer " << layer << " needs " << begin + bytes << " bytes of local memory on core "
         << id_ << ", which has " << local_bytes_;
      fail(ErrorKind::kLayerTooLargeForLocalMemory, os.str());
    }
    next_ = begin + bytes;
    regions_.push_back(Region{name, begin, bytes});
    return begin;
  }

  std::uint32_t add_group(const manifest::Matrix& w) {
    const auto id = static_cast<std::uint32_t>(config_.groups.size());
    manifest::LogicalArray array;
    array.array_id = static_cast<std::uint32_t>(config_.arrays.size());
    array.weights = w;
    manifest::ArrayGroup group;
    group.group_id = id;
    group.tiles.push_back(manifest::Tile{array.array_id, 0, 0});
    group.total_rows = static_cast<std::uint32_t>(w.rows);
    group.total_cols = static_cast<std::uint32_t>(w.cols);
    config_.arrays.push_back(std::move(array));
    config_.groups.push_back(std::move(group));
    return id;
  }

  // Register holding `value`, materialized on first use.
  RegId reg(std::uint64_t value) {
    if (value == 0) return RegId{0};
    ++clock_;
    std::uint32_t victim = kFirstScratchReg;
    for (std::uint32_t r = kFirstScratchReg; r <= kLastScratchReg; ++r) {
      Slot& slot = slots_[r];
      if (slot.valid && slot.value == value) {
        slot.used = clock_;
        return RegId{r};
      }
      if (slot.used < slots_[victim].used) victim = r;
    }
    const RegId r{victim};
    load_constant(r, value);
    slots_[victim] = Slot{true, value, clock_};
    return r;
  }

  RegId global(std::uint64_t address) {
    if (global_low_ != address) {
      load_constant(kGlobalLow, address);
      global_low_ = address;
    }
    return kGlobalLow;
  }

  void set_widths(std::uint32_t ibiw, std::uint32_t obiw) {
    if (ibiw == ibiw_ && obiw == obiw_) return;
    emit(isa::Setbw{ibiw, obiw});
    ibiw_ = ibiw;
    obiw_ = obiw;
  }

  void set_initial_widths(std::uint32_t ibiw, std::uint32_t obiw) {
    config_.initial_ibiw = ibiw_ = ibiw;
    config_.initial_obiw = obiw_ = obiw;
  }

  std::uint32_t take_event() { return next_event_++; }
  std::uint32_t events_used() const { return next_event_; }

  void emit(isa::Instruction instr) { config_.code.push_back(std::move(instr)); }

  // ld/st/send/recv split into chunks the encoding can express.
  template <class Make>
  void chunked(std::uint64_t bytes, Make make) {
    const std::uint32_t step = max_field(mode_);
    for (std::uint64_t done = 0; done < bytes; done += step) {
      make(done, static_cast<std::uint32_t>(std::min<std::uint64_t>(step, bytes - done)));
    }
  }

 private:
  void load_constant(RegId r, std::uint64_t value) {
    if (value > static_cast<std::uint64_t>(INT32_MAX)) {
      fail(ErrorKind::kInvalidSpec, "address " + std::to_string(value) + " exceeds 31 bits");
    }
    const auto v = static_cast<std::int32_t>(value);
    if (mode_ == isa::EncodingMode::kWord64 || v <= INT16_MAX) {
      emit(isa::Sldi{r, v});
      return;
    }
    if (value >= (std::uint64_t{1} << 29)) {
      fail(ErrorKind::kInvalidSpec,
           "address " + std::to_string(value) + " is not reachable in 32-bit mode");
    }
    emit(isa::Sldi{r, v >> 14});
    emit(isa::Smuli{r, r, 16384});
    if ((v & 16383) != 0) emit(isa::Saddi{r, r, v & 16383});
  }

  std::uint32_t id_;
  std::uint32_t local_bytes_;
  isa::EncodingMode mode_;
  manifest::CoreConfig config_;
  std::vector<Region> regions_;
  std::uint64_t next_ = 0;
  // Least recently used register is replaced first.
  struct Slot {
    bool valid = false;
    std::uint64_t value = 0;
    std::uint64_t used = 0;
  };
  std::array<Slot, kLastScratchReg + 1> slots_{};
  std::uint64_t clock_ = 0;
  std::uint64_t global_low_ = 0;
  std::uint32_t ibiw_ = manifest::kDefaultBitWidth;
  std::uint32_t obiw_ = manifest::kDefaultBitWidth;
  std::uint32_t next_event_ = 0;
};

void check_spec(const MlpSpec& spec) {
  const std::size_t n = spec.layers.size();
  if (n == 0) fail(ErrorKind::kInvalidSpec, "at least one layer is required");
  if (spec.layer_dims.size() != n + 1) {
    fail(ErrorKind::kInvalidSpec, "layer_dims must have one more entry than layers");
  }
  std::uint32_t width = 0;
  bool uniform = true;
  for (std::size_t l = 0; l < n; ++l) {
    const LayerSpec& layer = spec.layers[l];
    const std::string at = "layer " + std::to_string(l) + ": ";
    const std::uint32_t in = spec.layer_dims[l];
    const std::uint32_t out = spec.layer_dims[l + 1];
    if (in == 0 || out == 0) fail(ErrorKind::kInvalidSpec, at + "dimensions must be positive");
    if (layer.weights.rows != out || layer.weights.cols != in) {
      fail(ErrorKind::kInvalidSpec, at + "weights must be " + std::to_string(out) + "x" +
                                        std::to_string(in));
    }
    if (!layer.bias.empty() && layer.bias.size() != out) {
      fail(ErrorKind::kInvalidSpec, at + "bias must have " + std::to_string(out) + " entries");
    }
    for (const std::uint32_t bits : {layer.ibiw, layer.obiw, layer.mbiw}) {
      if (bits < 1 || bits > 32) fail(ErrorKind::kInvalidSpec, at + "bit-widths must be 1-32");
    }
    for (const std::int32_t w : layer.weights.data) {
      if (w < signed_min(layer.mbiw) || w > signed_max(layer.mbiw)) {
        fail(ErrorKind::kInvalidSpec, at + "weight " + std::to_string(w) + " exceeds " +
                                          std::to_string(layer.mbiw) + " bits");
      }
    }
    for (const std::int64_t b : layer.bias) {
      if (b < signed_min(layer.obiw) || b > signed_max(layer.obiw)) {
        fail(ErrorKind::kInvalidSpec, at + "bias " + std::to_string(b) + " exceeds " +
                                          std::to_string(layer.obiw) + " bits");
      }
    }
    if (layer.cores.empty()) fail(ErrorKind::kInvalidSpec, at + "no cores assigned");
    if (std::set<std::uint32_t>(layer.cores.begin(), layer.cores.end()).size() !=
        layer.cores.size()) {
      fail(ErrorKind::kInvalidSpec, at + "core list has duplicates");
    }
    if (layer.cores.size() > out) {
      fail(ErrorKind::kInvalidSpec, at + "more cores than output rows");
    }
    for (const std::uint32_t c : layer.cores) {
      if (c > 255) fail(ErrorKind::kInvalidSpec, at + "core ids must be below 256");
    }
    if (l > 0 && layer.ibiw != spec.layers[l - 1].obiw) {
      fail(ErrorKind::kWidthUnsupported,
           at + "ibiw " + std::to_string(layer.ibiw) + " differs from the previous obiw " +
               std::to_string(spec.layers[l - 1].obiw));
    }
    if (l == 0) width = layer.ibiw;
    uniform = uniform && layer.ibiw == width && layer.obiw == width;
  }
  if (!spec.variable_bitwidth_supported && !uniform) {
    fail(ErrorKind::kWidthUnsupported,
         "layer bit-widths vary but the hardware has no variable bit-width");
  }
  if (spec.input && spec.input->size() != spec.layer_dims.front()) {
    fail(ErrorKind::kInvalidSpec, "input must have " + std::to_string(spec.layer_dims.front()) +
                                      " entries");
  }
}

}  // namespace

LoweringError::LoweringError(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

std::vector<std::pair<std::uint32_t, std::uint32_t>> split_layer_rows(std::uint32_t rows,
                                                                      std::uint32_t parts) {
  if (parts == 0 || parts > rows) {
    fail(ErrorKind::kInvalidSpec, "cannot split " + std::to_string(rows) + " rows into " +
                                      std::to_string(parts) + " parts");
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  std::uint32_t begin = 0;
  for (std::uint32_t k = 0; k < parts; ++k) {
    const std::uint32_t count = rows / parts + (k < rows % parts ? 1 : 0);
    out.emplace_back(begin, begin + count);
    begin += count;
  }
  return out;
}

std::vector<std::uint8_t> encode_elements(std::span<const std::int64_t> values,
                                          std::uint32_t bits) {
  const std::uint32_t width = bytes_for(bits);
  const std::uint64_t mask = bits >= 64 ? ~0ULL : (1ULL << bits) - 1;
  std::vector<std::uint8_t> out(values.size() * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t u = static_cast<std::uint64_t>(values[i]) & mask;
    for (std::uint32_t b = 0; b < width; ++b) out[i * width + b] = (u >> (8 * b)) & 0xFF;
  }
  return out;
}

std::vector<std::int64_t> decode_elements(std::span<const std::uint8_t> bytes,
                                          std::size_t count, std::uint32_t bits) {
  const std::uint32_t width = bytes_for(bits);
  if (bytes.size() < count * width) throw std::out_of_range("not enough bytes to decode");
  std::vector<std::int64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (std::uint32_t b = 0; b < width; ++b) u |= std::uint64_t{bytes[i * width + b]} << (8 * b);
    out[i] = kernels::wrap(static_cast<kernels::Wide>(u), bits);
  }
  return out;
}

void set_input(manifest::ProgramBundle& bundle, const IoLayout& io,
               std::span<const std::int64_t> x) {
  if (x.size() != io.input_count) {
    throw std::invalid_argument("input must have " + std::to_string(io.input_count) +
                                " entries");
  }
  std::erase_if(bundle.global_mem_init, [&](const manifest::GlobalInit& g) {
    return g.address == io.input_address;
  });
  bundle.global_mem_init.push_back(
      manifest::GlobalInit{io.input_address, encode_elements(x, io.input_bits)});
}

std::vector<std::int64_t> read_output(std::span<const std::uint8_t> gmem, const IoLayout& io) {
  const std::size_t bytes = std::size_t{io.output_count} * bytes_for(io.output_bits);
  if (io.output_address + bytes > gmem.size()) {
    throw std::out_of_range("output lies outside global memory");
  }
  return decode_elements(gmem.subspan(io.output_address, bytes), io.output_count,
                         io.output_bits);
}

LoweredMlp lower_mlp(const MlpSpec& spec) {
  check_spec(spec);
  const std::size_t n = spec.layers.size();

  std::set<std::uint32_t> used;
  for (const LayerSpec& layer : spec.layers) used.insert(layer.cores.begin(), layer.cores.end());
  const std::uint32_t core_count = *used.rbegin() + 1;
  if (spec.mode == isa::EncodingMode::kWord32 && spec.transport == Transport::kSendRecv &&
      core_count > 32) {
    fail(ErrorKind::kInvalidSpec, "send/recv in 32-bit mode addresses at most 32 cores");
  }

  std::vector<CoreEmitter> cores;
  for (std::uint32_t c = 0; c < core_count; ++c) {
    cores.emplace_back(c, spec.local_mem_bytes, spec.mode);
  }
  const std::uint32_t first_ibiw = spec.layers.front().ibiw;
  for (CoreEmitter& core : cores) {
    if (spec.variable_bitwidth_supported) {
      core.set_initial_widths(manifest::kDefaultBitWidth, manifest::kDefaultBitWidth);
    } else {
      core.set_initial_widths(first_ibiw, first_ibiw);
    }
  }

  LoweredMlp result;
  LoweringPlan& plan = result.plan;
  IoLayout& io = result.io;
  std::vector<manifest::GlobalInit> constants;

  io.input_count = spec.layer_dims.front();
  io.input_bits = spec.layers.front().ibiw;
  io.output_count = spec.layer_dims.back();
  io.output_bits = spec.layers.back().obiw;
  std::uint64_t gnext = 0;
  auto galloc = [&](const std::string& name, std::uint64_t bytes) {
    const std::uint64_t begin = align_up(gnext, kGlobalAlign);
    gnext = begin + bytes;
    plan.global_regions.push_back(Region{name, begin, bytes});
    return begin;
  };
  io.input_address =
      galloc("input", std::uint64_t{io.input_count} * bytes_for(io.input_bits));
  io.output_address =
      galloc("output", std::uint64_t{io.output_count} * bytes_for(io.output_bits));

  auto transfer = [&](std::uint32_t from, std::uint32_t to, std::uint64_t src,
                      std::uint64_t dst, std::uint64_t bytes, const std::string& name) {
    CoreEmitter& s = cores[from];
    CoreEmitter& r = cores[to];
    if (spec.transport == Transport::kSendRecv) {
      s.chunked(bytes, [&](std::uint64_t off, std::uint32_t size) {
        s.emit(isa::Send{s.reg(src + off), to, size, 0});
      });
      r.chunked(bytes, [&](std::uint64_t off, std::uint32_t size) {
        r.emit(isa::Recv{r.reg(dst + off), from, size, 0});
      });
      return;
    }
    const std::uint64_t scratch = galloc(name, bytes);
    s.chunked(bytes, [&](std::uint64_t off, std::uint32_t size) {
      s.emit(isa::St{s.global(scratch + off), s.reg(src + off), size, {}});
    });
    const std::uint32_t ev = r.take_event();
    if (ev > 255) fail(ErrorKind::kInvalidSpec, "more than 256 transfers into one core");
    s.emit(isa::Sync{ev, to});
    r.emit(isa::Wait{ev, 1});
    r.chunked(bytes, [&](std::uint64_t off, std::uint32_t size) {
      r.emit(isa::Ld{r.reg(dst + off), r.global(scratch + off), size, {}});
    });
  };

  // Address of the previous layer's full output on its home core.
  std::uint64_t prev_out = 0;
  for (std::size_t l = 0; l < n; ++l) {
    const LayerSpec& layer = spec.layers[l];
    const std::string tag = "L" + std::to_string(l);
    const std::uint32_t in = spec.layer_dims[l];
    const std::uint32_t out = spec.layer_dims[l + 1];
    const std::uint32_t ibyw = bytes_for(layer.ibiw);
    const std::uint32_t obyw = bytes_for(layer.obiw);
    const std::uint32_t home = layer.cores.front();
    const auto rows = split_layer_rows(out, static_cast<std::uint32_t>(layer.cores.size()));
    const bool zero_bias =
        std::all_of(layer.bias.begin(), layer.bias.end(), [](std::int64_t b) { return b == 0; });
    const bool fuse_relu = layer.activation == Activation::kRelu && zero_bias;

    // Input distribution.
    std::vector<std::uint64_t> in_addr(layer.cores.size());
    const std::uint64_t in_bytes = std::uint64_t{in} * ibyw;
    for (std::size_t k = 0; k < layer.cores.size(); ++k) {
      const std::uint32_t c = layer.cores[k];
      CoreEmitter& core = cores[c];
      if (l == 0) {
        in_addr[k] = core.alloc(tag + ".in", in_bytes, l);
        core.chunked(in_bytes, [&](std::uint64_t off, std::uint32_t size) {
          core.emit(isa::Ld{core.reg(in_addr[k] + off), core.global(io.input_address + off),
                            size, {}});
        });
        continue;
      }
      const std::uint32_t src_core = spec.layers[l - 1].cores.front();
      if (c == src_core) {
        in_addr[k] = prev_out;
        continue;
      }
      in_addr[k] = core.alloc(tag + ".in", in_bytes, l);
      transfer(src_core, c, prev_out, in_addr[k], in_bytes,
               tag + ".in.c" + std::to_string(src_core) + "->c" + std::to_string(c));
    }

    // Compute.
    std::vector<std::uint64_t> part_out(layer.cores.size());
    for (std::size_t k = 0; k < layer.cores.size(); ++k) {
      const std::uint32_t c = layer.cores[k];
      CoreEmitter& core = cores[c];
      const auto [r0, r1] = rows[k];
      const std::uint32_t count = r1 - r0;
      manifest::Matrix slice(count, in);
      for (std::uint32_t r = r0; r < r1; ++r) {
        std::copy_n(layer.weights.data.begin() + std::size_t{r} * in, in,
                    slice.data.begin() + std::size_t{r - r0} * in);
      }
      const std::uint32_t group = core.add_group(slice);
      if (spec.mode == isa::EncodingMode::kWord32 && group > 511) {
        fail(ErrorKind::kInvalidSpec, "too many array groups on core " + std::to_string(c));
      }
      plan.parts.push_back(PartPlan{static_cast<std::uint32_t>(l), c, group, r0, r1, fuse_relu});

      if (k == 0) {
        part_out[k] = core.alloc(tag + ".out", std::uint64_t{out} * obyw, l);
      } else {
        part_out[k] = core.alloc(tag + ".part", std::uint64_t{count} * obyw, l);
      }
      const std::uint64_t dst = part_out[k];
      core.set_widths(layer.ibiw, layer.obiw);
      core.emit(isa::Mvmul{core.reg(dst), core.reg(in_addr[k]), layer.mbiw, fuse_relu ? 1U : 0U,
                           group});
      core.set_widths(layer.obiw, layer.obiw);

      const std::uint64_t bias_bytes = std::uint64_t{count} * obyw;
      std::uint64_t bias_addr = 0;
      const bool part_zero = layer.bias.empty() ||
                             std::all_of(layer.bias.begin() + r0, layer.bias.begin() + r1,
                                         [](std::int64_t b) { return b == 0; });
      if (part_zero) {
        bias_addr = core.alloc(tag + ".zero", bias_bytes, l);
      } else {
        bias_addr = core.alloc(tag + ".bias", bias_bytes, l);
        const std::uint64_t src = galloc(tag + ".bias.c" + std::to_string(c), bias_bytes);
        constants.push_back(manifest::GlobalInit{
            src, encode_elements(std::span(layer.bias).subspan(r0, count), layer.obiw)});
        core.chunked(bias_bytes, [&](std::uint64_t off, std::uint32_t size) {
          core.emit(isa::Ld{core.reg(bias_addr + off), core.global(src + off), size, {}});
        });
      }
      core.chunked(count, [&](std::uint64_t off, std::uint32_t len) {
        const std::uint64_t o = off * obyw;
        core.emit(isa::Vvadd{core.reg(dst + o), core.reg(dst + o), core.reg(bias_addr + o), len,
                             {}});
      });
      if (!fuse_relu && layer.activation != Activation::kNone) {
        core.chunked(count, [&](std::uint64_t off, std::uint32_t len) {
          const RegId r = core.reg(dst + off * obyw);
          switch (layer.activation) {
            case Activation::kRelu:
              core.emit(isa::Vrelu{r, r, len, {}});
              break;
            case Activation::kTanh:
              core.emit(isa::Vtanh{r, r, len, {}});
              break;
            case Activation::kSigmoid:
              core.emit(isa::Vsigm{r, r, len, {}});
              break;
            case Activation::kNone:
              break;
          }
        });
      }
    }

    // Gather.
    for (std::size_t k = 1; k < layer.cores.size(); ++k) {
      const auto [r0, r1] = rows[k];
      transfer(layer.cores[k], home, part_out[k], part_out[0] + std::uint64_t{r0} * obyw,
               std::uint64_t{r1 - r0} * obyw,
               tag + ".gather.c" + std::to_string(layer.cores[k]) + "->c" + std::to_string(home));
    }
    prev_out = part_out[0];
  }

  CoreEmitter& last = cores[spec.layers.back().cores.front()];
  const std::uint64_t out_bytes = std::uint64_t{io.output_count} * bytes_for(io.output_bits);
  last.chunked(out_bytes, [&](std::uint64_t off, std::uint32_t size) {
    last.emit(isa::St{last.global(io.output_address + off), last.reg(prev_out + off), size, {}});
  });

  manifest::ProgramBundle& bundle = result.bundle;
  bundle.mode = spec.mode;
  bundle.variable_bitwidth_supported = spec.variable_bitwidth_supported;
  bundle.activation_qformat = spec.activation_qformat;
  bundle.global_mem_bytes = std::max(kMinGlobalBytes, align_up(gnext, kMinGlobalBytes));
  bundle.global_mem_init = std::move(constants);
  for (CoreEmitter& core : cores) {
    core.config().event_register_count =
        std::max(manifest::kDefaultEventRegisters, core.events_used());
    plan.events_used.push_back(core.events_used());
    plan.local_regions.push_back(core.regions());
    bundle.cores.push_back(std::move(core.config()));
  }
  if (spec.input) set_input(bundle, io, *spec.input);
  return result;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using Json = nlohmann::json;

Activation parse_activation(const std::string& s) {
  if (s == "none" || s == "identity") return Activation::kNone;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "tanh") return Activation::kTanh;
  fail(ErrorKind::kInvalidSpec, "unknown activation '" + s + "'");
}

template <class T>
T as(const Json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    fail(ErrorKind::kInvalidSpec, what + " has the wrong type");
  }
}

const Json& array_field(const Json& root, const char* key, std::size_t expected) {
  const Json& j = root.at(key);
  if (!j.is_array() || j.size() != expected) {
    fail(ErrorKind::kInvalidSpec,
         std::string(key) + " must be an array of " + std::to_string(expected));
  }
  return j;
}

}  // namespace

MlpSpec parse_mlp_spec(std::string_view json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kInvalidSpec, std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) fail(ErrorKind::kInvalidSpec, "expected a JSON object");
  MlpSpec spec;
  if (!root.contains("layer_dims") || !root.contains("weights")) {
    fail(ErrorKind::kInvalidSpec, "layer_dims and weights are required");
  }
  spec.layer_dims = as<std::vector<std::uint32_t>>(root["layer_dims"], "layer_dims");
  if (spec.layer_dims.size() < 2) {
    fail(ErrorKind::kInvalidSpec, "layer_dims needs at least two entries");
  }
  const std::size_t n = spec.layer_dims.size() - 1;
  spec.layers.resize(n);
  const Json& weights = array_field(root, "weights", n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto rows = as<std::vector<std::vector<std::int32_t>>>(
        weights[l], "weights[" + std::to_string(l) + "]");
    manifest::Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols) {
        fail(ErrorKind::kInvalidSpec, "weights[" + std::to_string(l) + "] is ragged");
      }
      std::copy(rows[r].begin(), rows[r].end(), m.data.begin() + r * m.cols);
    }
    spec.layers[l].weights = std::move(m);
  }
  if (root.contains("biases")) {
    const Json& biases = array_field(root, "biases", n);
    for (std::size_t l = 0; l < n; ++l) {
      spec.layers[l].bias =
          as<std::vector<std::int64_t>>(biases[l], "biases[" + std::to_string(l) + "]");
    }
  }
  if (root.contains("activations")) {
    const Json& acts = array_field(root, "activations", n);
    for (std::size_t l = 0; l < n; ++l) {
      spec.layers[l].activation = parse_activation(as<std::string>(acts[l], "activations"));
    }
  }
  if (root.contains("widths")) {
    const Json& widths = array_field(root, "widths", n);
    for (std::size_t l = 0; l < n; ++l) {
      const auto w = as<std::vector<std::uint32_t>>(widths[l], "widths");
      if (w.size() != 2) fail(ErrorKind::kInvalidSpec, "widths entries are [ibiw, obiw]");
      spec.layers[l].ibiw = w[0];
      spec.layers[l].obiw = w[1];
    }
  }
  if (root.contains("weight_bits")) {
    const Json& bits = array_field(root, "weight_bits", n);
    for (std::size_t l = 0; l < n; ++l) {
      spec.layers[l].mbiw = as<std::uint32_t>(bits[l], "weight_bits");
    }
  }
  if (root.contains("core_assignment")) {
    const Json& assign = array_field(root, "core_assignment", n);
    for (std::size_t l = 0; l < n; ++l) {
      if (assign[l].is_array()) {
        spec.layers[l].cores = as<std::vector<std::uint32_t>>(assign[l], "core_assignment");
      } else {
        spec.layers[l].cores = {as<std::uint32_t>(assign[l], "core_assignment")};
      }
    }
  }
  if (root.contains("transport")) {
    const auto t = as<std::string>(root["transport"], "transport");
    if (t == "send_recv") {
      spec.transport = Transport::kSendRecv;
    } else if (t == "global_memory") {
      spec.transport = Transport::kGlobalMemory;
    } else {
      fail(ErrorKind::kInvalidSpec, "transport must be send_recv or global_memory");
    }
  }
  if (root.contains("variable_bitwidth_supported")) {
    spec.variable_bitwidth_supported =
        as<bool>(root["variable_bitwidth_supported"], "variable_bitwidth_supported");
  }
  if (root.contains("mode")) {
    const auto mode = as<std::uint32_t>(root["mode"], "mode");
    if (mode != 32 && mode != 64) fail(ErrorKind::kInvalidSpec, "mode must be 32 or 64");
    spec.mode = mode == 32 ? isa::EncodingMode::kWord32 : isa::EncodingMode::kWord64;
  }
  if (root.contains("local_mem_bytes")) {
    spec.local_mem_bytes = as<std::uint32_t>(root["local_mem_bytes"], "local_mem_bytes");
  }
  if (root.contains("activation_qformat")) {
    const Json& q = root["activation_qformat"];
    if (q.contains("frac_in")) spec.activation_qformat.frac_in = as<std::uint32_t>(q["frac_in"], "frac_in");
    if (q.contains("frac_out")) {
      spec.activation_qformat.frac_out = as<std::uint32_t>(q["frac_out"], "frac_out");
    }
  }
  if (root.contains("input")) spec.input = as<std::vector<std::int64_t>>(root["input"], "input");
  return spec;
}

MlpSpec load_mlp_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInvalidSpec, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_mlp_spec(os.str());
}

}  // namespace pimkit::lower
