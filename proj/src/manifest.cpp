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

#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <variant>

#include "json.hpp"
#include "pimkit/asm.hpp"

namespace pimkit::manifest {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string index_path(const std::string& base, const char* key, std::size_t i) {
  return base + (base.empty() ? "" : ".") + key + "[" + std::to_string(i) + "]";
}

std::string field_path(const std::string& base, const char* key) {
  return base + (base.empty() ? "" : ".") + key;
}

// Collects issues while walking the JSON tree; never throws on bad input.
class Reader {
 public:
  explicit Reader(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  std::vector<BundleIssue>& issues() { return issues_; }

  void issue(std::string path, std::string message) {
    issues_.push_back({std::move(path), std::move(message)});
  }

  template <class T>
  T get_uint(const Json& obj, const char* key, const std::string& path, T fallback,
             bool required = false) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) issue(field_path(path, key), "missing required field");
      return fallback;
    }
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
      issue(field_path(path, key), "expected a non-negative integer");
      return fallback;
    }
    const auto v = it->get<std::uint64_t>();
    if (v > std::numeric_limits<T>::max()) {
      issue(field_path(path, key), "value too large");
      return fallback;
    }
    return static_cast<T>(v);
  }

  ProgramBundle read_bundle(const Json& root) {
    ProgramBundle b;
    if (!root.is_object()) {
      issue("", "bundle must be a JSON object");
      return b;
    }
    if (auto it = root.find("format"); it != root.end() && *it != "pimbundle") {
      issue("format", "expected \"pimbundle\"");
    }
    if (auto it = root.find("version"); it != root.end() && *it != 1) {
      issue("version", "unsupported version");
    }
    const auto mode = get_uint<std::uint32_t>(root, "mode", "", 64);
    if (mode == 64) {
      b.mode = isa::EncodingMode::kWord64;
    } else if (mode == 32) {
      b.mode = isa::EncodingMode::kWord32;
    } else {
      issue("mode", "mode must be 32 or 64");
    }
    b.global_mem_bytes =
        get_uint<std::uint64_t>(root, "global_mem_bytes", "", kDefaultGlobalMemBytes);
    if (auto it = root.find("variable_bitwidth_supported"); it != root.end()) {
      if (it->is_boolean()) {
        b.variable_bitwidth_supported = it->get<bool>();
      } else {
        issue("variable_bitwidth_supported", "expected a boolean");
      }
    }
    if (auto it = root.find("activation_qformat"); it != root.end()) {
      if (!it->is_object()) {
        issue("activation_qformat", "expected an object");
      } else {
        if (it->contains("frac_in")) {
          b.activation_qformat.frac_in =
              get_uint<std::uint32_t>(*it, "frac_in", "activation_qformat", 0);
        }
        if (it->contains("frac_out")) {
          b.activation_qformat.frac_out =
              get_uint<std::uint32_t>(*it, "frac_out", "activation_qformat", 0);
        }
      }
    }
    if (auto it = root.find("global_mem_init"); it != root.end()) {
      if (!it->is_array()) {
        issue("global_mem_init", "expected an array");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          b.global_mem_init.push_back(
              read_init((*it)[i], index_path("", "global_mem_init", i)));
        }
      }
    }
    const auto cores = root.find("cores");
    if (cores == root.end() || !cores->is_array()) {
      issue("cores", "expected an array of cores");
    } else {
      for (std::size_t i = 0; i < cores->size(); ++i) {
        b.cores.push_back(read_core((*cores)[i], index_path("", "cores", i)));
      }
    }
    return b;
  }

 private:
  GlobalInit read_init(const Json& j, const std::string& path) {
    GlobalInit init;
    if (!j.is_object()) {
      issue(path, "expected an object");
      return init;
    }
    init.address = get_uint<std::uint64_t>(j, "address", path, 0, true);
    if (auto it = j.find("bytes"); it != j.end()) {
      if (!it->is_array()) {
        issue(field_path(path, "bytes"), "expected an array of bytes");
        return init;
      }
      for (std::size_t k = 0; k < it->size(); ++k) {
        const Json& v = (*it)[k];
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
            v.get<std::int64_t>() > 255) {
          issue(index_path(path, "bytes", k), "expected a byte value");
          continue;
        }
        init.bytes.push_back(static_cast<std::uint8_t>(v.get<int>()));
      }
    } else if (auto hex = j.find("hex"); hex != j.end()) {
      if (!hex->is_string() || hex->get<std::string>().size() % 2 != 0) {
        issue(field_path(path, "hex"), "expected an even-length hex string");
        return init;
      }
      const std::string s = hex->get<std::string>();
      for (std::size_t k = 0; k < s.size(); k += 2) {
        unsigned v = 0;
        std::istringstream is(s.substr(k, 2));
        if (!(is >> std::hex >> v) || !is.eof()) {
          issue(field_path(path, "hex"), "invalid hex digit");
          return init;
        }
        init.bytes.push_back(static_cast<std::uint8_t>(v));
      }
    } else {
      issue(path, "needs \"bytes\" or \"hex\"");
    }
    return init;
  }

  CoreConfig read_core(const Json& j, const std::string& path) {
    CoreConfig c;
    if (!j.is_object()) {
      issue(path, "expected an object");
      return c;
    }
    c.core_id = get_uint<std::uint32_t>(j, "core_id", path, 0, true);
    c.local_mem_bytes =
        get_uint<std::uint32_t>(j, "local_mem_bytes", path, kDefaultLocalMemBytes);
    c.event_register_count = get_uint<std::uint32_t>(j, "event_register_count", path,
                                                     kDefaultEventRegisters);
    c.initial_ibiw = get_uint<std::uint32_t>(j, "initial_ibiw", path, kDefaultBitWidth);
    c.initial_obiw = get_uint<std::uint32_t>(j, "initial_obiw", path, kDefaultBitWidth);
    read_code(j, path, c);
    if (auto it = j.find("arrays"); it != j.end()) {
      if (!it->is_array()) {
        issue(field_path(path, "arrays"), "expected an array");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          c.arrays.push_back(read_array((*it)[i], index_path(path, "arrays", i)));
        }
      }
    }
    if (auto it = j.find("groups"); it != j.end()) {
      if (!it->is_array()) {
        issue(field_path(path, "groups"), "expected an array");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          c.groups.push_back(read_group((*it)[i], index_path(path, "groups", i)));
        }
      }
    }
    return c;
  }

  void read_code(const Json& j, const std::string& path, CoreConfig& c) {
    const auto it = j.find("code");
    if (it == j.end()) return;
    const std::string code_path = field_path(path, "code");
    if (it->is_string()) {
      const auto result = assembler::assemble(it->get<std::string>());
      if (!result.ok()) {
        for (const auto& d : result.diagnostics()) {
          issue(code_path, assembler::format(d));
        }
        return;
      }
      for (const auto& section : result.program().sections) {
        c.code.insert(c.code.end(), section.instructions.begin(),
                      section.instructions.end());
      }
      return;
    }
    if (!it->is_array()) {
      issue(code_path, "expected an array of instruction strings");
      return;
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& line = (*it)[i];
      const std::string p = index_path(path, "code", i);
      if (!line.is_string()) {
        issue(p, "expected an instruction string");
        continue;
      }
      try {
        c.code.push_back(assembler::parse_instruction(line.get<std::string>()));
      } catch (const std::exception& e) {
        issue(p, e.what());
      }
    }
  }

  LogicalArray read_array(const Json& j, const std::string& path) {
    LogicalArray a;
    if (!j.is_object()) {
      issue(path, "expected an object");
      return a;
    }
    a.array_id = get_uint<std::uint32_t>(j, "array_id", path, 0, true);
    if (auto wf = j.find("weights_file"); wf != j.end()) {
      read_weight_file(j, *wf, path, a);
      return a;
    }
    const auto w = j.find("weights");
    if (w == j.end() || !w->is_array() || w->empty()) {
      issue(field_path(path, "weights"), "expected a non-empty matrix");
      return a;
    }
    const std::size_t rows = w->size();
    const std::size_t cols = (*w)[0].is_array() ? (*w)[0].size() : 0;
    if (cols == 0) {
      issue(field_path(path, "weights"), "rows must be non-empty arrays");
      return a;
    }
    a.weights = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const Json& row = (*w)[r];
      const std::string rp = index_path(path, "weights", r);
      if (!row.is_array() || row.size() != cols) {
        issue(rp, "ragged weight matrix");
        continue;
      }
      for (std::size_t col = 0; col < cols; ++col) {
        const Json& v = row[col];
        if (!v.is_number_integer() ||
            v.get<std::int64_t>() < std::numeric_limits<std::int32_t>::min() ||
            v.get<std::int64_t>() > std::numeric_limits<std::int32_t>::max()) {
          issue(rp + "[" + std::to_string(col) + "]", "expected a 32-bit integer");
          continue;
        }
        a.weights.at(r, col) = static_cast<std::int32_t>(v.get<std::int64_t>());
      }
    }
    if (auto it = j.find("rows"); it != j.end() && *it != rows) {
      issue(field_path(path, "rows"), "does not match weights");
    }
    if (auto it = j.find("cols"); it != j.end() && *it != cols) {
      issue(field_path(path, "cols"), "does not match weights");
    }
    return a;
  }

  void read_weight_file(const Json& j, const Json& wf, const std::string& path,
                        LogicalArray& a) {
    const std::string fp = field_path(path, "weights_file");
    if (!wf.is_string()) {
      issue(fp, "expected a relative path");
      return;
    }
    const auto rows = get_uint<std::uint32_t>(j, "rows", path, 0, true);
    const auto cols = get_uint<std::uint32_t>(j, "cols", path, 0, true);
    if (rows == 0 || cols == 0) {
      issue(path, "weights_file needs positive rows and cols");
      return;
    }
    a.weights_file = wf.get<std::string>();
    std::ifstream in(base_dir_ / *a.weights_file, std::ios::binary);
    if (!in) {
      issue(fp, "cannot open " + *a.weights_file);
      return;
    }
    const std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
    if (raw.size() != std::size_t{rows} * cols * 4) {
      issue(fp, "file size does not match rows*cols int32 values");
      return;
    }
    a.weights = Matrix(rows, cols);
    for (std::size_t k = 0; k < a.weights.data.size(); ++k) {
      std::uint32_t v = 0;
      for (unsigned b = 0; b < 4; ++b) {
        v |= std::uint32_t{static_cast<std::uint8_t>(raw[4 * k + b])} << (8 * b);
      }
      a.weights.data[k] = static_cast<std::int32_t>(v);
    }
  }

  ArrayGroup read_group(const Json& j, const std::string& path) {
    ArrayGroup g;
    if (!j.is_object()) {
      issue(path, "expected an object");
      return g;
    }
    g.group_id = get_uint<std::uint32_t>(j, "group_id", path, 0, true);
    g.total_rows = get_uint<std::uint32_t>(j, "total_rows", path, 0, true);
    g.total_cols = get_uint<std::uint32_t>(j, "total_cols", path, 0, true);
    const auto tiles = j.find("tiles");
    if (tiles == j.end() || !tiles->is_array()) {
      issue(field_path(path, "tiles"), "expected an array");
      return g;
    }
    for (std::size_t i = 0; i < tiles->size(); ++i) {
      const Json& t = (*tiles)[i];
      const std::string tp = index_path(path, "tiles", i);
      if (!t.is_object()) {
        issue(tp, "expected an object");
        continue;
      }
      g.tiles.push_back(Tile{get_uint<std::uint32_t>(t, "array_id", tp, 0, true),
                             get_uint<std::uint32_t>(t, "row_offset", tp, 0),
                             get_uint<std::uint32_t>(t, "col_offset", tp, 0)});
    }
    return g;
  }

  std::filesystem::path base_dir_;
  std::vector<BundleIssue> issues_;
};

std::int64_t signed_min(std::uint32_t bits) { return -(std::int64_t{1} << (bits - 1)); }
std::int64_t signed_max(std::uint32_t bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

bool bitwidth_ok(std::uint32_t w) { return w >= 1 && w <= 32; }

void check_group(const CoreConfig& core, const ArrayGroup& g, const std::string& path,
                 std::vector<BundleIssue>& out) {
  if (g.total_rows == 0 || g.total_cols == 0) {
    out.push_back({path, "group dimensions must be positive"});
    return;
  }
  const std::uint64_t cells = std::uint64_t{g.total_rows} * g.total_cols;
  if (cells > (std::uint64_t{1} << 26)) {
    out.push_back({path, "group too large"});
    return;
  }
  std::vector<std::uint8_t> covered(cells, 0);
  bool ok = true;
  for (std::size_t i = 0; i < g.tiles.size() && ok; ++i) {
    const Tile& t = g.tiles[i];
    const std::string tp = index_path(path, "tiles", i);
    if (t.array_id >= core.arrays.size()) {
      out.push_back({tp, "unknown array " + std::to_string(t.array_id)});
      ok = false;
      break;
    }
    const Matrix& w = core.arrays[t.array_id].weights;
    if (std::uint64_t{t.row_offset} + w.rows > g.total_rows ||
        std::uint64_t{t.col_offset} + w.cols > g.total_cols) {
      out.push_back({tp, "tile extends past the group bounds"});
      ok = false;
      break;
    }
    for (std::size_t r = 0; r < w.rows && ok; ++r) {
      for (std::size_t c = 0; c < w.cols; ++c) {
        auto& cell = covered[(t.row_offset + r) * g.total_cols + t.col_offset + c];
        if (cell) {
          std::ostringstream os;
          os << "tiles overlap at (" << t.row_offset + r << "," << t.col_offset + c << ")";
          out.push_back({tp, os.str()});
          ok = false;
          break;
        }
        cell = 1;
      }
    }
  }
  if (!ok) return;
  for (std::uint64_t k = 0; k < cells; ++k) {
    if (!covered[k]) {
      std::ostringstream os;
      os << "tiles leave (" << k / g.total_cols << "," << k % g.total_cols
         << ") uncovered";
      out.push_back({path, os.str()});
      return;
    }
  }
}

void check_code(const ProgramBundle& b, const CoreConfig& core, const std::string& path,
                std::vector<BundleIssue>& out) {
  for (std::size_t k = 0; k < core.code.size(); ++k) {
    const isa::Instruction& instr = core.code[k];
    const std::string p = index_path(path, "code", k);
    const auto op = isa::opcode_of(instr);
    const std::string name(isa::mnemonic(op));
    isa::ValidationLimits limits;
    if (op == isa::Opcode::kWait) limits.event_registers = core.event_register_count;
    if (const auto* s = std::get_if<isa::Sync>(&instr); s && s->core < b.cores.size()) {
      limits.event_registers = b.cores[s->core].event_register_count;
    }
    const auto violations = isa::validate(instr, limits);
    for (const auto& v : violations) out.push_back({p, v.message()});
    if (!violations.empty()) continue;
    try {
      isa::encode(instr, b.mode);
    } catch (const isa::IsaError& e) {
      out.push_back({p, e.what()});
    }
    if (!b.variable_bitwidth_supported &&
        (op == isa::Opcode::kSetbw || op == isa::Opcode::kVrsu ||
         op == isa::Opcode::kVrsl)) {
      out.push_back({p, name + " is invalid on hardware without variable bit-width"});
    }
    if (const auto* m = std::get_if<isa::Mvmul>(&instr)) {
      if (m->group >= core.groups.size()) {
        out.push_back({p, "mvmul references unknown group " + std::to_string(m->group)});
        continue;
      }
      for (const Tile& t : core.groups[m->group].tiles) {
        if (t.array_id >= core.arrays.size()) continue;
        for (const std::int32_t w : core.arrays[t.array_id].weights.data) {
          if (w < signed_min(m->mbiw) || w > signed_max(m->mbiw)) {
            out.push_back({p, "weight " + std::to_string(w) + " in array " +
                                  std::to_string(t.array_id) + " exceeds mbiw=" +
                                  std::to_string(m->mbiw)});
            break;
          }
        }
      }
    }
    std::optional<std::uint32_t> peer;
    if (const auto* s = std::get_if<isa::Send>(&instr)) peer = s->core;
    if (const auto* r = std::get_if<isa::Recv>(&instr)) peer = r->core;
    if (peer) {
      if (*peer >= b.cores.size()) {
        out.push_back({p, name + " names unknown core " + std::to_string(*peer)});
      } else if (*peer == core.core_id) {
        out.push_back({p, name + " cannot target its own core"});
      }
    }
    if (const auto* s = std::get_if<isa::Sync>(&instr); s && s->core >= b.cores.size()) {
      out.push_back({p, "sync names unknown core " + std::to_string(s->core)});
    }
  }
}

OrderedJson instruction_lines(const std::vector<isa::Instruction>& code) {
  OrderedJson lines = OrderedJson::array();
  for (const auto& instr : code) lines.push_back(assembler::to_text(instr));
  return lines;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (const std::uint8_t v : bytes) {
    s += kDigits[v >> 4];
    s += kDigits[v & 15];
  }
  return s;
}

}  // namespace

BundleError::BundleError(std::vector<BundleIssue> issues)
    : std::runtime_error([&] {
        std::string msg = "invalid bundle:";
        for (const auto& i : issues) {
          msg += "\n  " + (i.path.empty() ? std::string("<root>") : i.path) + ": " +
                 i.message;
        }
        return msg;
      }()),
      issues_(std::move(issues)) {}

UnknownGroup::UnknownGroup(std::uint32_t core, std::uint32_t group)
    : std::out_of_range("UnknownGroup: core " + std::to_string(core) + " has no group " +
                        std::to_string(group)) {}

std::vector<BundleIssue> check_bundle(const ProgramBundle& b) {
  std::vector<BundleIssue> out;
  if (b.cores.empty()) out.push_back({"cores", "bundle needs at least one core"});
  for (std::size_t i = 0; i < b.global_mem_init.size(); ++i) {
    const GlobalInit& init = b.global_mem_init[i];
    if (init.address > b.global_mem_bytes ||
        init.bytes.size() > b.global_mem_bytes - init.address) {
      out.push_back({index_path("", "global_mem_init", i), "extends past global memory"});
    }
  }
  if (b.activation_qformat.frac_in.value_or(0) > 62 ||
      b.activation_qformat.frac_out.value_or(0) > 62) {
    out.push_back({"activation_qformat", "fractional bits must be at most 62"});
  }
  for (std::size_t ci = 0; ci < b.cores.size(); ++ci) {
    const CoreConfig& core = b.cores[ci];
    const std::string path = index_path("", "cores", ci);
    if (core.core_id != ci) {
      out.push_back({field_path(path, "core_id"),
                     "core ids must be dense from 0 in order (expected " +
                         std::to_string(ci) + ")"});
    }
    if (core.local_mem_bytes == 0) {
      out.push_back({field_path(path, "local_mem_bytes"), "must be positive"});
    }
    if (!bitwidth_ok(core.initial_ibiw) || !bitwidth_ok(core.initial_obiw)) {
      out.push_back({path, "initial bit-widths must be in [1, 32]"});
    }
    for (std::size_t ai = 0; ai < core.arrays.size(); ++ai) {
      const LogicalArray& a = core.arrays[ai];
      const std::string ap = index_path(path, "arrays", ai);
      if (a.array_id != ai) {
        out.push_back({field_path(ap, "array_id"), "array ids must be dense from 0"});
      }
      if (a.weights.rows == 0 || a.weights.cols == 0 ||
          a.weights.data.size() != a.weights.rows * a.weights.cols) {
        out.push_back({ap, "array needs rows >= 1 and cols >= 1"});
      }
    }
    for (std::size_t gi = 0; gi < core.groups.size(); ++gi) {
      const ArrayGroup& g = core.groups[gi];
      const std::string gp = index_path(path, "groups", gi);
      if (g.group_id != gi) {
        out.push_back({field_path(gp, "group_id"), "group ids must be dense from 0"});
      }
      check_group(core, g, gp, out);
    }
    check_code(b, core, path, out);
  }
  return out;
}

void validate_bundle(const ProgramBundle& bundle) {
  if (auto issues = check_bundle(bundle); !issues.empty()) {
    throw BundleError(std::move(issues));
  }
}

ProgramBundle parse_bundle(std::string_view json_text,
                           const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw BundleError({{"", std::string("malformed JSON: ") + e.what()}});
  }
  Reader reader(base_dir);
  ProgramBundle bundle = reader.read_bundle(root);
  if (!reader.issues().empty()) throw BundleError(std::move(reader.issues()));
  validate_bundle(bundle);
  return bundle;
}

ProgramBundle load_bundle_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError({{"", "cannot open " + path.string()}});
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_bundle(text, path.parent_path());
}

std::string serialize_bundle(const ProgramBundle& b) {
  OrderedJson root;
  root["format"] = "pimbundle";
  root["version"] = 1;
  root["mode"] = b.mode == isa::EncodingMode::kWord64 ? 64 : 32;
  root["global_mem_bytes"] = b.global_mem_bytes;
  root["variable_bitwidth_supported"] = b.variable_bitwidth_supported;
  if (b.activation_qformat.frac_in || b.activation_qformat.frac_out) {
    OrderedJson q = OrderedJson::object();
    if (b.activation_qformat.frac_in) q["frac_in"] = *b.activation_qformat.frac_in;
    if (b.activation_qformat.frac_out) q["frac_out"] = *b.activation_qformat.frac_out;
    root["activation_qformat"] = q;
  }
  OrderedJson init = OrderedJson::array();
  for (const GlobalInit& g : b.global_mem_init) {
    init.push_back({{"address", g.address}, {"hex", to_hex(g.bytes)}});
  }
  root["global_mem_init"] = init;
  OrderedJson cores = OrderedJson::array();
  for (const CoreConfig& c : b.cores) {
    OrderedJson jc;
    jc["core_id"] = c.core_id;
    jc["local_mem_bytes"] = c.local_mem_bytes;
    jc["event_register_count"] = c.event_register_count;
    jc["initial_ibiw"] = c.initial_ibiw;
    jc["initial_obiw"] = c.initial_obiw;
    OrderedJson arrays = OrderedJson::array();
    for (const LogicalArray& a : c.arrays) {
      OrderedJson ja;
      ja["array_id"] = a.array_id;
      ja["rows"] = a.weights.rows;
      ja["cols"] = a.weights.cols;
      if (a.weights_file) {
        ja["weights_file"] = *a.weights_file;
      } else {
        OrderedJson rows = OrderedJson::array();
        for (std::size_t r = 0; r < a.weights.rows; ++r) {
          OrderedJson row = OrderedJson::array();
          for (std::size_t col = 0; col < a.weights.cols; ++col) {
            row.push_back(a.weights.at(r, col));
          }
          rows.push_back(std::move(row));
        }
        ja["weights"] = std::move(rows);
      }
      arrays.push_back(std::move(ja));
    }
    jc["arrays"] = std::move(arrays);
    OrderedJson groups = OrderedJson::array();
    for (const ArrayGroup& g : c.groups) {
      OrderedJson tiles = OrderedJson::array();
      for (const Tile& t : g.tiles) {
        tiles.push_back({{"array_id", t.array_id},
                         {"row_offset", t.row_offset},
                         {"col_offset", t.col_offset}});
      }
      groups.push_back({{"group_id", g.group_id},
                        {"total_rows", g.total_rows},
                        {"total_cols", g.total_cols},
                        {"tiles", std::move(tiles)}});
    }
    jc["groups"] = std::move(groups);
    jc["code"] = instruction_lines(c.code);
    cores.push_back(std::move(jc));
  }
  root["cores"] = std::move(cores);
  return root.dump(2) + "\n";
}

Matrix assemble_group_matrix(const CoreConfig& core, std::uint32_t group_id) {
  if (group_id >= core.groups.size()) throw UnknownGroup(core.core_id, group_id);
  const ArrayGroup& g = core.groups[group_id];
  Matrix m(g.total_rows, g.total_cols);
  for (const Tile& t : g.tiles) {
    const Matrix& w = core.arrays.at(t.array_id).weights;
    for (std::size_t r = 0; r < w.rows; ++r) {
      for (std::size_t c = 0; c < w.cols; ++c) {
        m.at(t.row_offset + r, t.col_offset + c) = w.at(r, c);
      }
    }
  }
  return m;
}

const Matrix& GroupCache::get(std::uint32_t group_id) {
  auto it = cache_.find(group_id);
  if (it == cache_.end()) {
    it = cache_.emplace(group_id, assemble_group_matrix(*core_, group_id)).first;
  }
  return it->second;
}

}  // namespace pimkit::manifest
