#include "rnn/isa.hpp"

#include <cctype>
#include <cstring>
#include <sstream>

namespace rnn {

Stage stage_of(Opcode op) {
  switch (op) {
    case Opcode::LD:
      return Stage::LD;
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::MAX:
    case Opcode::MIN:
    case Opcode::MADD:
    case Opcode::PREREAD0:
    case Opcode::PREREAD1:
      return Stage::CAL;
    case Opcode::COPY:
      return Stage::FLOW;
    case Opcode::ST:
      return Stage::ST;
  }
  throw InvalidOpcode("stage_of: bad opcode");
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::LD: return "LD";
    case Opcode::ADD: return "ADD";
    case Opcode::SUB: return "SUB";
    case Opcode::MUL: return "MUL";
    case Opcode::MAX: return "MAX";
    case Opcode::MIN: return "MIN";
    case Opcode::MADD: return "MADD";
    case Opcode::PREREAD0: return "PREREAD0";
    case Opcode::PREREAD1: return "PREREAD1";
    case Opcode::COPY: return "COPY";
    case Opcode::ST: return "ST";
  }
  return "?";
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::LD: return "LD";
    case Stage::CAL: return "CAL";
    case Stage::FLOW: return "FLOW";
    case Stage::ST: return "ST";
  }
  return "?";
}

bool opcode_from_name(const std::string& name, Opcode& out) {
  static const struct { const char* n; Opcode op; } table[] = {
      {"LD", Opcode::LD},       {"ADD", Opcode::ADD},
      {"SUB", Opcode::SUB},     {"MUL", Opcode::MUL},
      {"MAX", Opcode::MAX},     {"MIN", Opcode::MIN},
      {"MADD", Opcode::MADD},   {"PREREAD0", Opcode::PREREAD0},
      {"PREREAD1", Opcode::PREREAD1}, {"COPY", Opcode::COPY},
      {"ST", Opcode::ST},
  };
  for (auto& e : table) {
    if (name == e.n) {
      out = e.op;
      return true;
    }
  }
  return false;
}

uint64_t encode(const Instruction& inst) {
  uint64_t ctrl = (uint64_t(inst.sparse_pc_inc) << 4) | (inst.lookup_type & 0xF);
  return (uint64_t(uint8_t(inst.op)) << 60) | (uint64_t(inst.f0) << 44) |
         (uint64_t(inst.f1) << 28) | (uint64_t(inst.f2) << 12) | ctrl;
}

Instruction decode(uint64_t word) {
  uint8_t opn = uint8_t((word >> 60) & 0xF);
  if (opn > uint8_t(Opcode::ST)) {
    throw InvalidOpcode("invalid opcode nibble 0x" + std::to_string(opn));
  }
  Instruction inst;
  inst.op = Opcode(opn);
  inst.f0 = uint16_t((word >> 44) & 0xFFFF);
  inst.f1 = uint16_t((word >> 28) & 0xFFFF);
  inst.f2 = uint16_t((word >> 12) & 0xFFFF);
  inst.sparse_pc_inc = uint8_t((word >> 4) & 0xFF);
  inst.lookup_type = uint8_t(word & 0xF);
  if (inst.lookup_type != 0 && inst.op != Opcode::ST) {
    throw MalformedCtrl(std::string("lookup_type set on ") + opcode_name(inst.op));
  }
  return inst;
}

namespace {

bool parse_u32(const std::string& tok, uint32_t& out) {
  if (tok.empty()) return false;
  try {
    size_t pos = 0;
    unsigned long v;
    if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X'))
      v = std::stoul(tok.substr(2), &pos, 16), pos += 2;
    else
      v = std::stoul(tok, &pos, 10);
    if (pos != tok.size()) return false;
    out = uint32_t(v);
    return true;
  } catch (...) {
    return false;
  }
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<Instruction> assemble(const std::string& text) {
  std::vector<Instruction> out;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  int last_stage = -1;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;

    size_t sp = line.find_first_of(" \t");
    std::string opname = (sp == std::string::npos) ? line : line.substr(0, sp);
    std::string rest = (sp == std::string::npos) ? "" : strip(line.substr(sp));

    Opcode op;
    if (!opcode_from_name(opname, op))
      throw SyntaxError(lineno, "unknown opcode '" + opname + "'");

    std::vector<std::string> fields;
    std::string cur;
    std::istringstream fs(rest);
    while (std::getline(fs, cur, ',')) fields.push_back(strip(cur));
    if (!rest.empty() && rest.back() == ',') fields.push_back("");

    Instruction inst;
    inst.op = op;
    uint8_t lookup = 0;
    if (!fields.empty() && fields.back().rfind("lookup=", 0) == 0) {
      uint32_t v;
      if (!parse_u32(fields.back().substr(7), v) || v > 15)
        throw SyntaxError(lineno, "bad lookup value");
      lookup = uint8_t(v);
      fields.pop_back();
    }
    if (fields.size() != 3)
      throw SyntaxError(lineno, "expected 3 operand fields, got " +
                                    std::to_string(fields.size()));
    uint32_t v[3];
    for (int i = 0; i < 3; ++i) {
      if (!parse_u32(fields[i], v[i]) || v[i] > 0xFFFF)
        throw SyntaxError(lineno, "bad field '" + fields[i] + "'");
    }
    inst.f0 = uint16_t(v[0]);
    inst.f1 = uint16_t(v[1]);
    inst.f2 = uint16_t(v[2]);
    inst.sparse_pc_inc = 1;
    if (lookup != 0 && op != Opcode::ST)
      throw SyntaxError(lineno, "lookup= only allowed on ST");
    inst.lookup_type = lookup;

    int st = int(stage_of(op));
    if (st < last_stage)
      throw StageOrderError(lineno, std::string(stage_name(Stage(st))) +
                                        " instruction after " +
                                        stage_name(Stage(last_stage)) + " stage");
    last_stage = st;
    out.push_back(inst);
  }
  return out;
}

std::string disassemble(const std::vector<Instruction>& insts) {
  std::ostringstream os;
  for (const auto& i : insts) {
    os << opcode_name(i.op) << " " << i.f0 << ", " << i.f1 << ", " << i.f2;
    if (i.lookup_type != 0) os << ", lookup=" << int(i.lookup_type);
    os << "\n";
  }
  return os.str();
}

static constexpr uint32_t kImageVersion = 1;

std::vector<uint8_t> write_image(const std::vector<Instruction>& insts) {
  std::vector<uint8_t> bytes;
  bytes.reserve(16 + insts.size() * 8);
  auto put32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(uint8_t(v >> (8 * i)));
  };
  bytes.push_back('R');
  bytes.push_back('N');
  bytes.push_back('N');
  bytes.push_back('1');
  put32(kImageVersion);
  put32(uint32_t(insts.size()));
  put32(0);
  for (const auto& inst : insts) {
    uint64_t w = encode(inst);
    for (int i = 0; i < 8; ++i) bytes.push_back(uint8_t(w >> (8 * i)));
  }
  return bytes;
}

std::vector<Instruction> read_image(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "RNN1", 4) != 0)
    throw std::runtime_error("bad program image header");
  auto get32 = [&](size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[off + i]) << (8 * i);
    return v;
  };
  uint32_t count = get32(8);
  if (bytes.size() != 16 + size_t(count) * 8)
    throw std::runtime_error("program image size mismatch");
  std::vector<Instruction> out;
  out.reserve(count);
  for (uint32_t k = 0; k < count; ++k) {
    uint64_t w = 0;
    for (int i = 0; i < 8; ++i) w |= uint64_t(bytes[16 + k * 8 + i]) << (8 * i);
    out.push_back(decode(w));
  }
  return out;
}

}  // namespace rnn
