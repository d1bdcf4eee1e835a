#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rnn {

// The 11 machine opcodes. Numbering follows the instruction listing order;
// the remaining 5 four-bit patterns are invalid.
enum class Opcode : uint8_t {
  LD = 0x0,
  ADD = 0x1,
  SUB = 0x2,
  MUL = 0x3,
  MAX = 0x4,
  MIN = 0x5,
  MADD = 0x6,
  PREREAD0 = 0x7,
  PREREAD1 = 0x8,
  COPY = 0x9,
  ST = 0xA,
};

constexpr int kNumOpcodes = 11;

// Execution stage owning an opcode.
enum class Stage : uint8_t { LD = 0, CAL = 1, FLOW = 2, ST = 3 };
constexpr int kNumStages = 4;

Stage stage_of(Opcode op);
const char* opcode_name(Opcode op);
const char* stage_name(Stage s);
bool opcode_from_name(const std::string& name, Opcode& out);

// One 64-bit machine word:
//   [op(63..60) | f0(59..44) | f1(43..28) | f2(27..12) | ctrl(11..0)]
// ctrl = [sparse_pc_inc(11..4) | lookup_type(3..0)]
struct Instruction {
  Opcode op = Opcode::LD;
  uint16_t f0 = 0;
  uint16_t f1 = 0;
  uint16_t f2 = 0;
  uint8_t sparse_pc_inc = 1;  // 1 for every freshly assembled (dense) program
  uint8_t lookup_type = 0;    // nonzero only on ST

  bool operator==(const Instruction&) const = default;

  uint32_t dram_offset() const {
    return (uint32_t(f1) << 16) | uint32_t(f2);
  }
  void set_dram_offset(uint32_t off) {
    f1 = uint16_t(off >> 16);
    f2 = uint16_t(off & 0xFFFF);
  }
};

struct InvalidOpcode : std::runtime_error {
  explicit InvalidOpcode(const std::string& m) : std::runtime_error(m) {}
};
struct MalformedCtrl : std::runtime_error {
  explicit MalformedCtrl(const std::string& m) : std::runtime_error(m) {}
};
struct SyntaxError : std::runtime_error {
  int line;
  SyntaxError(int line_, const std::string& m)
      : std::runtime_error("line " + std::to_string(line_) + ": " + m), line(line_) {}
};
struct StageOrderError : std::runtime_error {
  int line;
  StageOrderError(int line_, const std::string& m)
      : std::runtime_error("line " + std::to_string(line_) + ": " + m), line(line_) {}
};

uint64_t encode(const Instruction& inst);
Instruction decode(uint64_t word);

// Text format, one instruction per line:  OP f0, f1, f2 [, lookup=K]
// '#' starts a comment. Decimal or 0x literals. Stages must appear in
// LD, CAL, FLOW, ST order within one listing.
std::vector<Instruction> assemble(const std::string& text);
std::string disassemble(const std::vector<Instruction>& insts);

// Binary program image: 16-byte header {magic "RNN1", version u32,
// count u32, reserved u32}, then count little-endian 64-bit words.
std::vector<uint8_t> write_image(const std::vector<Instruction>& insts);
std::vector<Instruction> read_image(const std::vector<uint8_t>& bytes);

}  // namespace rnn
