#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rnn/isa.hpp"

using namespace rnn;

TEST_CASE("opcode numbering and stage map") {
  CHECK(uint8_t(Opcode::LD) == 0x0);
  CHECK(uint8_t(Opcode::ADD) == 0x1);
  CHECK(uint8_t(Opcode::SUB) == 0x2);
  CHECK(uint8_t(Opcode::MUL) == 0x3);
  CHECK(uint8_t(Opcode::MAX) == 0x4);
  CHECK(uint8_t(Opcode::MIN) == 0x5);
  CHECK(uint8_t(Opcode::MADD) == 0x6);
  CHECK(uint8_t(Opcode::PREREAD0) == 0x7);
  CHECK(uint8_t(Opcode::PREREAD1) == 0x8);
  CHECK(uint8_t(Opcode::COPY) == 0x9);
  CHECK(uint8_t(Opcode::ST) == 0xA);

  CHECK(stage_of(Opcode::LD) == Stage::LD);
  for (Opcode op : {Opcode::ADD, Opcode::SUB, Opcode::MUL, Opcode::MAX,
                    Opcode::MIN, Opcode::MADD, Opcode::PREREAD0, Opcode::PREREAD1})
    CHECK(stage_of(op) == Stage::CAL);
  CHECK(stage_of(Opcode::COPY) == Stage::FLOW);
  CHECK(stage_of(Opcode::ST) == Stage::ST);
}

TEST_CASE("hand-computed encodings") {
  // MADD 0,0,0 with inc=1: op nibble 0x6 at the top, inc=1 at ctrl bits 11..4.
  Instruction madd{Opcode::MADD, 0, 0, 0, 1, 0};
  CHECK(encode(madd) == 0x6000000000000010ull);

  Instruction ld{Opcode::LD, 0, 0, 0, 0, 0};
  CHECK(encode(ld) == 0x0000000000000000ull);

  // Field placement spot check.
  Instruction i{Opcode::ADD, 0xABCD, 0x1234, 0xF00F, 0x55, 0};
  uint64_t w = encode(i);
  CHECK(((w >> 60) & 0xF) == 0x1);
  CHECK(((w >> 44) & 0xFFFF) == 0xABCD);
  CHECK(((w >> 28) & 0xFFFF) == 0x1234);
  CHECK(((w >> 12) & 0xFFFF) == 0xF00F);
  CHECK(((w >> 4) & 0xFF) == 0x55);
  CHECK((w & 0xF) == 0);
}

TEST_CASE("roundtrip over all opcodes x random fields") {
  std::mt19937_64 rng(12345);
  for (int opn = 0; opn < kNumOpcodes; ++opn) {
    Opcode op = Opcode(opn);
    for (int k = 0; k < 2000; ++k) {
      Instruction i;
      i.op = op;
      i.f0 = uint16_t(rng());
      i.f1 = uint16_t(rng());
      i.f2 = uint16_t(rng());
      i.sparse_pc_inc = uint8_t(rng());
      i.lookup_type = (op == Opcode::ST) ? uint8_t(rng() & 0xF) : 0;
      Instruction back = decode(encode(i));
      CHECK(back == i);
      CHECK(encode(back) == encode(i));
    }
  }
}

TEST_CASE("invalid opcode patterns rejected") {
  for (uint64_t opn : {0xBull, 0xCull, 0xDull, 0xEull, 0xFull}) {
    CHECK_THROWS_AS(decode(opn << 60), InvalidOpcode);
  }
}

TEST_CASE("lookup_type on non-ST rejected") {
  Instruction mul{Opcode::MUL, 1, 2, 3, 1, 0};
  uint64_t w = encode(mul) | 0x3;  // force lookup_type = 3
  CHECK_THROWS_AS(decode(w), MalformedCtrl);
}

TEST_CASE("assemble basics") {
  auto insts = assemble("MADD 5, 6, 7\n");
  REQUIRE(insts.size() == 1);
  CHECK(insts[0].op == Opcode::MADD);
  CHECK(insts[0].f0 == 5);
  CHECK(insts[0].f1 == 6);
  CHECK(insts[0].f2 == 7);
  CHECK(insts[0].sparse_pc_inc == 1);
  CHECK(insts[0].lookup_type == 0);

  auto st = assemble("ST 3, 0, 16, lookup=1\n");
  REQUIRE(st.size() == 1);
  CHECK(st[0].op == Opcode::ST);
  CHECK(st[0].lookup_type == 1);

  CHECK_THROWS_AS(assemble("MADD 5, 6\n"), SyntaxError);
  CHECK_THROWS_AS(assemble("FOO 1, 2, 3\n"), SyntaxError);
  CHECK_THROWS_AS(assemble("MADD 5, 6, 7\nLD 0, 0, 0\n"), StageOrderError);

  auto prog = assemble(
      "# comment\n"
      "LD 0, 0, 0x10\n"
      "LD 1, 0, 0x20  # trailing comment\n"
      "MADD 0, 1, 2\n"
      "COPY 2, 5, 3\n"
      "ST 2, 0, 0\n");
  CHECK(prog.size() == 5);
}

TEST_CASE("assemble/disassemble roundtrip") {
  std::string text =
      "LD 4, 1, 2\n"
      "MUL 1, 2, 3\n"
      "MADD 3, 4, 5\n"
      "COPY 5, 17, 7\n"
      "ST 5, 0, 64, lookup=2\n";
  auto insts = assemble(text);
  auto text2 = disassemble(insts);
  auto insts2 = assemble(text2);
  CHECK(insts == insts2);
}

TEST_CASE("image roundtrip") {
  auto insts = assemble(
      "LD 0, 0, 0\n"
      "ADD 0, 1, 2\n"
      "ST 2, 0, 8\n");
  auto img = write_image(insts);
  CHECK(img.size() == 16 + 3 * 8);
  CHECK(img[0] == 'R');
  auto back = read_image(img);
  CHECK(back == insts);
}
