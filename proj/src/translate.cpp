#include "rnn/translate.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace rnn {

// ------------------------- SparseBytes -------------------------

void SparseBytes::write(uint64_t addr, const uint8_t* data, size_t n) {
  while (n > 0) {
    uint64_t page = addr / kPage;
    uint64_t off = addr % kPage;
    size_t chunk = std::min<uint64_t>(n, kPage - off);
    auto it = pages_.find(page);
    if (it == pages_.end()) it = pages_.emplace(page, std::array<uint8_t, 4096>{}).first;
    std::memcpy(it->second.data() + off, data, chunk);
    addr += chunk;
    data += chunk;
    n -= chunk;
  }
}

void SparseBytes::read(uint64_t addr, uint8_t* out, size_t n) const {
  while (n > 0) {
    uint64_t page = addr / kPage;
    uint64_t off = addr % kPage;
    size_t chunk = std::min<uint64_t>(n, kPage - off);
    auto it = pages_.find(page);
    if (it == pages_.end())
      std::memset(out, 0, chunk);
    else
      std::memcpy(out, it->second.data() + off, chunk);
    addr += chunk;
    out += chunk;
    n -= chunk;
  }
}

void SparseBytes::write_u16(uint64_t addr, uint16_t v) {
  uint8_t b[2] = {uint8_t(v & 0xFF), uint8_t(v >> 8)};
  write(addr, b, 2);
}

uint16_t SparseBytes::read_u16(uint64_t addr) const {
  uint8_t b[2];
  read(addr, b, 2);
  return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}

bool SparseBytes::equal_range(const SparseBytes& other, uint64_t addr,
                              uint64_t n) const {
  std::vector<uint8_t> a(n), b(n);
  read(addr, a.data(), n);
  other.read(addr, b.data(), n);
  return a == b;
}

// ------------------------- Bundle -------------------------

uint64_t Bundle::region_base(const std::string& name) const {
  return region(name).base;
}

const RegionInfo& Bundle::region(const std::string& name) const {
  for (const auto& r : regions)
    if (r.name == name) return r;
  throw TranslateError("unknown region '" + name + "'");
}

void Bundle::register_table(int id, uint64_t base,
                            const std::vector<uint16_t>& values) {
  if (values.size() != 65536)
    throw TranslateError("lookup table must have 65536 entries");
  lookup_tables[id] = base;
  std::vector<uint8_t> bytes(values.size() * 2);
  for (size_t i = 0; i < values.size(); ++i) {
    bytes[2 * i] = uint8_t(values[i] & 0xFF);
    bytes[2 * i + 1] = uint8_t(values[i] >> 8);
  }
  dram.write(base, bytes.data(), bytes.size());
}

// ------------------------- init fragments -------------------------
//
// Fragment payload layouts (kind implied by index, slot in bits 7..0):
//   0: slot(8) prio(8) task(8) pred(8) sparse(1) nsucc(2) iram_start(13) count(13)
//   1: slot(8) stage_start[0..3] as 4x13
//   2: slot(8) stage_end[0..3] as 4x13
//   3: slot(8) inst_dram_addr(32)
//   4: slot(8) succs as 3x(pe(8) slot(8))
// Widest is 61 bits, inside the 85-bit control flit.

std::array<uint64_t, kInitFragments> pack_init_fragments(const ExeBlockDescriptor& d) {
  std::array<uint64_t, kInitFragments> f{};
  uint64_t slot = d.slot & 0xFF;
  f[0] = slot | (uint64_t(d.priority) << 8) | (uint64_t(d.task_id) << 16) |
         (uint64_t(d.pred_count) << 24) | (uint64_t(d.sparse ? 1 : 0) << 32) |
         (uint64_t(d.succs.size()) << 33) | (uint64_t(d.iram_start & 0x1FFF) << 35) |
         (uint64_t(d.inst_count & 0x1FFF) << 48);
  f[1] = slot;
  f[2] = slot;
  for (int s = 0; s < kNumStages; ++s) {
    f[1] |= uint64_t(d.stage_start[s] & 0x1FFF) << (8 + 13 * s);
    f[2] |= uint64_t(d.stage_end[s] & 0x1FFF) << (8 + 13 * s);
  }
  f[3] = slot | (uint64_t(d.inst_dram_addr) << 8);
  f[4] = slot;
  for (size_t i = 0; i < d.succs.size() && i < 3; ++i) {
    f[4] |= uint64_t(d.succs[i].pe & 0xFF) << (8 + 16 * i);
    f[4] |= uint64_t(d.succs[i].slot & 0xFF) << (16 + 16 * i);
  }
  return f;
}

void unpack_init_fragment(uint64_t frag, int idx, ExeBlockDescriptor& d) {
  d.slot = uint16_t(frag & 0xFF);
  switch (idx) {
    case 0: {
      d.priority = uint8_t((frag >> 8) & 0xFF);
      d.task_id = uint8_t((frag >> 16) & 0xFF);
      d.pred_count = uint8_t((frag >> 24) & 0xFF);
      d.sparse = ((frag >> 32) & 1) != 0;
      size_t nsucc = (frag >> 33) & 0x3;
      d.succs.resize(nsucc);
      d.iram_start = uint16_t((frag >> 35) & 0x1FFF);
      d.inst_count = uint16_t((frag >> 48) & 0x1FFF);
      break;
    }
    case 1:
      for (int s = 0; s < kNumStages; ++s)
        d.stage_start[s] = uint16_t((frag >> (8 + 13 * s)) & 0x1FFF);
      break;
    case 2:
      for (int s = 0; s < kNumStages; ++s)
        d.stage_end[s] = uint16_t((frag >> (8 + 13 * s)) & 0x1FFF);
      break;
    case 3:
      d.inst_dram_addr = uint32_t((frag >> 8) & 0xFFFFFFFF);
      break;
    case 4:
      for (size_t i = 0; i < d.succs.size(); ++i) {
        d.succs[i].pe = uint16_t((frag >> (8 + 16 * i)) & 0xFF);
        d.succs[i].slot = uint16_t((frag >> (16 + 16 * i)) & 0xFF);
      }
      break;
    default:
      assert(false);
  }
}

// ------------------------- translation -------------------------

namespace {

struct SourceReads {
  // distinct OPM source addresses a CAL instruction reads from the RAM
  uint32_t addr[3];
  int n = 0;
  void add(uint32_t a) {
    for (int i = 0; i < n; ++i)
      if (addr[i] == a) return;
    addr[n++] = a;
  }
};

SourceReads cal_sources(const BoundInst& bi) {
  SourceReads s;
  switch (bi.op) {
    case Opcode::PREREAD0:
      s.add(bi.opm0);
      break;
    case Opcode::PREREAD1:
      s.add(bi.opm1);
      break;
    case Opcode::MADD:
      s.add(bi.opm0);
      s.add(bi.opm1);
      s.add(bi.opm2);
      break;
    default:
      s.add(bi.opm0);
      s.add(bi.opm1);
      break;
  }
  return s;
}

}  // namespace

Bundle translate(const ExecutionGraph& g, const HwConfig& hw,
                 const PruningMask* mask) {
  {
    auto diags = validate_graph(g);
    if (!diags.empty()) {
      std::string msg = "graph failed validation:";
      for (auto& d : diags) msg += "\n  [" + d.kind + "] " + d.message;
      throw TranslateError(msg);
    }
  }
  if (g.simd != hw.simd)
    throw TranslateError("graph generated for simd " + std::to_string(g.simd) +
                         " but machine configured with " + std::to_string(hw.simd));

  Bundle b;
  b.hw = hw;

  // ---- phase 1: placement. Logical PEs in ascending order map round-robin
  // onto physical PEs in row-major order; instances pinned to one logical PE
  // always co-locate.
  std::vector<uint32_t> lpes;
  for (const auto& in : g.instances) lpes.push_back(in.lpe);
  std::sort(lpes.begin(), lpes.end());
  lpes.erase(std::unique(lpes.begin(), lpes.end()), lpes.end());
  for (size_t i = 0; i < lpes.size(); ++i)
    b.mapping.lpe_to_pe[lpes[i]] = int(i % size_t(hw.num_pes()));

  std::vector<std::vector<int>> pe_instances(size_t(hw.num_pes()));
  for (size_t i = 0; i < g.instances.size(); ++i)
    pe_instances[size_t(b.mapping.lpe_to_pe[g.instances[i].lpe])].push_back(int(i));
  for (int pe = 0; pe < hw.num_pes(); ++pe) {
    if (int(pe_instances[size_t(pe)].size()) > hw.max_exeblocks)
      throw CapacityExceeded("PE " + std::to_string(pe) + ": " +
                             std::to_string(pe_instances[size_t(pe)].size()) +
                             " blocks exceed the " +
                             std::to_string(hw.max_exeblocks) + "-slot limit");
  }

  // Bound bodies, resolved once.
  std::vector<BoundBody> bodies(g.instances.size());
  for (size_t i = 0; i < g.instances.size(); ++i) bodies[i] = instantiate(g, int(i));

  // Sanity: every COPY target lpe must be placeable.
  for (size_t i = 0; i < g.instances.size(); ++i)
    for (const auto& bi : bodies[i].stage[int(Stage::FLOW)])
      if (!b.mapping.lpe_to_pe.count(bi.peer_lpe))
        throw UnplaceableSharing("instance '" + g.instances[i].name +
                                 "' copies to logical PE " +
                                 std::to_string(bi.peer_lpe) +
                                 " which hosts no instance");

  // ---- phase 2: operand allocation. Greedy lowest-occupancy bank with a
  // role-class preference (f0 -> banks =0 mod 3, f1 -> =1, f2 -> =2) so CAL
  // sources naturally land in distinct banks.
  {
    // First CAL role seen per (lpe, addr); -1 = no CAL use.
    std::map<std::pair<uint32_t, uint32_t>, int> role;
    auto note_role = [&](uint32_t lpe, uint32_t addr, int r) {
      role.emplace(std::make_pair(lpe, addr), r);
    };
    for (size_t i = 0; i < g.instances.size(); ++i) {
      uint32_t lpe = g.instances[i].lpe;
      for (const auto& bi : bodies[i].stage[int(Stage::CAL)]) {
        switch (bi.op) {
          case Opcode::PREREAD0:
            note_role(lpe, bi.opm0, 0);
            break;
          case Opcode::PREREAD1:
            note_role(lpe, bi.opm1, 1);
            break;
          default:
            note_role(lpe, bi.opm0, 0);
            note_role(lpe, bi.opm1, 1);
            note_role(lpe, bi.opm2, 2);
            break;
        }
      }
    }

    std::vector<std::vector<int>> bank_fill(size_t(hw.num_pes()),
                                            std::vector<int>(size_t(hw.opm_banks), 0));
    auto alloc = [&](uint32_t lpe, uint32_t addr) {
      auto key = std::make_pair(lpe, addr);
      if (b.mapping.operands.count(key)) return;
      int pe = b.mapping.lpe_to_pe[lpe];
      auto& fill = bank_fill[size_t(pe)];
      int want = 0;
      auto it = role.find(key);
      if (it != role.end()) want = it->second;
      int best = -1;
      // preferred class first, then any bank with room
      for (int pass = 0; pass < 2 && best < 0; ++pass) {
        for (int bank = 0; bank < hw.opm_banks; ++bank) {
          if (pass == 0 && hw.opm_banks >= 3 && bank % 3 != want) continue;
          if (fill[size_t(bank)] >= hw.opm_entries_per_bank) continue;
          if (best < 0 || fill[size_t(bank)] < fill[size_t(best)]) best = bank;
        }
      }
      if (best < 0)
        throw OperandCapacityExceeded(
            "PE " + std::to_string(pe) + ": Operand RAM full (" +
            std::to_string(hw.opm_entries()) + " entries)");
      uint16_t flat = uint16_t(best * hw.opm_entries_per_bank + fill[size_t(best)]);
      ++fill[size_t(best)];
      b.mapping.operands[key] = flat;
    };

    // Walk instances in id order, instructions in program order, operands in
    // field order: fully deterministic.
    for (size_t i = 0; i < g.instances.size(); ++i) {
      uint32_t lpe = g.instances[i].lpe;
      const BoundBody& body = bodies[i];
      for (const auto& bi : body.stage[int(Stage::LD)]) alloc(lpe, bi.opm0);
      for (const auto& bi : body.stage[int(Stage::CAL)]) {
        switch (bi.op) {
          case Opcode::PREREAD0:
            alloc(lpe, bi.opm0);
            break;
          case Opcode::PREREAD1:
            alloc(lpe, bi.opm1);
            break;
          default:
            alloc(lpe, bi.opm0);
            alloc(lpe, bi.opm1);
            alloc(lpe, bi.opm2);
            break;
        }
      }
      for (const auto& bi : body.stage[int(Stage::FLOW)]) {
        alloc(lpe, bi.opm0);
        alloc(bi.peer_lpe, bi.opm1);
      }
      for (const auto& bi : body.stage[int(Stage::ST)]) alloc(lpe, bi.opm0);
    }
  }

  auto opm_of = [&](uint32_t lpe, uint32_t addr) -> uint16_t {
    auto it = b.mapping.operands.find({lpe, addr});
    if (it == b.mapping.operands.end())
      throw TranslateError("unallocated operand " + std::to_string(addr) +
                           " on lpe " + std::to_string(lpe));
    return it->second;
  };
  auto bank_of = [&](uint16_t flat) { return flat / hw.opm_entries_per_bank; };

  // ---- phase 3: build final instruction streams with PREREAD insertion.
  b.blocks.resize(g.instances.size());
  for (size_t i = 0; i < g.instances.size(); ++i) {
    const auto& in = g.instances[i];
    TranslatedBlock& tb = b.blocks[i];
    tb.instance_idx = int(i);
    tb.name = in.name;
    tb.desc.priority = uint8_t(std::min<uint32_t>(in.priority, 255));
    tb.desc.task_id = uint8_t(in.task_id);
    tb.desc.sparse = in.sparse;
    tb.desc.pred_count = uint8_t(g.predecessor_count(int(i)));

    size_t stage_sizes[kNumStages] = {0, 0, 0, 0};
    for (int s = 0; s < kNumStages; ++s) {
      for (const auto& bi : bodies[i].stage[s]) {
        Instruction mi;
        mi.op = bi.op;
        mi.sparse_pc_inc = 1;
        switch (stage_of(bi.op)) {
          case Stage::LD:
          case Stage::ST:
            mi.f0 = opm_of(in.lpe, bi.opm0);
            mi.set_dram_offset(bi.dram_off);
            mi.lookup_type = bi.lookup;
            break;
          case Stage::CAL: {
            if (bi.op == Opcode::PREREAD0) {
              mi.f0 = opm_of(in.lpe, bi.opm0);
            } else if (bi.op == Opcode::PREREAD1) {
              mi.f1 = opm_of(in.lpe, bi.opm1);
            } else {
              mi.f0 = opm_of(in.lpe, bi.opm0);
              mi.f1 = opm_of(in.lpe, bi.opm1);
              mi.f2 = opm_of(in.lpe, bi.opm2);
              // Same-bank reads of distinct addresses cannot be served in one
              // cycle; retire f0's read into PreRead0 and/or f1's into
              // PreRead1 (the registers are slot-matched). Equal addresses
              // share one bank read and never conflict. f2 is read by MADD
              // only and has no preread slot of its own.
              bool is_madd = bi.op == Opcode::MADD;
              auto conflict = [&](uint16_t a, uint16_t x) {
                return a != x && bank_of(a) == bank_of(x);
              };
              bool pre0 = conflict(mi.f0, mi.f1) ||
                          (is_madd && conflict(mi.f0, mi.f2));
              bool pre1 = is_madd && conflict(mi.f1, mi.f2);
              if (pre0) {
                Instruction p;
                p.op = Opcode::PREREAD0;
                p.f0 = mi.f0;
                p.sparse_pc_inc = 1;
                tb.insts.push_back(p);
                tb.weight_tags.push_back(bi.weight_tag);
                ++stage_sizes[s];
              }
              if (pre1) {
                Instruction p;
                p.op = Opcode::PREREAD1;
                p.f1 = mi.f1;
                p.sparse_pc_inc = 1;
                tb.insts.push_back(p);
                tb.weight_tags.push_back(bi.weight_tag);
                ++stage_sizes[s];
              }
            }
            break;
          }
          case Stage::FLOW: {
            mi.f0 = opm_of(in.lpe, bi.opm0);
            mi.f1 = opm_of(bi.peer_lpe, bi.opm1);
            mi.f2 = uint16_t(b.mapping.lpe_to_pe[bi.peer_lpe]);
            break;
          }
        }
        tb.insts.push_back(mi);
        tb.weight_tags.push_back(bi.weight_tag);
        ++stage_sizes[s];
      }
    }

    // stage PC ranges are filled in after Instruction RAM placement; stash
    // sizes in stage_end temporarily
    size_t acc = 0;
    for (int s = 0; s < kNumStages; ++s) {
      tb.desc.stage_start[s] = uint16_t(acc);
      acc += stage_sizes[s];
      tb.desc.stage_end[s] = uint16_t(acc);
    }
    tb.desc.inst_count = uint16_t(tb.insts.size());
  }

  // ---- phase 4: Instruction RAM and DRAM layout, slots, descriptors.
  std::vector<int> iram_cursor(size_t(hw.num_pes()), 0);
  uint64_t dram_cursor = 4096;  // page 0 reserved
  for (int pe = 0; pe < hw.num_pes(); ++pe) {
    int slot = 0;
    for (int ii : pe_instances[size_t(pe)]) {
      TranslatedBlock& tb = b.blocks[size_t(ii)];
      tb.desc.pe = uint16_t(pe);
      tb.desc.slot = uint16_t(slot++);
      int start = iram_cursor[size_t(pe)];
      if (start + int(tb.insts.size()) > hw.iram_words())
        throw CapacityExceeded("PE " + std::to_string(pe) +
                               ": Instruction RAM overflow (" +
                               std::to_string(start + tb.insts.size()) + " > " +
                               std::to_string(hw.iram_words()) + " words)");
      iram_cursor[size_t(pe)] = start + int(tb.insts.size());
      tb.desc.iram_start = uint16_t(start);
      for (int s = 0; s < kNumStages; ++s) {
        tb.desc.stage_start[s] = uint16_t(tb.desc.stage_start[s] + start);
        tb.desc.stage_end[s] = uint16_t(tb.desc.stage_end[s] + start);
      }
      tb.desc.inst_dram_addr = uint32_t(dram_cursor);
      for (const auto& mi : tb.insts) {
        uint64_t w = encode(mi);
        uint8_t bytes[8];
        for (int k = 0; k < 8; ++k) bytes[k] = uint8_t(w >> (8 * k));
        b.dram.write(dram_cursor, bytes, 8);
        dram_cursor += 8;
      }
    }
  }

  // successor (pe, slot) resolution
  for (const auto& e : g.edges) {
    TranslatedBlock& from = b.blocks[size_t(e.from)];
    const TranslatedBlock& to = b.blocks[size_t(e.to)];
    from.desc.succs.push_back({to.desc.pe, to.desc.slot});
  }
  for (auto& tb : b.blocks)
    if (tb.desc.succs.size() > 3)
      throw TranslateError("block '" + tb.name + "' has more than 3 successors");

  // data regions at 4 KiB-aligned bases after the instruction area
  dram_cursor = (dram_cursor + 4095) & ~uint64_t(4095);
  for (const auto& r : g.regions) {
    b.regions.push_back({r.name, dram_cursor, r.size});
    b.mapping.region_base.push_back(dram_cursor);
    dram_cursor = (dram_cursor + r.size + 4095) & ~uint64_t(4095);
  }

  // ---- control script
  for (int pe = 0; pe < hw.num_pes(); ++pe)
    for (int ii : pe_instances[size_t(pe)]) b.script.init_order.push_back(ii);

  if (mask) {
    for (const auto& tb : b.blocks) {
      if (!tb.desc.sparse) continue;
      ControlScript::SparseRec rec;
      rec.pe = tb.desc.pe;
      rec.slot = tb.desc.slot;
      rec.bits = compute_sparse_bits(tb, *mask);
      b.script.sparse.push_back(rec);
    }
  }

  for (const auto& td : g.tasks) {
    ControlScript::TaskRec tr;
    tr.task_id = td.id;
    tr.iters = td.iters;
    tr.ld_base = uint32_t(b.mapping.region_base[size_t(td.ld_region)]);
    tr.st_base = uint32_t(b.mapping.region_base[size_t(td.st_region)]);
    int nblocks = 0;
    for (const auto& in : g.instances)
      if (in.task_id == td.id) ++nblocks;
    tr.n_blocks = nblocks;
    auto flatten = [&](const std::vector<std::vector<StagingCopy>>& in_copies) {
      std::vector<std::vector<FlatCopy>> out;
      out.resize(in_copies.size());
      for (size_t it = 0; it < in_copies.size(); ++it)
        for (const auto& sc : in_copies[it])
          out[it].push_back({b.mapping.region_base[size_t(sc.src_region)] + sc.src_off,
                             b.mapping.region_base[size_t(sc.dst_region)] + sc.dst_off,
                             sc.len});
      return out;
    };
    tr.prestage = flatten(td.prestage);
    tr.poststage = flatten(td.poststage);
    b.script.tasks.push_back(tr);
  }

  check_no_residual_conflicts(b);
  return b;
}

void check_no_residual_conflicts(const Bundle& b) {
  const HwConfig& hw = b.hw;
  for (const auto& tb : b.blocks) {
    // bank arbiter oracle over the CAL stage: track live preread addresses
    uint32_t pre_addr[2] = {UINT32_MAX, UINT32_MAX};
    int cal0 = tb.desc.stage_start[int(Stage::CAL)] - tb.desc.iram_start;
    int cal1 = tb.desc.stage_end[int(Stage::CAL)] - tb.desc.iram_start;
    for (int p = cal0; p < cal1; ++p) {
      const Instruction& mi = tb.insts[size_t(p)];
      if (mi.op == Opcode::PREREAD0) {
        pre_addr[0] = mi.f0;
        continue;
      }
      if (mi.op == Opcode::PREREAD1) {
        pre_addr[1] = mi.f1;
        continue;
      }
      SourceReads live;
      // preread registers are slot-matched: OP0 checks PreRead0, OP1 PreRead1
      bool f0_reg = mi.f0 == pre_addr[0];
      bool f1_reg = mi.f1 == pre_addr[1];
      if (!f0_reg) live.add(mi.f0);
      if (!f1_reg) live.add(mi.f1);
      if (mi.op == Opcode::MADD) live.add(mi.f2);
      if (f0_reg) pre_addr[0] = UINT32_MAX;
      if (f1_reg) pre_addr[1] = UINT32_MAX;
      int per_bank[64] = {0};
      for (int k = 0; k < live.n; ++k) {
        int bank = int(live.addr[k]) / hw.opm_entries_per_bank;
        if (++per_bank[bank] > 1)
          throw TranslateError("block '" + tb.name +
                               "': residual Operand RAM conflict at CAL pc " +
                               std::to_string(p));
      }
    }
  }
}

std::vector<uint8_t> compute_sparse_bits(const TranslatedBlock& blk,
                                         const PruningMask& mask) {
  int cal0 = blk.desc.stage_start[int(Stage::CAL)] - blk.desc.iram_start;
  int cal1 = blk.desc.stage_end[int(Stage::CAL)] - blk.desc.iram_start;
  int n = cal1 - cal0;
  std::vector<uint8_t> bits(size_t(std::max(0, n)), 1);
  for (int p = 0; p < n; ++p) {
    int64_t tag = blk.weight_tags[size_t(cal0 + p)];
    bits[size_t(p)] = mask.is_masked(tag) ? 0 : 1;
  }
  // The 8-bit Sparse PC Inc reaches at most 255 ahead; keep a bridge
  // instruction live inside any longer pruned run (it operates on zeroed
  // weights). The stage end counts as a virtual live position.
  int last = -1;  // entry offset handles leading zeros, so start unconstrained
  for (int p = 0; p <= n; ++p) {
    bool live = (p == n) ? true : bits[size_t(p)] != 0;
    if (!live) continue;
    if (last >= 0) {
      while (p - last > 255) {
        bits[size_t(last + 255)] = 1;
        last += 255;
      }
    }
    last = p;
  }
  // leading run: the loader's entry offset register spans it, but only when
  // some instruction is live; an all-zero stage simply becomes empty
  return bits;
}

}  // namespace rnn
