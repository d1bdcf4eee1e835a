#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rnn/config.hpp"
#include "rnn/isa.hpp"
#include "rnn/program.hpp"

namespace rnn {

struct CapacityExceeded : std::runtime_error {
  explicit CapacityExceeded(const std::string& m) : std::runtime_error(m) {}
};
struct OperandCapacityExceeded : CapacityExceeded {
  explicit OperandCapacityExceeded(const std::string& m) : CapacityExceeded(m) {}
};
struct UnplaceableSharing : std::runtime_error {
  explicit UnplaceableSharing(const std::string& m) : std::runtime_error(m) {}
};
struct SkipDistanceOverflow : std::runtime_error {
  explicit SkipDistanceOverflow(const std::string& m) : std::runtime_error(m) {}
};
struct TranslateError : std::runtime_error {
  explicit TranslateError(const std::string& m) : std::runtime_error(m) {}
};

// Ineffectual weights by tag; a tagged CAL instruction is prunable when its
// weight is masked out. Untagged instructions are always live.
struct PruningMask {
  std::set<int64_t> masked;
  bool is_masked(int64_t tag) const { return tag >= 0 && masked.count(tag) != 0; }
};

// Control-unit record of one block, as initialized over the control network.
struct ExeBlockDescriptor {
  uint16_t pe = 0;
  uint16_t slot = 0;
  uint8_t priority = 0;
  uint8_t task_id = 0;
  uint8_t pred_count = 0;
  bool sparse = false;
  uint16_t iram_start = 0;   // word address in Instruction RAM
  uint16_t inst_count = 0;
  uint16_t stage_start[kNumStages] = {0, 0, 0, 0};  // absolute word addrs
  uint16_t stage_end[kNumStages] = {0, 0, 0, 0};    // start==end => stage absent
  uint32_t inst_dram_addr = 0;
  struct Succ {
    uint16_t pe = 0;
    uint16_t slot = 0;
  };
  std::vector<Succ> succs;  // up to 3

  bool has_stage(int s) const { return stage_start[s] != stage_end[s]; }
};

// Init descriptors travel as a header plus 4 payload fragments, each within
// the 85-bit control-flit budget.
constexpr int kInitFragments = 5;
std::array<uint64_t, kInitFragments> pack_init_fragments(const ExeBlockDescriptor& d);
void unpack_init_fragment(uint64_t frag, int idx, ExeBlockDescriptor& d);

struct TranslatedBlock {
  int instance_idx = -1;
  std::string name;
  ExeBlockDescriptor desc;
  std::vector<Instruction> insts;    // final stream, stage-ordered, prereads inserted
  std::vector<int64_t> weight_tags;  // per instruction (aligned with insts), -1 none
};

struct PhysicalMapping {
  std::map<uint32_t, int> lpe_to_pe;
  // (lpe, logical addr) -> flat physical OPM address (bank*entries_per_bank+entry)
  std::map<std::pair<uint32_t, uint32_t>, uint16_t> operands;
  std::vector<uint64_t> region_base;  // per graph region
  int bank_of(const HwConfig& hw, uint16_t flat) const {
    return flat / hw.opm_entries_per_bank;
  }
};

struct FlatCopy {
  uint64_t src = 0, dst = 0, len = 0;
};

struct ControlScript {
  struct SparseRec {
    uint16_t pe = 0, slot = 0;
    std::vector<uint8_t> bits;  // one per CAL-stage instruction, 1 = live
  };
  struct TaskRec {
    int task_id = 0;
    int iters = 1;
    uint32_t ld_base = 0, st_base = 0;
    int n_blocks = 0;  // completions expected per iteration
    std::vector<std::vector<FlatCopy>> prestage;   // [iter]
    std::vector<std::vector<FlatCopy>> poststage;  // [iter]
  };
  std::vector<int> init_order;  // indices into Bundle::blocks, injection order
  std::vector<SparseRec> sparse;
  std::vector<TaskRec> tasks;
};

// Byte-addressed sparse memory image.
class SparseBytes {
 public:
  void write(uint64_t addr, const uint8_t* data, size_t n);
  void read(uint64_t addr, uint8_t* out, size_t n) const;  // unwritten bytes read 0
  void write_u16(uint64_t addr, uint16_t v);
  uint16_t read_u16(uint64_t addr) const;
  bool equal_range(const SparseBytes& other, uint64_t addr, uint64_t n) const;
  const std::map<uint64_t, std::array<uint8_t, 4096>>& pages() const { return pages_; }

 private:
  static constexpr uint64_t kPage = 4096;
  std::map<uint64_t, std::array<uint8_t, 4096>> pages_;
};

struct RegionInfo {
  std::string name;
  uint64_t base = 0;
  uint64_t size = 0;
};

struct OpmSeed {
  int pe = 0;
  uint16_t entry = 0;                // flat physical address
  std::vector<uint16_t> lanes;
};

// Everything needed to run a translated application on the timed machine or
// the functional executor.
struct Bundle {
  HwConfig hw;
  std::vector<TranslatedBlock> blocks;
  ControlScript script;
  SparseBytes dram;                      // instructions + preloaded data
  std::vector<RegionInfo> regions;
  std::map<int, uint64_t> lookup_tables;  // table id -> DRAM base (65536 u16s)
  std::vector<OpmSeed> opm_init;          // host-preloaded OPM state (tests)
  PhysicalMapping mapping;

  uint64_t region_base(const std::string& name) const;
  const RegionInfo& region(const std::string& name) const;
  void register_table(int id, uint64_t base, const std::vector<uint16_t>& values);
};

// Full translation pipeline: place, allocate operands, insert prereads,
// assign Instruction RAM and DRAM layout, emit descriptors and script.
Bundle translate(const ExecutionGraph& g, const HwConfig& hw,
                 const PruningMask* mask = nullptr);

// Post-pass used by tests and asserted inside translate(): with preread
// registers honored, no CAL instruction reads two distinct same-bank
// operands from the Operand RAM.
void check_no_residual_conflicts(const Bundle& b);

// Sparse vector for one translated block body under a mask. Bridges any
// pruned run longer than the 8-bit PC-increment reach.
std::vector<uint8_t> compute_sparse_bits(const TranslatedBlock& blk,
                                         const PruningMask& mask);

}  // namespace rnn
