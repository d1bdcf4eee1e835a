#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rnn/config.hpp"

namespace rnn {

enum NetId { NET_MEM = 0, NET_PE = 1, NET_CTRL = 2 };

// Monotone event counters; one instance per run.
struct Counters {
  uint64_t cycles = 0;

  std::vector<uint64_t> pe_cal_insts;      // CAL-unit instruction executions
  std::vector<uint64_t> pe_mac_lane_ops;   // arithmetic lane ops (simd per inst)
  std::vector<uint64_t> pe_iram_reads;
  std::vector<uint64_t> pe_opm_reads;
  std::vector<uint64_t> pe_opm_writes;
  std::vector<uint64_t> pe_ld_insts;
  std::vector<uint64_t> pe_st_insts;
  std::vector<uint64_t> pe_copy_insts;
  std::vector<uint64_t> pe_unit_busy[4];   // LD, CAL, FLOW, ST
  std::vector<uint64_t> pe_port_wait;      // ST/FLOW read-port wait cycles

  uint64_t flits_injected[3] = {0, 0, 0};
  uint64_t flits_delivered[3] = {0, 0, 0};
  uint64_t flit_hops[3] = {0, 0, 0};

  uint64_t cache_lookups = 0;
  uint64_t cache_hits = 0;
  uint64_t cache_misses = 0;
  uint64_t cache_writebacks = 0;
  uint64_t dram_read_bytes = 0;
  uint64_t dram_write_bytes = 0;
  uint64_t dram_reads = 0;   // 64-byte block granule
  uint64_t dram_writes = 0;
  uint64_t table_lookups = 0;
  uint64_t ctrl_msgs = 0;

  void init(int num_pes) {
    pe_cal_insts.assign(size_t(num_pes), 0);
    pe_mac_lane_ops.assign(size_t(num_pes), 0);
    pe_iram_reads.assign(size_t(num_pes), 0);
    pe_opm_reads.assign(size_t(num_pes), 0);
    pe_opm_writes.assign(size_t(num_pes), 0);
    pe_ld_insts.assign(size_t(num_pes), 0);
    pe_st_insts.assign(size_t(num_pes), 0);
    pe_copy_insts.assign(size_t(num_pes), 0);
    for (auto& u : pe_unit_busy) u.assign(size_t(num_pes), 0);
    pe_port_wait.assign(size_t(num_pes), 0);
  }

  uint64_t total(const std::vector<uint64_t>& v) const {
    uint64_t s = 0;
    for (auto x : v) s += x;
    return s;
  }
  uint64_t total_mac_lane_ops() const { return total(pe_mac_lane_ops); }
  uint64_t total_cal_insts() const { return total(pe_cal_insts); }

  double mac_utilization(const HwConfig& hw) const {
    if (cycles == 0) return 0.0;
    return double(total_mac_lane_ops()) /
           (double(cycles) * hw.num_pes() * hw.simd);
  }
};

// Optional event trace; schema (one line per event, comma separated):
//   cycle,pe,unit,kind,addr
// pe = -1 for uncore events. Stable field order; no derived values.
class TraceSink {
 public:
  explicit TraceSink(std::ostream* os = nullptr) : os_(os) {}
  bool on() const { return os_ != nullptr; }
  void emit(uint64_t cycle, int pe, const char* unit, const char* kind,
            uint64_t addr) {
    if (!os_) return;
    (*os_) << cycle << ',' << pe << ',' << unit << ',' << kind << ',' << addr
           << '\n';
  }

 private:
  std::ostream* os_;
};

}  // namespace rnn
