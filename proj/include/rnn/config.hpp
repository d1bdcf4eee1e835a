#pragma once

#include <cstdint>
#include <string>

namespace rnn {

// Machine configuration. Defaults model the reference system: an 8x8 PE
// grid at SIMD-8 with 16-bit lanes, banked in-PE RAMs, a sliced write-back
// front-end cache and a latency/bandwidth DRAM model.
struct HwConfig {
  int grid_w = 8;
  int grid_h = 8;
  int simd = 8;              // lanes per operand entry, 16-bit each

  int opm_banks = 16;        // Operand RAM: banks x entries, 1W1R per bank
  int opm_entries_per_bank = 128;
  int iram_banks = 8;        // Instruction RAM: single-ported banks
  int iram_words_per_bank = 512;
  int max_exeblocks = 32;    // control-unit slots per PE

  int ld_window = 8;         // outstanding LD requests per LD unit
  int st_window = 8;         // outstanding ST requests per ST unit

  int cache_slices = 8;
  int cache_slice_bytes = 4096;
  int cache_ways = 4;
  int cache_line_bytes = 64;
  int cache_hit_latency = 2;
  int cache_mshrs = 8;

  int dram_latency = 40;        // cycles
  int dram_bytes_per_cycle = 32;

  int64_t watchdog_cycles = 200000;  // no-progress window before deadlock report

  double clock_ghz = 1.887;  // report scaling only

  int num_pes() const { return grid_w * grid_h; }
  int opm_entries() const { return opm_banks * opm_entries_per_bank; }
  int iram_words() const { return iram_banks * iram_words_per_bank; }
  int entry_bytes() const { return 2 * simd; }
  // flits needed to move one operand entry on a 128-bit data NoC
  int entry_flits() const { return (entry_bytes() * 8 + 127) / 128; }

  double peak_gops() const {
    // a MAC delivers 2 ops per cycle per lane
    return clock_ghz * num_pes() * simd * 2.0;
  }
};

// Per-event energy weights (picojoules per event). The shipped defaults are
// placeholder values for relative comparisons, not physical measurements.
struct EnergyModel {
  double mac_op = 1.0;          // per lane MAC/ALU op
  double opm_read = 0.6;        // per bank read access
  double opm_write = 0.6;       // per bank write access
  double iram_read = 0.8;       // per instruction fetch
  double noc_flit_hop_mem = 0.9;
  double noc_flit_hop_pe = 0.9;
  double noc_flit_hop_ctrl = 0.3;
  double cache_hit = 2.0;
  double cache_miss = 4.0;
  double dram_byte = 2.5;
  double ctrl_msg = 0.5;
};

}  // namespace rnn
