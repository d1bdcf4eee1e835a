#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rnn/isa.hpp"

namespace rnn {

// ---- user-facing programming model: block classes, instances with logical
// addresses, dataflow edges, tasks, staging plans ----

enum class ParamType : uint8_t { Opm, Dram, Pe };

struct ClassParam {
  std::string name;
  ParamType type = ParamType::Opm;
};

// Operand in a class body: literal, or $param+offset.
struct TemplateOperand {
  int param = -1;       // -1 = literal
  uint32_t value = 0;   // literal value or offset added to the binding
};

struct TemplateInst {
  Opcode op = Opcode::LD;
  TemplateOperand a;     // see field roles below
  TemplateOperand b;
  TemplateOperand c;
  uint8_t lookup = 0;
  int64_t weight_tag = -1;  // identity of the weight a CAL inst consumes, -1 none
};

// Field roles per opcode:
//   LD:   a = OPM dest,  b = 32-bit DRAM offset (c unused)
//   ST:   a = OPM src,   b = 32-bit DRAM offset (c unused)
//   CAL:  a = f0, b = f1, c = f2 (all OPM)
//   COPY: a = local OPM src, b = remote OPM dest, c = logical PE id
struct ExeBlockClass {
  std::string name;
  std::vector<ClassParam> params;
  std::vector<TemplateInst> body[kNumStages];  // per stage, in stage order

  int param_index(const std::string& n) const;
};

struct ExeBlockInstance {
  std::string name;
  int class_idx = -1;
  uint32_t lpe = 0;       // logical PE id
  int task_id = 0;
  uint32_t priority = 0;  // lower value = higher priority
  bool sparse = false;
  std::vector<uint32_t> bindings;  // aligned with class params
};

// Fully bound instruction of one instance.
struct BoundInst {
  Opcode op = Opcode::LD;
  uint32_t opm0 = 0;      // local OPM logical address
  uint32_t opm1 = 0;      // second OPM logical address (CAL f1 / COPY remote dest)
  uint32_t opm2 = 0;      // CAL f2
  uint32_t dram_off = 0;  // LD/ST offset
  uint32_t peer_lpe = 0;  // COPY destination logical PE
  uint8_t lookup = 0;
  int64_t weight_tag = -1;
};

struct BoundBody {
  std::vector<BoundInst> stage[kNumStages];
  size_t total() const {
    size_t n = 0;
    for (auto& s : stage) n += s.size();
    return n;
  }
};

struct Region {
  std::string name;
  uint64_t size = 0;
};

// One host-side copy applied outside timed simulation.
struct StagingCopy {
  int src_region = -1;
  uint64_t src_off = 0;
  int dst_region = -1;
  uint64_t dst_off = 0;
  uint64_t len = 0;
};

struct TaskDef {
  int id = 0;
  int iters = 1;
  int ld_region = -1;
  int st_region = -1;
  // staging applied before each iteration's enable / after its completion
  std::vector<std::vector<StagingCopy>> prestage;   // [iter] -> copies
  std::vector<std::vector<StagingCopy>> poststage;  // [iter] -> copies
};

struct Edge {
  int from = -1;
  int to = -1;
};

struct Diagnostic {
  std::string kind;  // e.g. TooManySuccessors, CycleDetected
  std::string message;
};

struct UnboundParameter : std::runtime_error {
  explicit UnboundParameter(const std::string& m) : std::runtime_error(m) {}
};
struct TypeMismatch : std::runtime_error {
  explicit TypeMismatch(const std::string& m) : std::runtime_error(m) {}
};
struct GraphParseError : std::runtime_error {
  explicit GraphParseError(const std::string& m) : std::runtime_error(m) {}
};

struct ExecutionGraph {
  int simd = 8;  // geometry the graph was generated for
  std::vector<ExeBlockClass> classes;
  std::vector<ExeBlockInstance> instances;
  std::vector<Edge> edges;
  std::vector<TaskDef> tasks;      // application order
  std::vector<Region> regions;

  int class_index(const std::string& n) const;
  int instance_index(const std::string& n) const;
  int region_index(const std::string& n) const;
  int task_index(int id) const;

  std::vector<int> successors_of(int inst) const;
  int predecessor_count(int inst) const;
};

// Substitute an instance's bindings into its class body.
BoundBody instantiate(const ExecutionGraph& g, int inst_idx);

std::vector<Diagnostic> validate_graph(const ExecutionGraph& g);

struct StaticCounts {
  uint64_t ld = 0, cal = 0, copy = 0, st = 0;
  uint64_t blocks = 0;
  uint64_t opm_entries = 0;  // distinct (lpe, logical address) pairs
};
StaticCounts graph_static_counts(const ExecutionGraph& g);

// Line-oriented text format (sections: regions, classes, instances, edges,
// tasks, staging records; '#' comments; include "file" supported).
ExecutionGraph parse_graph(const std::string& text,
                           const std::string& include_dir = "");
ExecutionGraph load_graph_file(const std::string& path);
std::string serialize_graph(const ExecutionGraph& g);

}  // namespace rnn
