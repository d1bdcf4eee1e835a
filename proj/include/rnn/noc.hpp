#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "rnn/config.hpp"
#include "rnn/stats.hpp"

namespace rnn {

enum class MsgKind : uint8_t {
  MemReadReq,
  MemReadResp,
  MemWriteReq,
  MemWriteAck,
  FlowData,
  Activation,
  CtrlInit,
  CtrlSparse,
  CtrlTaskEnable,
  CtrlCompletion,
};

// Endpoint on a mesh: PEs sit at their own router's port 0; cache slices
// share edge routers on port 1.
struct MeshAddr {
  int16_t x = 0;
  int16_t y = 0;
  int8_t port = 0;
};

struct Message {
  MsgKind kind = MsgKind::MemReadReq;
  MeshAddr src, dst;
  uint64_t addr = 0;     // memory address / OPM flat address for FlowData
  uint32_t tag = 0;      // request tag: opm dest, unit id, slot, ...
  uint32_t aux = 0;      // secondary scalar (task id, byte count, frag index)
  uint64_t payload0 = 0; // control payload
  uint8_t lookup = 0;
  bool bypass_cache = false;
  std::vector<uint16_t> data;  // lane payload
  std::vector<uint8_t> bytes;  // raw byte payload (instruction DMA)
  int flits = 1;
};

// Dimension-order (X then Y) mesh with per-link FIFO queues, one flit per
// link per cycle and bounded queues for backpressure. Uncontended latency is
// 2 cycles per hop (link + router); self delivery takes 1 cycle.
class Mesh {
 public:
  using Deliver = std::function<void(Message&&)>;

  void init(int w, int h, int net_id, Counters* counters, int queue_depth = 8);
  // returns false when the source injection queue is full
  bool inject(Message&& m, uint64_t now);
  void step(uint64_t now, const Deliver& deliver);
  bool idle() const;

 private:
  struct Pending {
    Message msg;
    uint64_t ready = 0;  // earliest cycle transmission may start
  };
  struct Link {
    std::deque<Pending> q;
    uint64_t busy_until = 0;
  };
  // links[router][dir]: 0=E 1=W 2=N 3=S 4=local
  std::vector<std::array<Link, 5>> links_;
  int w_ = 0, h_ = 0, net_ = 0, depth_ = 8;
  Counters* counters_ = nullptr;

  int router(int x, int y) const { return y * w_ + x; }
  int out_dir(int x, int y, const MeshAddr& dst) const;
};

// Tree control network between the control interface (root) and the PEs.
// Unicast latency depth+1; broadcast reaches every PE in 2*depth cycles,
// depth = ceil(log2(#PEs)). Root injects one message per cycle.
class CtrlTree {
 public:
  using DeliverToPe = std::function<void(int pe, Message&&)>;
  using DeliverToRoot = std::function<void(Message&&)>;

  void init(int num_pes, Counters* counters);
  void send_down(Message&& m, int dst_pe, uint64_t now);  // queued at root
  void broadcast(Message&& m, uint64_t now);
  void send_up(Message&& m, uint64_t now);                // from a PE
  void step(uint64_t now, const DeliverToPe& down, const DeliverToRoot& up);
  bool idle() const;
  int depth() const { return depth_; }

 private:
  struct InFlight {
    Message msg;
    uint64_t due = 0;
    int dst_pe = -1;  // -1 = broadcast
  };
  std::deque<InFlight> root_q_;   // waiting for the root injector
  std::deque<InFlight> down_;     // in flight downward
  std::deque<InFlight> up_;       // in flight upward
  int num_pes_ = 0, depth_ = 0;
  Counters* counters_ = nullptr;
};

}  // namespace rnn
