#include "rnn/noc.hpp"

#include <array>
#include <cassert>
#include <cmath>

namespace rnn {

void Mesh::init(int w, int h, int net_id, Counters* counters, int queue_depth) {
  w_ = w;
  h_ = h;
  net_ = net_id;
  counters_ = counters;
  depth_ = queue_depth;
  links_.assign(size_t(w * h), {});
}

int Mesh::out_dir(int x, int y, const MeshAddr& dst) const {
  if (dst.x > x) return 0;  // E
  if (dst.x < x) return 1;  // W
  if (dst.y > y) return 2;  // N (toward larger y)
  if (dst.y < y) return 3;  // S
  return 4;                 // local
}

bool Mesh::inject(Message&& m, uint64_t now) {
  int r = router(m.src.x, m.src.y);
  int dir = out_dir(m.src.x, m.src.y, m.dst);
  Link& l = links_[size_t(r)][size_t(dir)];
  if (int(l.q.size()) >= depth_) return false;
  if (counters_) {
    counters_->flits_injected[net_] += uint64_t(m.flits);
  }
  l.q.push_back({std::move(m), now + 1});
  return true;
}

void Mesh::step(uint64_t now, const Deliver& deliver) {
  // Each link transmits one flit per cycle; a message holds the link for
  // `flits` cycles, then hops to the next router (or delivers locally).
  for (int y = 0; y < h_; ++y) {
    for (int x = 0; x < w_; ++x) {
      int r = router(x, y);
      for (int dir = 0; dir < 5; ++dir) {
        Link& l = links_[size_t(r)][size_t(dir)];
        if (l.q.empty()) continue;
        Pending& p = l.q.front();
        if (p.ready > now) continue;
        if (l.busy_until == 0) l.busy_until = now + uint64_t(p.msg.flits);
        if (l.busy_until > now + 1) {
          l.busy_until -= 0;  // keep transmitting
        }
        if (now + 1 < l.busy_until) continue;  // still sending flits
        // transmission finishes this cycle
        if (counters_) counters_->flit_hops[net_] += uint64_t(p.msg.flits);
        if (dir == 4) {
          if (counters_) counters_->flits_delivered[net_] += uint64_t(p.msg.flits);
          Message m = std::move(p.msg);
          l.q.pop_front();
          l.busy_until = 0;
          deliver(std::move(m));
        } else {
          int nx = x + (dir == 0 ? 1 : dir == 1 ? -1 : 0);
          int ny = y + (dir == 2 ? 1 : dir == 3 ? -1 : 0);
          int nr = router(nx, ny);
          int ndir = out_dir(nx, ny, p.msg.dst);
          Link& nl = links_[size_t(nr)][size_t(ndir)];
          if (int(nl.q.size()) >= depth_) continue;  // backpressure: retry
          Pending moved{std::move(p.msg), now + 2};
          l.q.pop_front();
          l.busy_until = 0;
          nl.q.push_back(std::move(moved));
        }
      }
    }
  }
}

bool Mesh::idle() const {
  for (const auto& r : links_)
    for (const auto& l : r)
      if (!l.q.empty()) return false;
  return true;
}

void CtrlTree::init(int num_pes, Counters* counters) {
  num_pes_ = num_pes;
  counters_ = counters;
  depth_ = 0;
  while ((1 << depth_) < num_pes) ++depth_;
  root_q_.clear();
  down_.clear();
  up_.clear();
}

void CtrlTree::send_down(Message&& m, int dst_pe, uint64_t now) {
  (void)now;
  root_q_.push_back({std::move(m), 0, dst_pe});
}

void CtrlTree::broadcast(Message&& m, uint64_t now) {
  (void)now;
  root_q_.push_back({std::move(m), 0, -1});
}

void CtrlTree::send_up(Message&& m, uint64_t now) {
  if (counters_) {
    counters_->ctrl_msgs++;
    counters_->flits_injected[NET_CTRL]++;
    counters_->flit_hops[NET_CTRL] += uint64_t(depth_ + 1);
  }
  up_.push_back({std::move(m), now + uint64_t(depth_) + 1, -2});
}

void CtrlTree::step(uint64_t now, const DeliverToPe& down, const DeliverToRoot& up) {
  // root injects one message per cycle
  if (!root_q_.empty()) {
    InFlight f = std::move(root_q_.front());
    root_q_.pop_front();
    bool bcast = f.dst_pe < 0;
    f.due = now + (bcast ? uint64_t(2 * depth_) : uint64_t(depth_ + 1));
    if (counters_) {
      counters_->ctrl_msgs++;
      counters_->flits_injected[NET_CTRL]++;
      counters_->flit_hops[NET_CTRL] +=
          bcast ? uint64_t(num_pes_) : uint64_t(depth_ + 1);
    }
    down_.push_back(std::move(f));
  }
  while (!down_.empty() && down_.front().due <= now) {
    InFlight f = std::move(down_.front());
    down_.pop_front();
    if (f.dst_pe < 0) {
      for (int pe = 0; pe < num_pes_; ++pe) {
        Message copy = f.msg;
        if (counters_) counters_->flits_delivered[NET_CTRL]++;
        down(pe, std::move(copy));
      }
    } else {
      if (counters_) counters_->flits_delivered[NET_CTRL]++;
      down(f.dst_pe, std::move(f.msg));
    }
  }
  while (!up_.empty() && up_.front().due <= now) {
    InFlight f = std::move(up_.front());
    up_.pop_front();
    if (counters_) counters_->flits_delivered[NET_CTRL]++;
    up(std::move(f.msg));
  }
}

bool CtrlTree::idle() const {
  return root_q_.empty() && down_.empty() && up_.empty();
}

}  // namespace rnn
