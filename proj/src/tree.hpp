#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wport.hpp"

namespace rme {

struct TreeConfig {
  int nprocs = 2;      // N; process id doubles as the lock's port
  int arity = 2;       // D, ports per node lock
  int word_bits = 8;   // W for the node locks
  // DSM home for per-process words (STATUS/current_node); empty = global.
  std::vector<int> proc_home;
};

// Tournament tree over ported node locks. Process pid is statically
// assigned to leaf `pid`; on the way up it uses, at each node, the port
// equal to the child index it climbed from. current_node[pid] records the
// highest node whose lock the process holds (ascent) or has yet to
// release (descent), so a crashed process resumes mid-path instead of
// restarting, and the descent skips node locks it already released
// (their Recover reports TRY).
class TreeLock : public Lock {
 public:
  TreeLock(Memory& mem, std::string label, TreeConfig cfg);

  bool step(Frame& f, Ctx& ctx) override;
  std::string name() const override { return label_; }

  int height() const { return height_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  WportLock* node(int id) { return nodes_[id].get(); }
  int status_addr(int pid) const { return status_[pid]; }
  int current_node_addr(int pid) const { return current_[pid]; }

  // Path geometry. Levels count from 0 (root) to height-1 (lowest lock
  // level, adjacent to the leaves).
  int node_at(int pid, int level) const;
  int port_at(int pid, int level) const;
  int level_of(int node_id) const { return level_of_[node_id]; }

 private:
  bool step_recover(Frame& f, Ctx& ctx);
  bool step_try(Frame& f, Ctx& ctx);
  bool step_exit(Frame& f, Ctx& ctx);
  void call_node(Frame& f, int node_id, Method m, int pid, bool abort_sub);

  Memory& mem_;
  std::string label_;
  TreeConfig cfg_;
  int height_ = 1;
  std::vector<std::unique_ptr<FreshAllocator>> allocs_;
  std::vector<std::unique_ptr<WportLock>> nodes_;
  std::vector<int> level_of_;
  std::vector<int> level_offset_;  // first node id of each level
  std::vector<int> status_;
  std::vector<int> current_;
  std::vector<int64_t> pow_;  // arity^i
};

}  // namespace rme
