#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tree.hpp"
#include "wport.hpp"

namespace rme {

enum AdaptPath : int64_t { PATH_FAST = 1, PATH_SLOW = 2 };
// Side values double as two_rme port numbers.
enum AdaptSide : int64_t { SIDE_RIGHT = 0, SIDE_LEFT = 1 };

struct AdaptConfig {
  int nprocs = 2;     // N; process id doubles as the lock's port
  int ports = 2;      // B, fast-path capture slots
  int word_bits = 8;  // W for the embedded ported locks (B <= W)
  std::vector<int> proc_home;
};

/// Adaptive transformation: scan K_OWNERS[0..B) with CAS to capture a
// fast-path port; processes that fail all B slots take the slow path
// (a tournament tree). Fast and slow winners arbitrate through a 2-port
// lock. The scan position (CURR_K), chosen path and arbiter side are
// persisted so a crashed process replays the same route, and the port is
// released only after the fast-path lock's Exit completes, guarded by an
// ownership re-check so a crash-resumed Exit never clears a slot another
// process has since captured.
class AdaptLock : public Lock {
 public:
  AdaptLock(Memory& mem, std::string label, AdaptConfig cfg);

  bool step(Frame& f, Ctx& ctx) override;
  std::string name() const override { return label_; }

  WportLock* fast() { return fast_.get(); }
  TreeLock* slow() { return slow_.get(); }
  WportLock* two_rme() { return two_.get(); }
  int owners_addr(int k) const { return k_owners_[k]; }
  int curr_k_addr(int pid) const { return curr_k_[pid]; }
  int path_addr(int pid) const { return path_[pid]; }
  int side_addr(int pid) const { return side_[pid]; }
  int status_addr(int pid) const { return status_[pid]; }

 private:
  bool step_recover(Frame& f, Ctx& ctx);
  bool step_try(Frame& f, Ctx& ctx);
  bool step_exit(Frame& f, Ctx& ctx);

  Memory& mem_;
  std::string label_;
  AdaptConfig cfg_;
  std::unique_ptr<FreshAllocator> fast_alloc_, two_alloc_;
  std::unique_ptr<WportLock> fast_, two_;
  std::unique_ptr<TreeLock> slow_;
  std::vector<int> k_owners_;
  std::vector<int> curr_k_, path_, side_, status_;
};

}  // namespace rme
