#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "alloc.hpp"

namespace rme {

// Bounded slot backend: each port owns a static pool of 2D+1 spin words.
// GetIndex pops from the port's FREE ring; Retire lazily verifies that no
// announced reference to a slot remains before recycling it, by scanning
// one announcement per retirement and keeping pending reference-count
// updates in two D-sized rings (RETIRED for the initial count, OBSERVED
// for increments), undoing each update after D further scans.
//
// All bookkeeping lives in shared words; both procedures persist a
// (pc, a, b) word after every operation, so a crashed call resumes at the
// interrupted point and every re-executed write is idempotent.
class PoolAllocator : public SlotAllocator {
 public:
  PoolAllocator(Memory& mem, std::string label, int ports, int width_bits,
                std::vector<int> port_home = {});

  bool step_get(int port, Ctx& ctx, int64_t& s0, int64_t& s1,
                int64_t* out_slot) override;
  bool step_retire(int port, int64_t slot, Ctx& ctx, int64_t& s0,
                   int64_t& s1) override;
  bool step_reset_get(int port, Ctx& ctx) override;
  bool step_reset_retire(int port, Ctx& ctx) override;

  bool reclaiming() const override { return true; }
  int referenced_addr(int port) const override { return referenced_[port]; }

  // Inspection hooks for tests and ground-truth monitors.
  int ports() const { return static_cast<int>(pool_.size()); }
  int capacity() const { return cap_; }
  int free_count(int port) const;
  const std::vector<int>& slots(int port) const { return pool_[port].slot; }
  // Port owning the given spin-word address, or -1.
  int slot_port(int64_t addr) const;
  int refcnt_addr(int64_t slot) const { return slot_meta_.at(slot).refcnt; }
  int pcg_addr(int port) const { return pool_[port].pcg; }
  // Slot a completed GetIndex on this port is handing out, or kNil when
  // the procedure is not at its done stage.
  int64_t get_done_slot(int port) const;

 private:
  struct Port {
    int pcg, pcr;
    int f_head, f_tail, r_head, r_tail, o_head, o_tail, scan;
    std::vector<int> f_buf, r_buf, o_buf;
    std::vector<int> slot;    // spin word addresses
    std::vector<int> refcnt;  // parallel reference-count words
  };
  struct SlotMeta {
    int port;
    int refcnt;
  };

  int64_t filter(int port, int64_t addr) const;  // keep only own-pool slots

  Memory& mem_;
  std::string label_;
  int D_;
  int cap_;  // 2D+1
  std::vector<Port> pool_;
  std::vector<int> referenced_;  // announcement word per announcing port
  std::unordered_map<int64_t, SlotMeta> slot_meta_;
};

}  // namespace rme
