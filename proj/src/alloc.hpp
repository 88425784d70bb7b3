#pragma once

#include <string>
#include <vector>

#include "lock.hpp"

namespace rme {

// Spin-slot provider for a ported lock. Each step_* call performs at most
// one charged memory operation and returns true once the sub-procedure is
// finished. Durable progress lives in shared words owned by the backend;
// s0/s1 are caller-provided volatile registers (lost on crash), so a
// crashed call simply resumes from its last persisted point when
// re-invoked. step_reset_get arms GetIndex for the next super-passage and
// runs near the end of Exit; step_reset_retire arms Retire and runs in
// Try before GO is published.
class SlotAllocator {
 public:
  virtual ~SlotAllocator() = default;

  virtual bool step_get(int port, Ctx& ctx, int64_t& s0, int64_t& s1,
                        int64_t* out_slot) = 0;
  virtual bool step_retire(int port, int64_t slot, Ctx& ctx, int64_t& s0,
                           int64_t& s1) = 0;
  virtual bool step_reset_get(int port, Ctx& ctx) = 0;
  virtual bool step_reset_retire(int port, Ctx& ctx) = 0;

  // True for backends that bound the slot pool and need the announce /
  // validate protocol in Promote.
  virtual bool reclaiming() const { return false; }
  // Address of the announcement word for the given port (-1 if none).
  virtual int referenced_addr(int port) const { return -1; }
};

// Unbounded backend: every super-passage gets a brand-new slot word, so
// no reference can ever be dangling. Used as the ground-truth allocator
// when checking the lock logic in isolation.
class FreshAllocator : public SlotAllocator {
 public:
  FreshAllocator(Memory& mem, std::string label, int ports, int width_bits);

  bool step_get(int port, Ctx& ctx, int64_t& s0, int64_t& s1,
                int64_t* out_slot) override;
  bool step_retire(int port, int64_t slot, Ctx& ctx, int64_t& s0,
                   int64_t& s1) override;
  bool step_reset_get(int port, Ctx& ctx) override;
  bool step_reset_retire(int port, Ctx& ctx) override;

 private:
  Memory& mem_;
  std::string label_;
  int width_bits_;
  std::vector<int> pcg_;  // per port: (done, slot, 0)
  int serial_ = 0;
};

}  // namespace rme
