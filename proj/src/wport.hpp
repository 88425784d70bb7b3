#pragma once

#include <string>
#include <vector>

#include "alloc.hpp"
#include "lock.hpp"

namespace rme {

// STATUS[k] values.
enum PortStatus : int64_t { PS_TRY = 0, PS_ABORT = 1, PS_CS = 2, PS_EXIT = 3 };

struct WportConfig {
  int ports = 2;            // D
  int word_bits = 8;        // W (D <= W <= 62)
  bool faulty = false;      // single-Promote exit + abort CAS variant
  // DSM home for per-port words (GO/STATUS); empty = interconnect-global.
  std::vector<int> port_home;
};

// Ported abortable mutual-exclusion lock built around a FAA-maintained
// waiting-room bitmask and a (taken, owner, owner_go) hand-off word.
// The `faulty` flag selects a variant whose Exit promotes only after
// releasing and whose abort flow CASes LOCK_STATUS to (0, self, GO[self]);
// it is safe but can starve a waiting process under repeated aborts.
class WportLock : public Lock {
 public:
  WportLock(Memory& mem, std::string label, WportConfig cfg, SlotAllocator* alloc);

  bool step(Frame& f, Ctx& ctx) override;
  std::string name() const override { return label_; }

  int ports() const { return cfg_.ports; }
  int word_bits() const { return cfg_.word_bits; }

  // Cyclic scan for the next set bit of `mask` strictly after `owner`,
  // wrapping modulo word_bits and visiting `owner` itself last.
  // Returns kNil when mask is 0.
  int64_t next_waiting(int64_t owner, int64_t mask) const;

  // Position predicates on a frame of this lock, for scripted adversaries
  // ("run p until it is about to CAS LOCK_STATUS in Promote") and tests.
  static bool at_spin(const Frame& f);
  static bool at_promote_cas(const Frame& f);

  // Addresses, exposed for invariant monitors and counterexample rendering.
  int active_addr() const { return active_; }
  int lock_status_addr() const { return ls_; }
  int go_addr(int k) const { return go_[k]; }
  int status_addr(int k) const { return status_[k]; }

 private:
  bool step_recover(Frame& f, Ctx& ctx);
  bool step_try(Frame& f, Ctx& ctx);
  bool step_exit(Frame& f, Ctx& ctx);
  bool step_promote(Frame& f, Ctx& ctx);
  void promote_start(Frame& f, int64_t j, int cont);

  Memory& mem_;
  std::string label_;
  WportConfig cfg_;
  SlotAllocator* alloc_;
  int active_ = -1;
  int ls_ = -1;
  std::vector<int> go_;
  std::vector<int> status_;
};

}  // namespace rme
