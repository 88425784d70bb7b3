#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "events.hpp"
#include "lock.hpp"

namespace rme {

enum class Phase : uint8_t { Idle, Recover, Try, Cs, Exit };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Idle: return "IDLE";
    case Phase::Recover: return "RECOVER";
    case Phase::Try: return "TRY";
    case Phase::Cs: return "CS";
    case Phase::Exit: return "EXIT";
  }
  return "?";
}

struct ProcState {
  Phase phase = Phase::Idle;
  std::unique_ptr<Frame> frame;  // null while Idle or in the CS
  bool abort_signalled = false;

  // What the next completed Recover must report: the section the last
  // crash interrupted (Try at super-passage start; unchanged by a crash
  // that lands inside Recover itself).
  Section expect_recover = Section::Try;
  // Crash-in-CS happened and this process has not re-entered the CS yet.
  bool cs_reentry_owed = false;

  // Ledger.
  int64_t sp_id = -1;
  int64_t passage_id = -1;
  int crashes_in_sp = 0;  // F
  int64_t rmr_cc_passage = 0, rmr_dsm_passage = 0;
  int64_t rmr_cc_sp = 0, rmr_dsm_sp = 0;
  int sp_completed = 0;
  int64_t steps_in_sp = 0;
  int64_t steps_in_section = 0;
  int64_t steps_since_abort = -1;  // own crash-free steps since the signal
  // Number of crashes this super-passage had when the current passage
  // started (used to classify a completed passage as crash-free).

  ProcState() = default;
  ProcState(const ProcState& o) { *this = o; }
  ProcState& operator=(const ProcState& o);
  ProcState(ProcState&&) = default;
  ProcState& operator=(ProcState&&) = default;
};

// Observer of semantic milestones; explorers/monitors subscribe here
// rather than re-parsing the trace.
struct DriverObserver {
  virtual ~DriverObserver() = default;
  virtual void on_violation(const std::string& prop, const std::string& what) {}
  virtual void on_recover_done(int pid, int ret, Section expected) {}
  virtual void on_passage_end(int pid, int64_t cc, int64_t dsm,
                              bool ended_by_crash) {}
  virtual void on_sp_end(int pid, int crashes, int64_t cc, int64_t dsm,
                         bool aborted, int64_t steps) {}
  virtual void on_cs_enter(int pid) {}
  virtual void on_event(const Event& e) {}
};

// Drives processes through the Recover -> Try -> [CS] -> Exit protocol,
// one adversary-chosen action at a time. The driver is the only mutator
// of simulated memory; it owns abort flags, crash resets, the event
// stream, and the RMR ledger.
class Driver {
 public:
  Driver(Memory& mem, Lock* lock, std::vector<int> port_of);
  ~Driver();

  void arrive(int pid);
  void step(int pid);
  void crash(int pid);
  void signal_abort(int pid);
  void apply(const Action& a);
  bool legal(const Action& a) const;

  int nprocs() const { return static_cast<int>(procs_.size()); }
  const ProcState& proc(int pid) const { return procs_[pid]; }
  int port_of(int pid) const { return port_of_[pid]; }
  Memory& mem() { return mem_; }
  Lock* lock() { return lock_; }
  int64_t step_no() const { return step_no_; }
  bool all_idle() const;
  int in_cs() const;  // pid currently in the CS, or -1

  void set_trace(Trace* t) { trace_ = t; }
  void set_observer(DriverObserver* o) { obs_ = o; }

  struct Snapshot {
    Memory::Snapshot mem;
    std::vector<ProcState> procs;
    int64_t step_no;
    int64_t next_sp;
    int64_t next_passage;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);
  // Digest of everything a safety verdict can depend on. Unbounded step
  // counters are deliberately excluded so spin self-loops converge.
  uint64_t digest() const;

 private:
  void emit(Event e);
  void emit_section(int pid, Event::Kind kind, Section s, const Frame* f,
                    int depth, int ret);
  void enter_cs(int pid);
  void start_exit(int pid);
  void end_sp(int pid, bool aborted);
  void finish_root(int pid, Frame& root);
  void on_memop(const MemOpRecord& r);

  Memory& mem_;
  Lock* lock_;
  std::vector<int> port_of_;
  std::vector<ProcState> procs_;
  int64_t step_no_ = 0;
  int64_t next_sp_ = 0;
  int64_t next_passage_ = 0;
  Trace* trace_ = nullptr;
  DriverObserver* obs_ = nullptr;
};

}  // namespace rme
