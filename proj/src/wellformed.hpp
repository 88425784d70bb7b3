#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "events.hpp"

namespace rme {

struct WfViolation {
  std::string property;
  std::string what;
  size_t event_index = 0;
};

struct WfVerdict {
  bool ok = true;
  std::vector<WfViolation> violations;
};

// Streaming checker for the six well-formedness properties, per lock
// instance and process: (1) the first step of a lock after a crash is
// Recover; (2) Try runs at most once per super-passage unless a crash
// interrupted it; (3) the CS is entered only after Try returned TRUE or a
// crash in the CS; (4) a non-abort Exit runs only from the CS or after a
// crash in Exit; (5) a process uses one port per super-passage; (6) no two
// processes are in super-passages on the same port at once. Abort-flow
// Exit subroutines (events flagged aborted) belong to the Try section.
// Copyable, so exploration snapshots it alongside the machine state.
class WfStream {
 public:
  // Returns the first violation triggered by this event, if any.
  std::optional<WfViolation> feed(const Event& e, size_t index = 0);
  uint64_t hash() const;

 private:
  enum CrashedIn : uint8_t { CI_NONE, CI_TRY, CI_CS, CI_EXIT };
  struct LpState {
    bool open = false;
    int port = -1;
    bool tried = false;    // Try invoked in this lock-super-passage
    bool in_try = false;   // Try method in progress (incl. abort-flow Exit)
    bool in_exit = false;  // non-abort Exit in progress
    bool holding = false;  // Try returned TRUE / Recover returned CS
    uint8_t crashed_in = CI_NONE;
    bool need_recover = false;
  };
  void close(const std::string& lock, int pid, LpState& lp);

  std::map<std::pair<std::string, int>, LpState> lps_;
  std::map<std::pair<std::string, int>, int> occupied_;  // (lock,port) -> pid
};

WfVerdict check_wellformed(const Trace& trace);

}  // namespace rme
