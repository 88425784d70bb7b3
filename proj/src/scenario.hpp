#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace rme {

// Outcome of the scripted starvation adversary against a 4-port lock.
//
// The script parks one process ("victim") in the waiting room and then
// drives rounds in which the remaining processes abort, re-enter and hand
// the lock status among themselves. Against the variant whose Exit
// promotes only after releasing, every Promote CAS that would wake the
// victim is invalidated by the next abort's CAS, so the victim spins
// forever while everyone else makes progress. Against the correct lock
// the script's step guards cannot be satisfied (the pre-release Promote
// closes the window), the adversary gives up, and a fair fallback
// schedule lets the victim through.
struct StarvationResult {
  bool faulty = false;
  int rounds_requested = 0;
  int rounds_completed = 0;
  bool victim_entered_cs = false;
  bool fell_back_to_fair = false;
  bool me_violation = false;       // two processes in the CS at once
  int64_t steps_total = 0;         // all driver steps taken
  int64_t victim_steps = 0;        // steps granted to the victim
  int64_t steps_until_victim_cs = -1;  // total steps at victim's CS entry
  std::vector<int> round_aborter;  // which process aborted in each round

  nlohmann::json to_json() const;
};

// Runs the adversary for `rounds` rounds against the faulty or correct
// 4-port lock (D=4, W=8, N=4, fresh slots). `guard_cap` bounds each
// "run process p until it reaches position X" phase; a blown guard means
// the lock refused to enter the scripted position and triggers the fair
// fallback.
StarvationResult starvation_scenario(bool faulty, int rounds,
                                     int64_t guard_cap = 400);

}  // namespace rme
