#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kernel.hpp"
#include "wellformed.hpp"

namespace rme {

// Regression bounds; -1 disables a check. Asymptotic claims are checked
// as frozen-constant caps (measured once, then pinned in the manifest).
struct Bounds {
  int64_t passage_cc = -1, passage_dsm = -1;  // crash-free passage RMR caps
  int64_t sp_a = -1, sp_b = -1;      // super-passage RMRs <= a + b*F (cc)
  int64_t abort_steps = -1;          // own steps from signal to Try return
  int64_t sp_steps = -1;             // own steps per non-aborted super-passage
  int64_t adapt_c0 = -1, adapt_c1 = -1;  // passage RMRs <= c1*min(K,B) + c0
  int adapt_ports = 0;               // B for the adaptivity cap
  bool witness = false;   // K_OWNERS CAS-fail point-contention witness
};

struct ExploreConfig {
  int max_sps_per_proc = 1;
  int max_crashes = 0;  // total crash budget across processes
  int max_aborts = 0;   // total abort-signal budget
  int64_t max_steps = 1'000'000;   // actions per run / max DFS path length
  uint64_t max_states = 50'000'000;
  uint64_t seed = 1;
  Bounds bounds;
  bool check_wf = true;
  // Extra invariant evaluated on quiescent terminal states (all idle,
  // arrivals exhausted); returns an empty string when clean.
  std::function<std::string(Memory&)> terminal_check;
  // Randomized-run action weights.
  int w_step = 100, w_arrive = 10, w_crash = 2, w_abort = 2;
  bool drain_at_end = true;  // randomized run: fair drain + terminal check
};

struct Failure {
  std::string property;
  std::string what;
  std::vector<Action> actions;  // replayable adversary decision list
};

struct Report {
  bool ok = true;
  bool exhaustive = false;
  std::vector<Failure> failures;
  uint64_t states = 0, dedup_hits = 0;
  int64_t actions = 0;
  int64_t sps_completed = 0;
  // Crash-free passage maxima.
  int64_t max_passage_cc = 0, max_passage_dsm = 0;
  // Super-passage maxima keyed by crash count F.
  std::map<int, int64_t> max_sp_cc_by_f, max_sp_dsm_by_f;
  // Adaptivity curve: crash-free passage maxima keyed by measured K.
  std::map<int, int64_t> max_passage_cc_by_k;
  int max_k = 0;

  void merge_failure(Failure f);
  nlohmann::json to_json() const;
};

// Bounded exhaustive DFS over all adversary decisions (schedule, arrival,
// crash and abort injection) with digest-based visited-state pruning.
Report explore(Driver& d, const ExploreConfig& cfg);

// One long pseudo-random schedule; deterministic per seed.
Report random_run(Driver& d, const ExploreConfig& cfg, Trace* trace = nullptr);

// Round-robin fair schedule from the current state: arrives every process
// up to the super-passage budget, then steps all non-idle processes until
// quiescence. Fails bounded-liveness if quiescence needs > max_steps.
Report fair_run(Driver& d, const ExploreConfig& cfg, Trace* trace = nullptr);

// Re-applies a recorded decision list under the full monitor set.
Report replay(Driver& d, const std::vector<Action>& actions,
              const ExploreConfig& cfg, Trace* trace = nullptr);

// Trace-level property evaluation (well-formedness over every sub-lock
// projection) for externally produced traces.
WfVerdict check_properties(const Trace& t);

}  // namespace rme
