#include "scenario.hpp"

#include <deque>
#include <functional>

#include "kernel.hpp"
#include "wport.hpp"

namespace rme {
namespace {

constexpr int kVictim = 1;

struct CsWatch : DriverObserver {
  bool victim_in_cs = false;
  int64_t victim_cs_at = -1;
  bool violated = false;
  Driver* drv = nullptr;

  void on_cs_enter(int pid) override {
    if (pid == kVictim) {
      victim_in_cs = true;
      if (victim_cs_at < 0 && drv) victim_cs_at = drv->step_no();
    }
  }
  void on_violation(const std::string&, const std::string&) override {
    violated = true;
  }
};

const Frame* deepest(const Driver& d, int pid) {
  const Frame* f = d.proc(pid).frame.get();
  while (f && f->child) f = f->child.get();
  return f;
}

}  // namespace

nlohmann::json StarvationResult::to_json() const {
  return {{"faulty", faulty},
          {"rounds_requested", rounds_requested},
          {"rounds_completed", rounds_completed},
          {"victim_entered_cs", victim_entered_cs},
          {"fell_back_to_fair", fell_back_to_fair},
          {"me_violation", me_violation},
          {"steps_total", steps_total},
          {"victim_steps", victim_steps},
          {"steps_until_victim_cs", steps_until_victim_cs},
          {"round_aborter", round_aborter}};
}

StarvationResult starvation_scenario(bool faulty, int rounds,
                                     int64_t guard_cap) {
  StarvationResult res;
  res.faulty = faulty;
  res.rounds_requested = rounds;

  const int n = 4;
  Memory mem(n);
  FreshAllocator alloc(mem, "L", n, 64);
  WportConfig cfg;
  cfg.ports = n;
  cfg.word_bits = 8;
  cfg.faulty = faulty;
  WportLock lock(mem, "L", cfg, &alloc);

  std::vector<int> port_of(n);
  for (int i = 0; i < n; ++i) port_of[i] = i;
  Driver drv(mem, &lock, port_of);
  CsWatch watch;
  watch.drv = &drv;
  drv.set_observer(&watch);

  // Runs pid until pred holds (checked before each step) or the guard
  // budget is blown or the process goes idle with pred still false.
  auto run_until = [&](int pid, const std::function<bool()>& pred) {
    for (int64_t i = 0; i < guard_cap; ++i) {
      if (pred()) return true;
      if (drv.proc(pid).phase == Phase::Idle) return false;
      drv.step(pid);
      ++res.steps_total;
    }
    return false;
  };
  auto at_promote_cas = [&](int pid) {
    const Frame* f = deepest(drv, pid);
    return f && WportLock::at_promote_cas(*f);
  };
  auto at_spin = [&](int pid) {
    const Frame* f = deepest(drv, pid);
    return f && WportLock::at_spin(*f);
  };
  auto ls_released_to = [&](int owner) {
    Value v = mem.peek(lock.lock_status_addr());
    return v.f[0] == 0 && v.f[1] == owner;
  };
  auto idle = [&](int pid) { return drv.proc(pid).phase == Phase::Idle; };
  auto in_cs = [&](int pid) { return drv.proc(pid).phase == Phase::Cs; };

  // Fair fallback: round-robin every live process until the victim enters
  // the CS (bounded). Used when a guard fails, i.e. the lock did not admit
  // the scripted position.
  auto fair_fallback = [&]() {
    res.fell_back_to_fair = true;
    int64_t cap = 100000;
    while (!watch.victim_in_cs && cap-- > 0) {
      for (int p = 0; p < n; ++p) {
        if (drv.proc(p).phase == Phase::Idle) continue;
        drv.step(p);
        ++res.steps_total;
        if (p == kVictim) ++res.victim_steps;
      }
    }
  };
  auto finish = [&]() {
    res.victim_entered_cs = watch.victim_in_cs;
    res.me_violation = watch.violated;
    if (watch.victim_cs_at >= 0) res.steps_until_victim_cs = watch.victim_cs_at;
    return res;
  };

  // --- Setup -----------------------------------------------------------
  // Process 0 takes the lock; 1 (victim), 2 and 3 join the waiting room.
  drv.arrive(0);
  if (!run_until(0, [&] { return in_cs(0); })) {
    fair_fallback();
    return finish();
  }
  for (int q : {1, 2, 3}) {
    drv.arrive(q);
    if (!run_until(q, [&] { return at_spin(q); })) {
      fair_fallback();
      return finish();
    }
  }
  // 0 leaves the CS; with the faulty exit its single Promote runs after
  // the release, so it parks right before the hand-off CAS.
  if (!run_until(0, [&] { return at_promote_cas(0); })) {
    fair_fallback();
    return finish();
  }
  // 2 aborts; its abort CAS reclaims the released status word, which
  // invalidates 0's pending Promote. 2 then parks before its own Promote.
  drv.signal_abort(2);
  if (!run_until(2, [&] { return ls_released_to(2); }) ||
      !run_until(2, [&] { return at_promote_cas(2); })) {
    fair_fallback();
    return finish();
  }
  // 0's Promote CAS fails, it finishes its exit, re-arrives and parks
  // before the Promote at the end of its fresh Try.
  if (!run_until(0, [&] { return idle(0); })) {
    fair_fallback();
    return finish();
  }
  drv.arrive(0);
  if (!run_until(0, [&] { return at_promote_cas(0); })) {
    fair_fallback();
    return finish();
  }

  int pending_try = 0;   // parked before a Try-side Promote CAS
  int pending_exit = 2;  // parked before an Exit-side Promote CAS
  std::deque<int> waiters = {3};

  // --- Rounds ----------------------------------------------------------
  for (int r = 0; r < rounds; ++r) {
    int b = waiters.front();
    waiters.pop_front();
    // The longest-waiting non-victim process aborts; its CAS moves the
    // status word and dooms both parked Promotes.
    drv.signal_abort(b);
    if (!run_until(b, [&] { return ls_released_to(b); }) ||
        !run_until(b, [&] { return at_promote_cas(b); })) {
      fair_fallback();
      return finish();
    }
    // The parked Try-side Promote fails and falls into the spin loop.
    if (!run_until(pending_try, [&] { return at_spin(pending_try); })) {
      fair_fallback();
      return finish();
    }
    waiters.push_back(pending_try);
    // The parked Exit-side Promote fails, the exit completes, and the
    // process immediately starts a new passage, parking again.
    int e = pending_exit;
    if (!run_until(e, [&] { return idle(e); })) {
      fair_fallback();
      return finish();
    }
    drv.arrive(e);
    if (!run_until(e, [&] { return at_promote_cas(e); })) {
      fair_fallback();
      return finish();
    }
    pending_try = e;
    pending_exit = b;
    res.round_aborter.push_back(b);

    // The victim keeps taking steps but its go flag is never set.
    for (int i = 0; i < 3; ++i) {
      drv.step(kVictim);
      ++res.steps_total;
      ++res.victim_steps;
    }
    ++res.rounds_completed;
    if (watch.victim_in_cs) break;
  }
  return finish();
}

}  // namespace rme
