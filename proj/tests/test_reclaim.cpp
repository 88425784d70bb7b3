#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <vector>

#include "checker.hpp"
#include "config.hpp"
#include "kernel.hpp"
#include "reclaim.hpp"
#include "wport.hpp"

using namespace rme;

namespace {

// Drives one allocator sub-procedure to completion, as the lock would:
// volatile registers start at zero and the procedure is stepped until it
// reports done. Returns the number of steps taken.
template <class StepFn>
int drive(StepFn&& step, int cap = 400) {
  int64_t s0 = 0, s1 = 0;
  for (int i = 0; i < cap; ++i)
    if (step(s0, s1)) return i + 1;
  FAIL("allocator sub-procedure did not finish");
  return -1;
}

int64_t drive_get(PoolAllocator& a, int port, Ctx& ctx, int cap = 400) {
  int64_t slot = kNil;
  drive([&](int64_t& s0, int64_t& s1) { return a.step_get(port, ctx, s0, s1, &slot); },
        cap);
  return slot;
}

void drive_retire(PoolAllocator& a, int port, int64_t slot, Ctx& ctx) {
  drive([&](int64_t& s0, int64_t& s1) { return a.step_retire(port, slot, ctx, s0, s1); });
}

uint64_t persistent_hash(const Memory& mem) {
  uint64_t h = 0;
  mem.hash_into(h, /*with_caches=*/false);
  return h;
}

}  // namespace

TEST_CASE("solo get/retire cycles recycle every slot within D retirements") {
  const int D = 3;
  Memory mem(1);
  PoolAllocator pool(mem, "P", D, 64);
  Ctx ctx{mem, 0};
  const int cap = 2 * D + 1;
  CHECK(pool.capacity() == cap);
  CHECK(pool.free_count(0) == cap);

  std::vector<int64_t> handed;
  for (int cycle = 0; cycle < 4 * cap; ++cycle) {
    // FREE nonempty at every super-passage start.
    REQUIRE(pool.free_count(0) >= 1);
    int before = pool.free_count(0);
    int64_t slot = drive_get(pool, 0, ctx);
    CHECK(pool.slot_port(slot) == 0);
    CHECK(pool.free_count(0) == before - 1);
    // The pool never hands out a slot it has not yet reclaimed.
    for (size_t i = handed.size(); i-- > 0 && handed.size() - i <= 1;)
      CHECK(handed[i] != slot);
    handed.push_back(slot);

    drive([&](int64_t&, int64_t&) { return pool.step_reset_retire(0, ctx); });
    int64_t scan_before = mem.peek(pool.pcg_addr(0)).f[0];  // pc word exists
    (void)scan_before;
    drive_retire(pool, 0, slot, ctx);
    drive([&](int64_t&, int64_t&) { return pool.step_reset_get(0, ctx); });
  }
  // A slot retired with no observers must return to FREE after at most D
  // subsequent retirements: over 4*cap solo cycles every slot keeps
  // circulating, so all cap slots were eventually handed out.
  std::set<int64_t> distinct(handed.begin(), handed.end());
  CHECK(distinct.size() == static_cast<size_t>(cap));
}

TEST_CASE("a slot retired with no references is freed after <= D retires") {
  const int D = 2;
  Memory mem(1);
  PoolAllocator pool(mem, "P", D, 64);
  Ctx ctx{mem, 0};

  int64_t first = drive_get(pool, 0, ctx);
  drive([&](int64_t&, int64_t&) { return pool.step_reset_retire(0, ctx); });
  drive_retire(pool, 0, first, ctx);
  drive([&](int64_t&, int64_t&) { return pool.step_reset_get(0, ctx); });

  // Drive D more full cycles; by the end, `first` must have been freed
  // (refcount back to zero) and eventually be handed out again.
  std::set<int64_t> seen;
  for (int i = 0; i < 2 * pool.capacity(); ++i) {
    int64_t s = drive_get(pool, 0, ctx);
    seen.insert(s);
    drive([&](int64_t&, int64_t&) { return pool.step_reset_retire(0, ctx); });
    drive_retire(pool, 0, s, ctx);
    drive([&](int64_t&, int64_t&) { return pool.step_reset_get(0, ctx); });
  }
  CHECK(seen.count(first) == 1);
  CHECK(mem.peek(pool.refcnt_addr(first)).s() >= 0);
}

TEST_CASE("every crash point inside GetIndex resumes to the same outcome") {
  const int D = 2;
  Memory mem(1);
  PoolAllocator pool(mem, "P", D, 64);
  Ctx ctx{mem, 0};

  Memory::Snapshot start = mem.snapshot();
  int64_t want_slot = drive_get(pool, 0, ctx);
  uint64_t want_state = persistent_hash(mem);
  int total_steps = 0;
  {
    mem.restore(start);
    int64_t slot = kNil;
    total_steps = drive(
        [&](int64_t& s0, int64_t& s1) { return pool.step_get(0, ctx, s0, s1, &slot); });
  }

  for (int crash_at = 1; crash_at < total_steps; ++crash_at) {
    CAPTURE(crash_at);
    mem.restore(start);
    int64_t slot = kNil;
    int64_t s0 = 0, s1 = 0;
    for (int i = 0; i < crash_at; ++i) REQUIRE_FALSE(pool.step_get(0, ctx, s0, s1, &slot));
    s0 = s1 = 0;  // crash: volatile registers lost, persistent words kept
    slot = kNil;
    drive([&](int64_t& a, int64_t& b) { return pool.step_get(0, ctx, a, b, &slot); });
    CHECK(slot == want_slot);
    CHECK(persistent_hash(mem) == want_state);
  }
}

TEST_CASE("every crash point inside Retire resumes to the same final state") {
  const int D = 2;
  Memory mem(1);
  PoolAllocator pool(mem, "P", D, 64);
  Ctx ctx{mem, 0};

  // Retire mid-pool-life so the scan window and undo paths are exercised.
  for (int warm = 0; warm < 3; ++warm) {
    int64_t s = drive_get(pool, 0, ctx);
    drive([&](int64_t&, int64_t&) { return pool.step_reset_retire(0, ctx); });
    drive_retire(pool, 0, s, ctx);
    drive([&](int64_t&, int64_t&) { return pool.step_reset_get(0, ctx); });
  }
  int64_t slot = drive_get(pool, 0, ctx);
  drive([&](int64_t&, int64_t&) { return pool.step_reset_retire(0, ctx); });

  Memory::Snapshot start = mem.snapshot();
  drive_retire(pool, 0, slot, ctx);
  uint64_t want_state = persistent_hash(mem);
  mem.restore(start);
  int total_steps =
      drive([&](int64_t& s0, int64_t& s1) { return pool.step_retire(0, slot, ctx, s0, s1); });

  for (int crash_at = 1; crash_at < total_steps; ++crash_at) {
    CAPTURE(crash_at);
    mem.restore(start);
    int64_t s0 = 0, s1 = 0;
    for (int i = 0; i < crash_at; ++i)
      REQUIRE_FALSE(pool.step_retire(0, slot, ctx, s0, s1));
    s0 = s1 = 0;  // crash
    drive([&](int64_t& a, int64_t& b) { return pool.step_retire(0, slot, ctx, a, b); });
    CHECK(persistent_hash(mem) == want_state);
  }
}

namespace {

// Ground-truth hazard tracker: whenever a GetIndex completes, the slot it
// hands out must not be reachable as a spin target by anyone else — not
// through GO words, not through the hand-off word, and not through an
// in-flight Promote's volatile slot-reference registers.
struct ReuseWatch : DriverObserver {
  Driver* drv = nullptr;
  WportLock* lock = nullptr;
  PoolAllocator* pool = nullptr;
  std::vector<int> pcg_of_port;
  int violations = 0;
  int handouts = 0;
  int sp_starts_with_empty_free = 0;

  void on_event(const Event& e) override {
    if (e.kind == Event::SP_START) {
      if (pool->free_count(drv->port_of(e.pid)) < 1) sp_starts_with_empty_free++;
      return;
    }
    if (e.kind != Event::MEMOP || e.mem.op != OpKind::Write) return;
    int port = -1;
    for (size_t k = 0; k < pcg_of_port.size(); ++k)
      if (e.mem.addr == pcg_of_port[k]) port = static_cast<int>(k);
    if (port < 0) return;
    int64_t slot = pool->get_done_slot(port);
    if (slot == kNil) return;
    handouts++;
    Memory& mem = drv->mem();
    Value ls = mem.peek(lock->lock_status_addr());
    if (ls.f[2] == slot) violations++;
    for (int k = 0; k < lock->ports(); ++k)
      if (k != port && mem.peek(lock->go_addr(k)).s() == slot) violations++;
    // Volatile slot references inside other processes' Promote calls
    // (the LOCK_STATUS owner_go copy, the candidate's GO, the signal
    // target) — registers 3, 8 and 11 of a frame positioned in Promote.
    for (int q = 0; q < drv->nprocs(); ++q) {
      if (q == e.pid || !drv->proc(q).frame) continue;
      for (const Frame* fr = drv->proc(q).frame.get(); fr; fr = fr->child.get()) {
        if (fr->lock != lock || fr->pc < 30 || fr->pc > 39) continue;
        if (fr->r[3] == slot || fr->r[8] == slot || fr->r[11] == slot)
          violations++;
      }
    }
  }
};

}  // namespace

TEST_CASE("reclaiming lock never hands out a slot someone could still signal") {
  for (uint64_t seed : {1ull, 5ull, 9ull, 33ull}) {
    CAPTURE(seed);
    RunConfig rc;
    rc.lock = "wport";
    rc.nprocs = 3;
    rc.reclaiming = true;
    rc.max_sps = 3;
    rc.max_crashes = 2;
    rc.max_aborts = 2;
    rc.max_steps = 30000;
    rc.seed = seed;
    Instance ins = build_instance(rc);
    auto drv = ins.make_driver();

    ReuseWatch watch;
    watch.drv = drv.get();
    watch.lock = static_cast<WportLock*>(ins.lock.get());
    watch.pool = static_cast<PoolAllocator*>(ins.allocs.at(0).get());
    for (int k = 0; k < rc.nprocs; ++k)
      watch.pcg_of_port.push_back(watch.pool->pcg_addr(k));

    // random_run installs its own observer, so drive a seeded schedule
    // with crash and abort injection directly under the hazard tracker.
    drv->set_observer(&watch);
    for (int pid = 0; pid < rc.nprocs; ++pid) drv->arrive(pid);
    std::mt19937_64 rng(seed);
    int crashes = 0, aborts = 0;
    for (int i = 0; i < 30000; ++i) {
      int pid = static_cast<int>(rng() % rc.nprocs);
      const ProcState& p = drv->proc(pid);
      if (p.phase == Phase::Idle) {
        if (p.sp_completed < rc.max_sps) drv->arrive(pid);
        continue;
      }
      uint64_t roll = rng() % 100;
      if (roll < 2 && crashes < 40) { drv->crash(pid); crashes++; }
      else if (roll < 4 && aborts < 40 && !p.abort_signalled) { drv->signal_abort(pid); aborts++; }
      else drv->step(pid);
    }
    CHECK(watch.handouts > 0);
    CHECK(watch.violations == 0);
    CHECK(watch.sp_starts_with_empty_free == 0);
  }
}

namespace {

// Hand-off recorder: the sequence of owners installed into LOCK_STATUS.
struct HandoffWatch : DriverObserver {
  int ls_addr = -1;
  std::vector<int64_t> owners;
  void on_event(const Event& e) override {
    if (e.kind != Event::MEMOP || e.mem.addr != ls_addr) return;
    bool installed = (e.mem.op == OpKind::Cas && e.mem.cas_ok &&
                      e.mem.after.f[0] == 1) ||
                     (e.mem.op == OpKind::Write && e.mem.after.f[0] == 1);
    if (installed) owners.push_back(e.mem.after.f[1]);
  }
};

std::vector<int64_t> fair_handoffs(bool reclaiming) {
  RunConfig rc;
  rc.lock = "wport";
  rc.nprocs = 3;
  rc.reclaiming = reclaiming;
  rc.max_sps = 3;
  Instance ins = build_instance(rc);
  auto drv = ins.make_driver();
  HandoffWatch w;
  w.ls_addr = static_cast<WportLock*>(ins.lock.get())->lock_status_addr();
  // fair_run installs its own observer, so drive round-robin by hand.
  drv->set_observer(&w);
  for (int pid = 0; pid < 3; ++pid) drv->arrive(pid);
  for (int i = 0; i < 100000 && !drv->all_idle(); ++i) {
    for (int pid = 0; pid < 3; ++pid) {
      const ProcState& p = drv->proc(pid);
      if (p.phase == Phase::Idle) {
        if (p.sp_completed < rc.max_sps) drv->arrive(pid);
        continue;
      }
      drv->step(pid);
    }
  }
  return w.owners;
}

}  // namespace

TEST_CASE("oracle and reclaiming backends agree on the hand-off sequence") {
  // Identical schedules must produce the same sequence of lock owners;
  // spin-slot names differ between backends ("modulo slot renaming"), so
  // only owner ports are compared.
  CHECK(fair_handoffs(false) == fair_handoffs(true));
}

TEST_CASE("oracle and reclaiming backends agree on exhaustive verdicts") {
  Report reps[2];
  for (int variant = 0; variant < 2; ++variant) {
    RunConfig rc;
    rc.lock = "wport";
    rc.nprocs = 2;
    rc.reclaiming = (variant == 1);
    rc.max_sps = 1;
    rc.max_crashes = 1;
    Instance ins = build_instance(rc);
    auto drv = ins.make_driver();
    reps[variant] = explore(*drv, explore_config(rc));
  }
  CHECK(reps[0].ok);
  CHECK(reps[1].ok);
  CHECK(reps[0].exhaustive);
  CHECK(reps[1].exhaustive);
  CHECK(reps[0].failures.empty());
  CHECK(reps[1].failures.empty());
}
