#include "wport.hpp"

namespace rme {

namespace {

// Frame register assignments.
enum Reg {
  R_SLOT = 0,  // our spin-slot address (kNil if unknown)
  R_T = 1,     // last LOCK_STATUS read: taken
  R_O = 2,     // ... owner
  R_G = 3,     // ... owner_go
  R_A = 4,     // ACTIVE read
  R_J = 5,     // Promote argument
  R_CONT = 6,  // pc to resume at when Promote finishes
  R_Q = 7,     // promotion candidate
  R_GQ = 8,    // candidate's GO
  R_S0 = 9,    // allocator scratch
  R_S1 = 10,   // allocator scratch
  R_SIG = 11,  // slot to signal
};

enum Pc {
  ENTRY = 0,
  RC_READ = 1,

  T_READ_GO = 10,
  T_GET = 11,
  T_INIT_SLOT = 12,
  T_RESET_RET = 13,
  T_SET_GO = 14,
  T_READ_ACTIVE = 15,
  T_FAA = 16,
  T_SPIN = 17,
  T_SET_CS = 18,
  T_ABORT_EXIT = 19,

  PR_READ_LS = 30,
  PR_ANN1 = 31,
  PR_VAL1 = 32,
  PR_READ_ACTIVE = 33,
  PR_READ_GQ = 34,
  PR_CAS = 35,
  PR_REREAD = 36,
  PR_ANN2 = 37,
  PR_VAL2 = 38,
  PR_SIGNAL = 39,

  E_READ_STATUS = 50,
  E_SET_EXIT = 51,
  E_READ_ACTIVE = 52,
  E_FAA = 53,
  E_READ_GO = 54,
  E_READ_LS = 55,
  E_CAS = 56,
  EF_READ_LS = 57,  // faulty-variant abort flow
  EF_CAS = 58,
  E_RETIRE = 59,
  E_RESET_GET = 60,
  E_SET_GO_NIL = 61,
  E_SET_STATUS_TRY = 62,
};

constexpr int64_t kFalse = 0;
constexpr int64_t kTrue = 1;

}  // namespace

WportLock::WportLock(Memory& mem, std::string label, WportConfig cfg,
                     SlotAllocator* alloc)
    : mem_(mem), label_(std::move(label)), cfg_(cfg), alloc_(alloc) {
  const int D = cfg_.ports;
  const int W = cfg_.word_bits;
  if (D < 1 || D > W || W > 62)
    throw HarnessFault(label_ + ": need 1 <= ports <= word_bits <= 62");
  // Encodability of the hand-off tuple: taken bit + owner index + a slot
  // reference must fit the widened word (factor pinned in the manifest).
  const int ref_bits = 8 * W;
  if (1 + bits_for(W - 1) + 16 > ref_bits)
    throw HarnessFault(label_ + ": hand-off tuple does not fit 8*W bits");
  auto port_home = [&](int k) {
    return cfg_.port_home.empty() ? kGlobalHome : cfg_.port_home[k];
  };
  active_ = mem_.alloc({label_ + ".ACTIVE", W}, Value::scalar(0));
  ls_ = mem_.alloc({label_ + ".LOCK_STATUS", ref_bits},
                   Value::tuple(0, 0, kNil));
  for (int k = 0; k < D; ++k) {
    go_.push_back(mem_.alloc({label_ + ".GO[" + std::to_string(k) + "]",
                              ref_bits},
                             Value::scalar(kNil), port_home(k)));
    status_.push_back(mem_.alloc({label_ + ".STATUS[" + std::to_string(k) + "]",
                                  2},
                                 Value::scalar(PS_TRY), port_home(k)));
  }
}

int64_t WportLock::next_waiting(int64_t owner, int64_t mask) const {
  if (mask == 0) return kNil;
  const int W = cfg_.word_bits;
  for (int i = 1; i <= W; ++i) {
    int64_t j = (owner + i) % W;
    if ((mask >> j) & 1) return j;
  }
  return kNil;
}

bool WportLock::at_spin(const Frame& f) {
  return f.method == Method::Try && f.pc == T_SPIN;
}

bool WportLock::at_promote_cas(const Frame& f) { return f.pc == PR_CAS; }

void WportLock::promote_start(Frame& f, int64_t j, int cont) {
  // Scrub leftovers from a previous Promote or caller scratch; the call
  // starts from a canonical register file (see promote_finish).
  f.r[R_T] = f.r[R_O] = f.r[R_G] = f.r[R_A] = 0;
  f.r[R_Q] = f.r[R_GQ] = f.r[R_SIG] = 0;
  f.r[R_J] = j;
  f.r[R_CONT] = cont;
  f.pc = PR_READ_LS;
}

namespace {

// Returning from Promote: all of its scratch registers are dead from the
// continuation onwards. Zeroing them keeps equivalent machine states
// byte-identical, which matters for state-space dedup.
void promote_finish(Frame& f) {
  int cont = static_cast<int>(f.r[R_CONT]);
  f.r[R_T] = f.r[R_O] = f.r[R_G] = f.r[R_A] = 0;
  f.r[R_J] = f.r[R_CONT] = f.r[R_Q] = f.r[R_GQ] = f.r[R_SIG] = 0;
  f.pc = cont;
}

}  // namespace

bool WportLock::step(Frame& f, Ctx& ctx) {
  if (f.pc == ENTRY) {
    switch (f.method) {
      case Method::Recover: f.pc = RC_READ; break;
      case Method::Try: f.pc = T_READ_GO; break;
      case Method::Exit: f.pc = E_READ_STATUS; break;
    }
    // Dispatch is free; fall through into the first real step.
  }
  if (f.pc == RC_READ) return step_recover(f, ctx);
  if (f.pc >= PR_READ_LS && f.pc <= PR_SIGNAL) return step_promote(f, ctx);
  if (f.pc >= E_READ_STATUS) return step_exit(f, ctx);
  return step_try(f, ctx);
}

bool WportLock::step_recover(Frame& f, Ctx& ctx) {
  int64_t st = mem_.read(status_[f.port], ctx.pid).s();
  switch (st) {
    case PS_TRY:
    case PS_ABORT: f.ret = RET_TRY; break;
    case PS_CS: f.ret = RET_CS; break;
    default: f.ret = RET_EXIT; break;
  }
  return true;
}

bool WportLock::step_try(Frame& f, Ctx& ctx) {
  const int k = f.port;
  switch (f.pc) {
    case T_READ_GO: {
      int64_t g = mem_.read(go_[k], ctx.pid).s();
      if (g != kNil) {
        f.r[R_SLOT] = g;
        f.pc = T_READ_ACTIVE;
      } else {
        f.pc = T_GET;
      }
      return false;
    }
    case T_GET: {
      int64_t slot = kNil;
      if (alloc_->step_get(k, ctx, f.r[R_S0], f.r[R_S1], &slot)) {
        f.r[R_SLOT] = slot;
        f.r[R_S0] = f.r[R_S1] = 0;
        f.pc = T_INIT_SLOT;
      }
      return false;
    }
    case T_INIT_SLOT:
      mem_.write(static_cast<int>(f.r[R_SLOT]), ctx.pid, Value::scalar(kFalse));
      f.pc = T_RESET_RET;
      return false;
    case T_RESET_RET:
      if (alloc_->step_reset_retire(k, ctx)) f.pc = T_SET_GO;
      return false;
    case T_SET_GO:
      mem_.write(go_[k], ctx.pid, Value::scalar(f.r[R_SLOT]));
      f.pc = T_READ_ACTIVE;
      return false;
    case T_READ_ACTIVE: {
      int64_t a = mem_.read(active_, ctx.pid).s();
      if ((a >> k) & 1) {
        promote_start(f, kNil, T_SPIN);
      } else {
        f.pc = T_FAA;
      }
      return false;
    }
    case T_FAA:
      mem_.faa(active_, ctx.pid, int64_t{1} << k);
      promote_start(f, kNil, T_SPIN);
      return false;
    case T_SPIN: {
      if (ctx.abort_signal) {
        mem_.write(status_[k], ctx.pid, Value::scalar(PS_ABORT));
        f.r.fill(0);  // nothing of Try's state survives the abort flow
        f.pc = T_ABORT_EXIT;
        f.child = std::make_unique<Frame>(this, Method::Exit, k, true);
        return false;
      }
      int64_t v = mem_.read(static_cast<int>(f.r[R_SLOT]), ctx.pid).s();
      if (v == kTrue) f.pc = T_SET_CS;
      return false;
    }
    case T_SET_CS:
      mem_.write(status_[k], ctx.pid, Value::scalar(PS_CS));
      f.ret = RET_TRUE;
      return true;
    case T_ABORT_EXIT:
      // The Exit subroutine (child frame) has completed.
      f.ret = RET_FALSE;
      return true;
    default:
      throw HarnessFault(label_ + ": bad Try pc " + std::to_string(f.pc));
  }
}

bool WportLock::step_promote(Frame& f, Ctx& ctx) {
  const int k = f.port;
  const bool reclaiming = alloc_->reclaiming();
  switch (f.pc) {
    case PR_READ_LS: {
      Value v = mem_.read(ls_, ctx.pid);
      f.r[R_T] = v.f[0];
      f.r[R_O] = v.f[1];
      f.r[R_G] = v.f[2];
      if (reclaiming && f.r[R_G] != kNil) {
        f.pc = PR_ANN1;
      } else if (f.r[R_T] == 1) {
        f.pc = PR_REREAD;
      } else {
        f.pc = PR_READ_ACTIVE;
      }
      return false;
    }
    case PR_ANN1:
      mem_.write(alloc_->referenced_addr(k), ctx.pid, Value::scalar(f.r[R_G]));
      f.pc = PR_VAL1;
      return false;
    case PR_VAL1: {
      Value v = mem_.read(ls_, ctx.pid);
      if (v != Value::tuple(f.r[R_T], f.r[R_O], f.r[R_G])) {
        promote_finish(f);  // abandon
      } else if (f.r[R_T] == 1) {
        f.r[R_SIG] = f.r[R_G];
        f.pc = PR_SIGNAL;
      } else {
        f.pc = PR_READ_ACTIVE;
      }
      return false;
    }
    case PR_READ_ACTIVE: {
      int64_t a = mem_.read(active_, ctx.pid).s();
      int64_t q = next_waiting(f.r[R_O], a);
      if (q == kNil && f.r[R_J] != kNil) q = f.r[R_J];
      if (q == kNil) {
        f.pc = PR_REREAD;
      } else {
        f.r[R_Q] = q;
        f.pc = PR_READ_GQ;
      }
      return false;
    }
    case PR_READ_GQ: {
      int64_t gq = mem_.read(go_[static_cast<int>(f.r[R_Q])], ctx.pid).s();
      if (gq == kNil) {
        // The candidate already left; installing a nil spin reference
        // could park the lock on a departed process, so treat this as
        // having no candidate.
        f.pc = PR_REREAD;
      } else {
        f.r[R_GQ] = gq;
        f.pc = PR_CAS;
      }
      return false;
    }
    case PR_CAS:
      mem_.cas(ls_, ctx.pid, Value::tuple(0, f.r[R_O], f.r[R_G]),
               Value::tuple(1, f.r[R_Q], f.r[R_GQ]));
      f.pc = PR_REREAD;
      return false;
    case PR_REREAD: {
      Value v = mem_.read(ls_, ctx.pid);
      if (v.f[0] == 0) {
        promote_finish(f);
      } else {
        f.r[R_T] = v.f[0];
        f.r[R_O] = v.f[1];
        f.r[R_G] = v.f[2];
        if (reclaiming) {
          f.pc = PR_ANN2;
        } else {
          f.r[R_SIG] = f.r[R_G];
          f.pc = PR_SIGNAL;
        }
      }
      return false;
    }
    case PR_ANN2:
      mem_.write(alloc_->referenced_addr(k), ctx.pid, Value::scalar(f.r[R_G]));
      f.pc = PR_VAL2;
      return false;
    case PR_VAL2: {
      Value v = mem_.read(ls_, ctx.pid);
      if (v != Value::tuple(1, f.r[R_O], f.r[R_G])) {
        promote_finish(f);  // abandon
      } else {
        f.r[R_SIG] = f.r[R_G];
        f.pc = PR_SIGNAL;
      }
      return false;
    }
    case PR_SIGNAL:
      if (f.r[R_SIG] == kNil)
        throw HarnessFault(label_ + ": signalling a nil spin reference");
      mem_.write(static_cast<int>(f.r[R_SIG]), ctx.pid, Value::scalar(kTrue));
      promote_finish(f);
      return false;
    default:
      throw HarnessFault(label_ + ": bad Promote pc " + std::to_string(f.pc));
  }
}

bool WportLock::step_exit(Frame& f, Ctx& ctx) {
  const int k = f.port;
  switch (f.pc) {
    case E_READ_STATUS:
    case E_SET_EXIT:
      // The abort flow enters with STATUS already at ABORT and must keep
      // it; every other entry (fresh exit, crash re-run) commits EXIT as
      // the very first step so a recovery never lands behind the section
      // boundary.
      if (f.abort_arg) {
        f.pc = E_READ_ACTIVE;
        return false;
      }
      mem_.write(status_[k], ctx.pid, Value::scalar(PS_EXIT));
      f.pc = E_READ_ACTIVE;
      return false;
    case E_READ_ACTIVE: {
      int64_t a = mem_.read(active_, ctx.pid).s();
      if ((a >> k) & 1) {
        f.pc = E_FAA;
      } else if (cfg_.faulty) {
        f.pc = E_READ_GO;
      } else {
        promote_start(f, k, E_READ_GO);
      }
      return false;
    }
    case E_FAA:
      mem_.faa(active_, ctx.pid, -(int64_t{1} << k));
      if (cfg_.faulty) {
        f.pc = E_READ_GO;
      } else {
        promote_start(f, k, E_READ_GO);
      }
      return false;
    case E_READ_GO: {
      int64_t g = mem_.read(go_[k], ctx.pid).s();
      f.r[R_SLOT] = g;
      f.pc = (cfg_.faulty && f.abort_arg) ? EF_READ_LS : E_READ_LS;
      return false;
    }
    case E_READ_LS: {
      Value v = mem_.read(ls_, ctx.pid);
      if (f.r[R_SLOT] != kNil && v == Value::tuple(1, k, f.r[R_SLOT])) {
        f.pc = E_CAS;
      } else {
        promote_start(f, kNil, E_RETIRE);
      }
      return false;
    }
    case E_CAS:
      mem_.cas(ls_, ctx.pid, Value::tuple(1, k, f.r[R_SLOT]),
               Value::tuple(0, k, f.r[R_SLOT]));
      promote_start(f, kNil, E_RETIRE);
      return false;
    case EF_READ_LS: {
      // Faulty-variant abort flow: pretend to have acquired and released
      // the lock, so that in-flight promotions of this process fail.
      Value v = mem_.read(ls_, ctx.pid);
      if (f.r[R_SLOT] != kNil && v.f[0] == 0) {
        f.r[R_T] = v.f[0];
        f.r[R_O] = v.f[1];
        f.r[R_G] = v.f[2];
        f.pc = EF_CAS;
      } else if (f.r[R_SLOT] != kNil && v == Value::tuple(1, k, f.r[R_SLOT])) {
        f.pc = E_CAS;  // we were promoted meanwhile: release normally
      } else {
        promote_start(f, kNil, E_RETIRE);
      }
      return false;
    }
    case EF_CAS:
      mem_.cas(ls_, ctx.pid, Value::tuple(0, f.r[R_O], f.r[R_G]),
               Value::tuple(0, k, f.r[R_SLOT]));
      promote_start(f, kNil, E_RETIRE);
      return false;
    case E_RETIRE:
      if (f.r[R_SLOT] == kNil ||
          alloc_->step_retire(k, f.r[R_SLOT], ctx, f.r[R_S0], f.r[R_S1])) {
        f.r[R_SLOT] = f.r[R_S0] = f.r[R_S1] = 0;  // dead from here on
        f.pc = E_RESET_GET;
      }
      return false;
    case E_RESET_GET:
      if (alloc_->step_reset_get(k, ctx)) f.pc = E_SET_GO_NIL;
      return false;
    case E_SET_GO_NIL:
      mem_.write(go_[k], ctx.pid, Value::scalar(kNil));
      f.pc = E_SET_STATUS_TRY;
      return false;
    case E_SET_STATUS_TRY:
      mem_.write(status_[k], ctx.pid, Value::scalar(PS_TRY));
      f.ret = RET_NONE;
      return true;
    default:
      throw HarnessFault(label_ + ": bad Exit pc " + std::to_string(f.pc));
  }
}

// --- FreshAllocator ---------------------------------------------------

FreshAllocator::FreshAllocator(Memory& mem, std::string label, int ports,
                               int width_bits)
    : mem_(mem), label_(std::move(label)), width_bits_(width_bits) {
  for (int k = 0; k < ports; ++k) {
    pcg_.push_back(mem_.alloc({label_ + ".PCG[" + std::to_string(k) + "]",
                               width_bits_},
                              Value::tuple(0, kNil, 0)));
  }
  // Pre-create enough spin words that step_get normally recycles instead
  // of growing memory: at most one live slot per port plus a couple of
  // lingering references (the hand-off word and in-flight Promote copies)
  // can be pinned at once. A constant word count keeps equivalent
  // schedules byte-identical for state-space digests; step_get still
  // falls back to growing when everything is pinned.
  for (int i = 0; i < ports + 3; ++i)
    mem_.alloc({label_ + ".spin@" + std::to_string(++serial_), 1},
               Value::scalar(0));
}

bool FreshAllocator::step_get(int port, Ctx& ctx, int64_t& s0, int64_t&,
                              int64_t* out_slot) {
  if (s0 == 0) {
    Value v = mem_.read(pcg_[port], ctx.pid);
    if (v.f[0] == 1) {
      *out_slot = v.f[1];
      return true;
    }
    s0 = 1;
    return false;
  }
  // The handed-out slot must be fresh in the algorithm's sense: no stored
  // value and no volatile register refers to it. Any such word of an
  // earlier passage is indistinguishable from a new one, so reusing the
  // lowest-numbered one keeps the address space canonical (equivalent
  // schedules produce identical memory states). Creating the word costs
  // nothing in this backend; the step's one charged operation is
  // persisting it.
  const std::string prefix = label_ + ".spin@";
  int slot = -1;
  for (int a = 0; a < mem_.size(); ++a) {
    const WordMeta& m = mem_.meta(a);
    if (m.label.compare(0, prefix.size(), prefix) != 0) continue;
    if (mem_.externally_referenced(a)) continue;
    slot = a;
    break;
  }
  if (slot >= 0) {
    mem_.harness_recycle(slot, Value::scalar(0), ctx.pid);
  } else {
    slot = mem_.alloc({prefix + std::to_string(++serial_), 1},
                      Value::scalar(0), ctx.pid);
  }
  mem_.write(pcg_[port], ctx.pid, Value::tuple(1, slot, 0));
  *out_slot = slot;
  return true;
}

bool FreshAllocator::step_retire(int, int64_t, Ctx&, int64_t&, int64_t&) {
  return true;  // slots are never reused
}

bool FreshAllocator::step_reset_get(int port, Ctx& ctx) {
  mem_.write(pcg_[port], ctx.pid, Value::tuple(0, kNil, 0));
  return true;
}

bool FreshAllocator::step_reset_retire(int, Ctx&) { return true; }

}  // namespace rme
