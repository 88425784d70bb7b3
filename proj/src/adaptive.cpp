#include "adaptive.hpp"

namespace rme {

namespace {

enum Reg : int { R_K = 0, R_SIDE = 1 };

enum Pc : int {
  ENTRY = 0,
  // Try: capture scan, then the chosen path lock, then the arbiter.
  T_READ_CURK = 10,
  T_READ_SLOT = 11,
  T_CAS = 12,
  T_ADV = 13,
  T_SET_FAST = 14,
  T_FAST_REC_DONE = 15,
  T_FAST_EXIT_DONE = 16,
  T_FAST_TRY_DONE = 17,
  T_SET_SLOW = 20,
  T_SLOW_REC_DONE = 21,
  T_SLOW_EXIT_DONE = 22,
  T_SLOW_TRY_DONE = 23,
  T_SET_SIDE = 30,
  T_2R_REC_DONE = 31,
  T_2R_EXIT_DONE = 32,
  T_2R_TRY_DONE = 33,
  T_SET_CS = 34,
  T_ABORT_DONE = 35,
  // Exit: arbiter, then path lock, then port release, then resets.
  X_READ_STATUS = 40,
  X_SET_EXIT = 41,
  X_READ_SIDE = 42,
  X_2R_REC_DONE = 43,
  X_2R_EXIT_DONE = 44,
  X_READ_PATH = 45,
  X_SLOW_REC_DONE = 46,
  X_SLOW_EXIT_DONE = 47,
  X_READ_CURK = 50,
  X_FAST_REC_DONE = 51,
  X_FAST_EXIT_DONE = 52,
  X_READ_OWNER = 53,
  X_CLEAR_OWNER = 54,
  X_RESET_CURK = 60,
  X_RESET_PATH = 61,
  X_RESET_SIDE = 62,
  X_SET_TRY = 63,
};

}  // namespace

AdaptLock::AdaptLock(Memory& mem, std::string label, AdaptConfig cfg)
    : mem_(mem), label_(std::move(label)), cfg_(std::move(cfg)) {
  const int n = cfg_.nprocs;
  const int b = cfg_.ports;
  const int w = cfg_.word_bits;
  if (n < 1) throw HarnessFault(label_ + ": nprocs must be >= 1");
  if (b < 1 || b > w) throw HarnessFault(label_ + ": need 1 <= ports <= word_bits");
  if (!cfg_.proc_home.empty() &&
      cfg_.proc_home.size() != static_cast<size_t>(n))
    throw HarnessFault(label_ + ": proc_home size mismatch");

  fast_alloc_ = std::make_unique<FreshAllocator>(mem_, label_ + ".fast.alloc",
                                                 b, 8 * w);
  fast_ = std::make_unique<WportLock>(mem_, label_ + ".fast",
                                      WportConfig{b, w, false, {}},
                                      fast_alloc_.get());
  two_alloc_ = std::make_unique<FreshAllocator>(mem_, label_ + ".2rme.alloc",
                                                2, 8 * w);
  two_ = std::make_unique<WportLock>(mem_, label_ + ".2rme",
                                     WportConfig{2, w, false, {}},
                                     two_alloc_.get());
  TreeConfig tc;
  tc.nprocs = n;
  tc.arity = std::max(2, std::min(w, n));
  tc.word_bits = w;
  tc.proc_home = cfg_.proc_home;
  slow_ = std::make_unique<TreeLock>(mem_, label_ + ".slow", tc);

  for (int k = 0; k < b; ++k)
    k_owners_.push_back(mem_.alloc(
        {label_ + ".K_OWNERS[" + std::to_string(k) + "]", 8 * w, -1, false},
        Value::scalar(kNil)));
  for (int p = 0; p < n; ++p) {
    int home = cfg_.proc_home.empty() ? kGlobalHome : cfg_.proc_home[p];
    std::string sp = "[" + std::to_string(p) + "]";
    curr_k_.push_back(mem_.alloc({label_ + ".CURR_K" + sp, 8 * w, -1, false},
                                 Value::scalar(0), home));
    path_.push_back(mem_.alloc({label_ + ".PATH" + sp, 8 * w, -1, false},
                               Value::scalar(kNil), home));
    side_.push_back(mem_.alloc({label_ + ".SIDE" + sp, 8 * w, -1, false},
                               Value::scalar(kNil), home));
    status_.push_back(mem_.alloc({label_ + ".STATUS" + sp, 2, -1, false},
                                 Value::scalar(PS_TRY), home));
  }
}

bool AdaptLock::step(Frame& f, Ctx& ctx) {
  switch (f.method) {
    case Method::Recover: return step_recover(f, ctx);
    case Method::Try: return step_try(f, ctx);
    case Method::Exit: return step_exit(f, ctx);
  }
  throw HarnessFault(label_ + ": bad method");
}

bool AdaptLock::step_recover(Frame& f, Ctx& ctx) {
  int64_t st = mem_.read(status_[f.port], ctx.pid).s();
  switch (st) {
    case PS_TRY: f.ret = RET_TRY; break;
    case PS_CS: f.ret = RET_CS; break;
    case PS_EXIT: f.ret = RET_EXIT; break;
    default: throw HarnessFault(label_ + ": bad STATUS value");
  }
  return true;
}

bool AdaptLock::step_try(Frame& f, Ctx& ctx) {
  const int p = f.port;
  const int b = cfg_.ports;
  auto abort_out = [&] {
    f.child = std::make_unique<Frame>(this, Method::Exit, p, true);
    f.pc = T_ABORT_DONE;
  };
  switch (f.pc) {
    case ENTRY:
    case T_READ_CURK: {
      int64_t k = mem_.read(curr_k_[p], ctx.pid).s();
      f.r[R_K] = k;
      f.pc = (k >= b) ? T_SET_SLOW : T_READ_SLOT;
      return false;
    }
    case T_READ_SLOT: {
      int64_t v = mem_.read(k_owners_[f.r[R_K]], ctx.pid).s();
      if (v == p) f.pc = T_SET_FAST;  // captured before a crash
      else if (v == kNil) f.pc = T_CAS;
      else f.pc = T_ADV;
      return false;
    }
    case T_CAS: {
      bool ok = mem_.cas(k_owners_[f.r[R_K]], ctx.pid, Value::scalar(kNil),
                         Value::scalar(p));
      f.pc = ok ? T_SET_FAST : T_ADV;
      return false;
    }
    case T_ADV: {
      mem_.write(curr_k_[p], ctx.pid, Value::scalar(f.r[R_K] + 1));
      f.r[R_K] += 1;
      f.pc = (f.r[R_K] >= b) ? T_SET_SLOW : T_READ_SLOT;
      return false;
    }
    case T_SET_FAST: {
      mem_.write(path_[p], ctx.pid, Value::scalar(PATH_FAST));
      f.child = std::make_unique<Frame>(fast_.get(), Method::Recover,
                                        static_cast<int>(f.r[R_K]));
      f.pc = T_FAST_REC_DONE;
      return false;
    }
    case T_FAST_REC_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      int k = static_cast<int>(f.r[R_K]);
      if (cr == RET_TRY) {
        f.child = std::make_unique<Frame>(fast_.get(), Method::Try, k);
        f.pc = T_FAST_TRY_DONE;
      } else if (cr == RET_EXIT) {
        f.child = std::make_unique<Frame>(fast_.get(), Method::Exit, k);
        f.pc = T_FAST_EXIT_DONE;
      } else {  // RET_CS: already held across a crash
        f.r[R_SIDE] = SIDE_RIGHT;
        f.pc = T_SET_SIDE;
      }
      return false;
    }
    case T_FAST_EXIT_DONE: {
      f.child_ret = RET_NONE;  // Exit returns nothing; scrub for canonical dedup
      f.child = std::make_unique<Frame>(fast_.get(), Method::Recover,
                                        static_cast<int>(f.r[R_K]));
      f.pc = T_FAST_REC_DONE;
      return false;
    }
    case T_FAST_TRY_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_FALSE) {
        abort_out();
        return false;
      }
      f.r[R_SIDE] = SIDE_RIGHT;
      f.pc = T_SET_SIDE;
      return false;
    }
    case T_SET_SLOW: {
      mem_.write(path_[p], ctx.pid, Value::scalar(PATH_SLOW));
      f.child = std::make_unique<Frame>(slow_.get(), Method::Recover, p);
      f.pc = T_SLOW_REC_DONE;
      return false;
    }
    case T_SLOW_REC_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_TRY) {
        f.child = std::make_unique<Frame>(slow_.get(), Method::Try, p);
        f.pc = T_SLOW_TRY_DONE;
      } else if (cr == RET_EXIT) {
        f.child = std::make_unique<Frame>(slow_.get(), Method::Exit, p);
        f.pc = T_SLOW_EXIT_DONE;
      } else {
        f.r[R_SIDE] = SIDE_LEFT;
        f.pc = T_SET_SIDE;
      }
      return false;
    }
    case T_SLOW_EXIT_DONE: {
      f.child_ret = RET_NONE;  // Exit returns nothing; scrub for canonical dedup
      f.child = std::make_unique<Frame>(slow_.get(), Method::Recover, p);
      f.pc = T_SLOW_REC_DONE;
      return false;
    }
    case T_SLOW_TRY_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_FALSE) {
        abort_out();
        return false;
      }
      f.r[R_SIDE] = SIDE_LEFT;
      f.pc = T_SET_SIDE;
      return false;
    }
    case T_SET_SIDE: {
      mem_.write(side_[p], ctx.pid, Value::scalar(f.r[R_SIDE]));
      f.child = std::make_unique<Frame>(two_.get(), Method::Recover,
                                        static_cast<int>(f.r[R_SIDE]));
      f.pc = T_2R_REC_DONE;
      return false;
    }
    case T_2R_REC_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      int side = static_cast<int>(f.r[R_SIDE]);
      if (cr == RET_TRY) {
        f.child = std::make_unique<Frame>(two_.get(), Method::Try, side);
        f.pc = T_2R_TRY_DONE;
      } else if (cr == RET_EXIT) {
        f.child = std::make_unique<Frame>(two_.get(), Method::Exit, side);
        f.pc = T_2R_EXIT_DONE;
      } else {
        f.pc = T_SET_CS;
      }
      return false;
    }
    case T_2R_EXIT_DONE: {
      f.child_ret = RET_NONE;  // Exit returns nothing; scrub for canonical dedup
      f.child = std::make_unique<Frame>(two_.get(), Method::Recover,
                                        static_cast<int>(f.r[R_SIDE]));
      f.pc = T_2R_REC_DONE;
      return false;
    }
    case T_2R_TRY_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_FALSE) {
        abort_out();
        return false;
      }
      f.pc = T_SET_CS;
      return false;
    }
    case T_SET_CS: {
      mem_.write(status_[p], ctx.pid, Value::scalar(PS_CS));
      f.ret = RET_TRUE;
      return true;
    }
    case T_ABORT_DONE: {
      f.ret = RET_FALSE;
      return true;
    }
  }
  throw HarnessFault(label_ + ": bad Try pc");
}

bool AdaptLock::step_exit(Frame& f, Ctx& ctx) {
  const int p = f.port;
  switch (f.pc) {
    case ENTRY:
    case X_READ_STATUS:
    case X_SET_EXIT: {
      // Abort unwinds run with STATUS still at TRY; every other entry
      // (fresh exit, crash re-run) commits EXIT as the very first step so
      // a recovery never lands behind the section boundary.
      if (f.abort_arg) {
        f.pc = X_READ_SIDE;
        return false;
      }
      mem_.write(status_[p], ctx.pid, Value::scalar(PS_EXIT));
      f.pc = X_READ_SIDE;
      return false;
    }
    case X_READ_SIDE: {
      int64_t s = mem_.read(side_[p], ctx.pid).s();
      if (s == kNil) {
        f.pc = X_READ_PATH;
        return false;
      }
      f.r[R_SIDE] = s;
      f.child = std::make_unique<Frame>(two_.get(), Method::Recover,
                                        static_cast<int>(s));
      f.pc = X_2R_REC_DONE;
      return false;
    }
    case X_2R_REC_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_TRY) {  // never acquired, or already released
        f.pc = X_READ_PATH;
      } else {
        f.child = std::make_unique<Frame>(two_.get(), Method::Exit,
                                          static_cast<int>(f.r[R_SIDE]));
        f.pc = X_2R_EXIT_DONE;
      }
      return false;
    }
    case X_2R_EXIT_DONE: {
      f.pc = X_READ_PATH;
      return false;
    }
    case X_READ_PATH: {
      int64_t path = mem_.read(path_[p], ctx.pid).s();
      if (path == PATH_SLOW) {
        f.child = std::make_unique<Frame>(slow_.get(), Method::Recover, p);
        f.pc = X_SLOW_REC_DONE;
      } else if (path == PATH_FAST) {
        f.pc = X_READ_CURK;
      } else {
        // nil: PATH is written before any sub-lock is entered, so nothing
        // is captured or held; go straight to the resets.
        f.pc = X_RESET_CURK;
      }
      return false;
    }
    case X_SLOW_REC_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_TRY) {
        f.pc = X_RESET_CURK;
      } else {
        f.child = std::make_unique<Frame>(slow_.get(), Method::Exit, p);
        f.pc = X_SLOW_EXIT_DONE;
      }
      return false;
    }
    case X_SLOW_EXIT_DONE: {
      f.pc = X_RESET_CURK;
      return false;
    }
    case X_READ_CURK: {
      int64_t k = mem_.read(curr_k_[p], ctx.pid).s();
      if (k < 0 || k >= cfg_.ports) {
        f.pc = X_RESET_CURK;
        return false;
      }
      f.r[R_K] = k;
      f.pc = X_READ_OWNER;
      return false;
    }
    case X_READ_OWNER: {
      // If the slot is no longer ours, a previous run of this Exit already
      // released both the fast lock and the port; port k may now belong to
      // another process, so its lock state must not be touched.
      int64_t v = mem_.read(k_owners_[f.r[R_K]], ctx.pid).s();
      if (v == p) {
        f.child = std::make_unique<Frame>(fast_.get(), Method::Recover,
                                          static_cast<int>(f.r[R_K]));
        f.pc = X_FAST_REC_DONE;
      } else {
        f.pc = X_RESET_CURK;
      }
      return false;
    }
    case X_FAST_REC_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_TRY) {  // already released; just drop the port
        f.pc = X_CLEAR_OWNER;
      } else {
        f.child = std::make_unique<Frame>(fast_.get(), Method::Exit,
                                          static_cast<int>(f.r[R_K]));
        f.pc = X_FAST_EXIT_DONE;
      }
      return false;
    }
    case X_FAST_EXIT_DONE: {
      f.pc = X_CLEAR_OWNER;
      return false;
    }
    case X_CLEAR_OWNER: {
      mem_.write(k_owners_[f.r[R_K]], ctx.pid, Value::scalar(kNil));
      f.pc = X_RESET_CURK;
      return false;
    }
    case X_RESET_CURK: {
      mem_.write(curr_k_[p], ctx.pid, Value::scalar(0));
      f.pc = X_RESET_PATH;
      return false;
    }
    case X_RESET_PATH: {
      mem_.write(path_[p], ctx.pid, Value::scalar(kNil));
      f.pc = X_RESET_SIDE;
      return false;
    }
    case X_RESET_SIDE: {
      mem_.write(side_[p], ctx.pid, Value::scalar(kNil));
      f.pc = X_SET_TRY;
      return false;
    }
    case X_SET_TRY: {
      mem_.write(status_[p], ctx.pid, Value::scalar(PS_TRY));
      f.ret = RET_NONE;
      return true;
    }
  }
  throw HarnessFault(label_ + ": bad Exit pc");
}

}  // namespace rme
