#include "tree.hpp"

#include "value.hpp"

namespace rme {

namespace {

enum Reg : int { R_X = 0 };

enum Pc : int {
  ENTRY = 0,
  RC_READ = 1,
  // Try: ascend, one node lock at a time.
  A_READ_CUR = 10,
  A_REC_DONE = 11,
  A_TRY_DONE = 12,
  A_SET_CS = 14,
  A_ABORT_DONE = 15,
  A_EXIT_DONE = 16,
  // Exit: descend, releasing and stepping current_node down.
  E_READ_STATUS = 20,
  E_SET_EXIT = 21,
  E_READ_CUR = 22,
  E_REC_DONE = 23,
  E_EXIT_DONE = 24,
  E_SET_TRY = 26,
};

}  // namespace

TreeLock::TreeLock(Memory& mem, std::string label, TreeConfig cfg)
    : mem_(mem), label_(std::move(label)), cfg_(std::move(cfg)) {
  const int n = cfg_.nprocs;
  const int d = cfg_.arity;
  if (n < 1) throw HarnessFault(label_ + ": nprocs must be >= 1");
  if (d < 2) throw HarnessFault(label_ + ": arity must be >= 2");
  if (!cfg_.proc_home.empty() &&
      cfg_.proc_home.size() != static_cast<size_t>(n))
    throw HarnessFault(label_ + ": proc_home size mismatch");

  height_ = 1;
  int64_t leaves = d;
  while (leaves < n) {
    leaves *= d;
    ++height_;
  }
  pow_.assign(height_ + 1, 1);
  for (int i = 1; i <= height_; ++i) pow_[i] = pow_[i - 1] * d;

  for (int l = 0; l < height_; ++l) {
    level_offset_.push_back(static_cast<int>(nodes_.size()));
    for (int64_t i = 0; i < pow_[l]; ++i) {
      std::string nl = label_ + ".n" + std::to_string(l) + "_" + std::to_string(i);
      allocs_.push_back(std::make_unique<FreshAllocator>(
          mem_, nl + ".alloc", d, 8 * cfg_.word_bits));
      WportConfig wc;
      wc.ports = d;
      wc.word_bits = cfg_.word_bits;
      nodes_.push_back(
          std::make_unique<WportLock>(mem_, nl, wc, allocs_.back().get()));
      level_of_.push_back(l);
    }
  }

  for (int p = 0; p < n; ++p) {
    int home = cfg_.proc_home.empty() ? kGlobalHome : cfg_.proc_home[p];
    status_.push_back(mem_.alloc({label_ + ".STATUS[" + std::to_string(p) + "]",
                                  2, -1, false},
                                 Value::scalar(PS_TRY), home));
    current_.push_back(mem_.alloc({label_ + ".current_node[" + std::to_string(p) + "]",
                                   8 * cfg_.word_bits, -1, false},
                                  Value::scalar(kNil), home));
  }
}

int TreeLock::node_at(int pid, int level) const {
  return level_offset_[level] + static_cast<int>(pid / pow_[height_ - level]);
}

int TreeLock::port_at(int pid, int level) const {
  return static_cast<int>((pid / pow_[height_ - 1 - level]) % cfg_.arity);
}

void TreeLock::call_node(Frame& f, int node_id, Method m, int pid,
                         bool abort_sub) {
  int port = port_at(pid, level_of_[node_id]);
  f.child = std::make_unique<Frame>(nodes_[node_id].get(), m, port, abort_sub);
}

bool TreeLock::step(Frame& f, Ctx& ctx) {
  switch (f.method) {
    case Method::Recover: return step_recover(f, ctx);
    case Method::Try: return step_try(f, ctx);
    case Method::Exit: return step_exit(f, ctx);
  }
  throw HarnessFault(label_ + ": bad method");
}

bool TreeLock::step_recover(Frame& f, Ctx& ctx) {
  int64_t st = mem_.read(status_[f.port], ctx.pid).s();
  switch (st) {
    case PS_TRY: f.ret = RET_TRY; break;
    case PS_CS: f.ret = RET_CS; break;
    case PS_EXIT: f.ret = RET_EXIT; break;
    default: throw HarnessFault(label_ + ": bad STATUS value");
  }
  return true;
}

bool TreeLock::step_try(Frame& f, Ctx& ctx) {
  const int p = f.port;
  switch (f.pc) {
    case ENTRY:
    case A_READ_CUR: {
      int64_t x = mem_.read(current_[p], ctx.pid).s();
      f.r[R_X] = (x == kNil) ? node_at(p, height_ - 1) : x;
      call_node(f, static_cast<int>(f.r[R_X]), Method::Recover, p, false);
      f.pc = A_REC_DONE;
      return false;
    }
    case A_REC_DONE: {
      int node = static_cast<int>(f.r[R_X]);
      int cr = f.child_ret;
      f.child_ret = RET_NONE;  // consumed; keep the register file canonical
      if (cr == RET_TRY) {
        call_node(f, node, Method::Try, p, false);
        f.pc = A_TRY_DONE;
        return false;
      }
      if (cr == RET_EXIT) {
        // A prior abort descent crashed mid-release of this node: finish
        // the release, then treat the node as free again.
        call_node(f, node, Method::Exit, p, false);
        f.pc = A_EXIT_DONE;
        return false;
      }
      // RET_CS: the node lock is already held (crash after acquisition).
      mem_.write(current_[p], ctx.pid, Value::scalar(node));
      if (ctx.abort_signal) {
        f.child = std::make_unique<Frame>(this, Method::Exit, p, true);
        f.pc = A_ABORT_DONE;
        return false;
      }
      int level = level_of_[node];
      if (level == 0) {
        f.pc = A_SET_CS;
        return false;
      }
      f.r[R_X] = node_at(p, level - 1);
      call_node(f, static_cast<int>(f.r[R_X]), Method::Recover, p, false);
      f.pc = A_REC_DONE;
      return false;
    }
    case A_TRY_DONE: {
      int cr = f.child_ret;
      f.child_ret = RET_NONE;
      if (cr == RET_FALSE) {
        // Node lock honoured the abort; release whatever is still held.
        f.child = std::make_unique<Frame>(this, Method::Exit, p, true);
        f.pc = A_ABORT_DONE;
        return false;
      }
      int node = static_cast<int>(f.r[R_X]);
      mem_.write(current_[p], ctx.pid, Value::scalar(node));
      if (ctx.abort_signal) {
        f.child = std::make_unique<Frame>(this, Method::Exit, p, true);
        f.pc = A_ABORT_DONE;
        return false;
      }
      int level = level_of_[node];
      if (level == 0) {
        f.pc = A_SET_CS;
        return false;
      }
      f.r[R_X] = node_at(p, level - 1);
      call_node(f, static_cast<int>(f.r[R_X]), Method::Recover, p, false);
      f.pc = A_REC_DONE;
      return false;
    }
    case A_EXIT_DONE: {
      call_node(f, static_cast<int>(f.r[R_X]), Method::Recover, p, false);
      f.pc = A_REC_DONE;
      return false;
    }
    case A_SET_CS: {
      mem_.write(status_[p], ctx.pid, Value::scalar(PS_CS));
      f.ret = RET_TRUE;
      return true;
    }
    case A_ABORT_DONE: {
      f.ret = RET_FALSE;
      return true;
    }
  }
  throw HarnessFault(label_ + ": bad Try pc");
}

bool TreeLock::step_exit(Frame& f, Ctx& ctx) {
  const int p = f.port;
  auto below = [&](int node) -> int {
    int level = level_of_[node];
    return level == height_ - 1 ? kNil : node_at(p, level + 1);
  };
  auto step_down = [&](int node) {
    int nxt = below(node);
    mem_.write(current_[p], ctx.pid, Value::scalar(nxt));
    if (nxt == kNil) {
      f.pc = E_SET_TRY;
    } else {
      f.r[R_X] = nxt;
      call_node(f, nxt, Method::Recover, p, false);
      f.pc = E_REC_DONE;
    }
  };
  switch (f.pc) {
    case ENTRY:
    case E_READ_STATUS:
    case E_SET_EXIT: {
      // Abort descents run with STATUS still at TRY; every other entry
      // (fresh exit, crash re-run) commits EXIT as the very first step so
      // a recovery never lands behind the section boundary.
      if (f.abort_arg) {
        f.pc = E_READ_CUR;
        return false;
      }
      mem_.write(status_[p], ctx.pid, Value::scalar(PS_EXIT));
      f.pc = E_READ_CUR;
      return false;
    }
    case E_READ_CUR: {
      int64_t x = mem_.read(current_[p], ctx.pid).s();
      if (x == kNil) {
        f.pc = E_SET_TRY;
        return false;
      }
      f.r[R_X] = x;
      call_node(f, static_cast<int>(x), Method::Recover, p, false);
      f.pc = E_REC_DONE;
      return false;
    }
    case E_REC_DONE: {
      int node = static_cast<int>(f.r[R_X]);
      int cr = f.child_ret;
      f.child_ret = RET_NONE;
      if (cr == RET_TRY) {
        // Already released (abort descent crashed after the release but
        // before current_node moved down).
        step_down(node);
        return false;
      }
      call_node(f, node, Method::Exit, p, false);
      f.pc = E_EXIT_DONE;
      return false;
    }
    case E_EXIT_DONE: {
      step_down(static_cast<int>(f.r[R_X]));
      return false;
    }
    case E_SET_TRY: {
      mem_.write(status_[p], ctx.pid, Value::scalar(PS_TRY));
      f.ret = RET_NONE;
      return true;
    }
  }
  throw HarnessFault(label_ + ": bad Exit pc");
}

}  // namespace rme
