#pragma once

#include <array>
#include <memory>

#include "memory.hpp"

namespace rme {

enum class Method : uint8_t { Recover, Try, Exit };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Recover: return "Recover";
    case Method::Try: return "Try";
    case Method::Exit: return "Exit";
  }
  return "?";
}

// Method return values. Recover returns a section label; Try returns
// TRUE (CS entered) or FALSE (abort honoured); Exit returns nothing.
enum Ret : int {
  RET_NONE = 0,
  RET_FALSE = 1,
  RET_TRUE = 2,
  // Recover outcomes: which section the crash interrupted.
  RET_REM = 3,   // Remainder / clean: caller starts a fresh Try
  RET_TRY = 4,   // crashed inside Try: caller re-runs Try
  RET_CS = 5,    // crashed in the CS: caller owns the lock
  RET_EXIT = 6,  // crashed inside Exit: caller runs Exit
};

class Lock;

// One in-progress method invocation. Registers are volatile: a crash
// discards the whole frame stack. Nested lock calls push a child frame;
// the driver always steps the deepest frame and the parent consumes
// child->ret when the child completes.
struct Frame {
  Lock* lock = nullptr;
  Method method = Method::Try;
  int port = 0;
  bool abort_arg = false;
  int pc = 0;
  std::array<int64_t, 12> r{};  // volatile locals
  int ret = RET_NONE;
  int child_ret = RET_NONE;  // filled by the driver when a child completes
  std::unique_ptr<Frame> child;

  Frame() = default;
  Frame(Lock* l, Method m, int port_, bool abort_arg_ = false)
      : lock(l), method(m), port(port_), abort_arg(abort_arg_) {}

  Frame* deepest() {
    Frame* f = this;
    while (f->child) f = f->child.get();
    return f;
  }
  std::unique_ptr<Frame> clone() const;
  void hash_into(uint64_t& h) const;
};

// Per-step context handed to the lock by the driver.
struct Ctx {
  Memory& mem;
  int pid;
  bool abort_signal = false;  // sticky request from the environment
};

// A lock algorithm as a deterministic step machine. step() performs at
// most one charged shared-memory operation and advances frame.pc; it
// returns true when the method finished (result in frame.ret).
class Lock {
 public:
  virtual ~Lock() = default;
  virtual bool step(Frame& f, Ctx& ctx) = 0;
  virtual std::string name() const = 0;
};

inline std::unique_ptr<Frame> Frame::clone() const {
  auto c = std::make_unique<Frame>(lock, method, port, abort_arg);
  c->pc = pc;
  c->r = r;
  c->ret = ret;
  c->child_ret = child_ret;
  if (child) c->child = child->clone();
  return c;
}

inline void Frame::hash_into(uint64_t& h) const {
  hash_combine(h, reinterpret_cast<uintptr_t>(lock));
  hash_combine(h, (static_cast<uint64_t>(method) << 40) ^
                      (static_cast<uint64_t>(port) << 20) ^
                      (static_cast<uint64_t>(abort_arg) << 16) ^
                      static_cast<uint64_t>(pc));
  for (int64_t v : r) hash_combine(h, static_cast<uint64_t>(v));
  hash_combine(h, static_cast<uint64_t>(ret) << 8 ^ static_cast<uint64_t>(child_ret));
  if (child) child->hash_into(h);
}

}  // namespace rme
