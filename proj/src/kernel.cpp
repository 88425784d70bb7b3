#include "kernel.hpp"

namespace rme {

ProcState& ProcState::operator=(const ProcState& o) {
  if (this == &o) return *this;
  phase = o.phase;
  frame = o.frame ? o.frame->clone() : nullptr;
  abort_signalled = o.abort_signalled;
  expect_recover = o.expect_recover;
  cs_reentry_owed = o.cs_reentry_owed;
  sp_id = o.sp_id;
  passage_id = o.passage_id;
  crashes_in_sp = o.crashes_in_sp;
  rmr_cc_passage = o.rmr_cc_passage;
  rmr_dsm_passage = o.rmr_dsm_passage;
  rmr_cc_sp = o.rmr_cc_sp;
  rmr_dsm_sp = o.rmr_dsm_sp;
  sp_completed = o.sp_completed;
  steps_in_sp = o.steps_in_sp;
  steps_in_section = o.steps_in_section;
  steps_since_abort = o.steps_since_abort;
  return *this;
}

Driver::Driver(Memory& mem, Lock* lock, std::vector<int> port_of)
    : mem_(mem), lock_(lock), port_of_(std::move(port_of)),
      procs_(port_of_.size()) {
  mem_.set_sink([this](const MemOpRecord& r) { on_memop(r); });
  // Ground truth for slot reuse: a volatile register holding an address
  // keeps the word reachable.
  mem_.set_ref_probe([this](int64_t addr) {
    for (const ProcState& p : procs_)
      for (const Frame* f = p.frame.get(); f; f = f->child.get())
        for (int64_t r : f->r)
          if (r == addr) return true;
    return false;
  });
}

Driver::~Driver() {
  mem_.set_sink(nullptr);
  mem_.set_ref_probe(nullptr);
}

void Driver::emit(Event e) {
  e.step_no = step_no_;
  if (e.pid >= 0) {
    e.sp_id = procs_[e.pid].sp_id;
    e.passage_id = procs_[e.pid].passage_id;
  }
  if (obs_) obs_->on_event(e);
  if (trace_) trace_->push_back(std::move(e));
}

void Driver::emit_section(int pid, Event::Kind kind, Section s,
                          const Frame* f, int depth, int ret) {
  if (!trace_ && !obs_) return;
  Event e;
  e.kind = kind;
  e.pid = pid;
  e.section = s;
  e.depth = depth;
  if (f) {
    e.lock = f->lock->name();
    e.port = f->port;
  } else {
    e.lock = lock_->name();
    e.port = port_of_[pid];
  }
  e.ret = ret;
  // Distinguishes an abort-flow Exit subroutine (part of the Try section)
  // from a real Exit section for the well-formedness checker.
  if (f && f->method == Method::Exit) e.aborted = f->abort_arg;
  emit(std::move(e));
}

void Driver::on_memop(const MemOpRecord& r) {
  ProcState& p = procs_.at(r.pid);
  p.rmr_cc_passage += r.cost_cc;
  p.rmr_dsm_passage += r.cost_dsm;
  p.rmr_cc_sp += r.cost_cc;
  p.rmr_dsm_sp += r.cost_dsm;
  if (trace_ || obs_) {
    Event e;
    e.kind = Event::MEMOP;
    e.pid = r.pid;
    e.mem = r;
    e.label = mem_.meta(r.addr).label;
    emit(std::move(e));
  }
}

bool Driver::all_idle() const {
  for (const ProcState& p : procs_)
    if (p.phase != Phase::Idle) return false;
  return true;
}

int Driver::in_cs() const {
  for (int i = 0; i < nprocs(); ++i)
    if (procs_[i].phase == Phase::Cs) return i;
  return -1;
}

void Driver::arrive(int pid) {
  ProcState& p = procs_.at(pid);
  if (p.phase != Phase::Idle)
    throw HarnessFault("arrive: process " + std::to_string(pid) + " not idle");
  p.sp_id = next_sp_++;
  p.passage_id = next_passage_++;
  p.crashes_in_sp = 0;
  p.rmr_cc_passage = p.rmr_dsm_passage = 0;
  p.rmr_cc_sp = p.rmr_dsm_sp = 0;
  p.steps_in_sp = p.steps_in_section = 0;
  p.steps_since_abort = -1;
  p.expect_recover = Section::Try;
  p.phase = Phase::Recover;
  p.frame = std::make_unique<Frame>(lock_, Method::Recover, port_of_[pid]);
  Event e;
  e.kind = Event::SP_START;
  e.pid = pid;
  emit(std::move(e));
  emit_section(pid, Event::SECTION_ENTER, Section::Recover, p.frame.get(), 0, 0);
}

void Driver::enter_cs(int pid) {
  ProcState& p = procs_[pid];
  for (int q = 0; q < nprocs(); ++q) {
    if (q == pid) continue;
    if (procs_[q].phase == Phase::Cs && obs_)
      obs_->on_violation("mutual-exclusion",
                         "processes " + std::to_string(pid) + " and " +
                             std::to_string(q) + " are both in the CS");
    if (procs_[q].cs_reentry_owed && obs_)
      obs_->on_violation("cs-reentry",
                         "process " + std::to_string(pid) +
                             " entered the CS while process " +
                             std::to_string(q) +
                             " crashed in the CS and has not re-entered");
  }
  p.cs_reentry_owed = false;
  p.phase = Phase::Cs;
  p.frame.reset();
  p.steps_in_section = 0;
  emit_section(pid, Event::SECTION_ENTER, Section::Cs, nullptr, 0, 0);
  if (obs_) obs_->on_cs_enter(pid);
}

void Driver::start_exit(int pid) {
  ProcState& p = procs_[pid];
  p.phase = Phase::Exit;
  p.frame = std::make_unique<Frame>(lock_, Method::Exit, port_of_[pid]);
  p.steps_in_section = 0;
  emit_section(pid, Event::SECTION_ENTER, Section::Exit, p.frame.get(), 0, 0);
}

void Driver::end_sp(int pid, bool aborted) {
  ProcState& p = procs_[pid];
  if (obs_) {
    obs_->on_passage_end(pid, p.rmr_cc_passage, p.rmr_dsm_passage, false);
    obs_->on_sp_end(pid, p.crashes_in_sp, p.rmr_cc_sp, p.rmr_dsm_sp, aborted,
                    p.steps_in_sp);
  }
  Event e;
  e.kind = Event::SP_END;
  e.pid = pid;
  e.aborted = aborted;
  emit(std::move(e));
  p.phase = Phase::Idle;
  p.frame.reset();
  p.abort_signalled = false;
  p.steps_since_abort = -1;
  p.sp_completed++;
}

void Driver::finish_root(int pid, Frame& root) {
  ProcState& p = procs_[pid];
  switch (root.method) {
    case Method::Recover: {
      emit_section(pid, Event::SECTION_LEAVE, Section::Recover, &root, 0,
                   root.ret);
      if (obs_) obs_->on_recover_done(pid, root.ret, p.expect_recover);
      int ret = root.ret;
      p.frame.reset();
      p.steps_in_section = 0;
      if (ret == RET_CS) {
        enter_cs(pid);
      } else if (ret == RET_EXIT) {
        start_exit(pid);
      } else {
        p.phase = Phase::Try;
        p.frame = std::make_unique<Frame>(lock_, Method::Try, port_of_[pid]);
        emit_section(pid, Event::SECTION_ENTER, Section::Try, p.frame.get(), 0, 0);
      }
      break;
    }
    case Method::Try: {
      int ret = root.ret;
      emit_section(pid, Event::SECTION_LEAVE, Section::Try, &root, 0, ret);
      p.frame.reset();
      if (ret == RET_TRUE) {
        enter_cs(pid);
      } else {
        end_sp(pid, /*aborted=*/true);
      }
      break;
    }
    case Method::Exit: {
      emit_section(pid, Event::SECTION_LEAVE, Section::Exit, &root, 0, root.ret);
      p.frame.reset();
      end_sp(pid, /*aborted=*/false);
      break;
    }
  }
}

void Driver::step(int pid) {
  ProcState& p = procs_.at(pid);
  if (p.phase == Phase::Idle)
    throw HarnessFault("step: process " + std::to_string(pid) + " is idle");
  ++step_no_;
  ++p.steps_in_sp;
  ++p.steps_in_section;
  if (p.steps_since_abort >= 0) ++p.steps_since_abort;

  if (p.phase == Phase::Cs) {
    // Leaving the CS and running the first Exit instruction is one step:
    // there is no schedulable point "in Exit" before the algorithm has
    // executed anything, so a crash in Exit always finds the section
    // boundary already persisted.
    emit_section(pid, Event::SECTION_LEAVE, Section::Cs, nullptr, 0, 0);
    start_exit(pid);
  }

  Frame* d = p.frame->deepest();
  int depth = 0;
  for (Frame* f = p.frame.get(); f != d; f = f->child.get()) ++depth;
  Ctx ctx{mem_, pid, p.abort_signalled};
  bool done = d->lock->step(*d, ctx);
  if (!done) {
    if (d->child) {
      // A nested method call was pushed this step.
      emit_section(pid, Event::SECTION_ENTER,
                   d->child->method == Method::Try      ? Section::Try
                   : d->child->method == Method::Exit   ? Section::Exit
                                                        : Section::Recover,
                   d->child.get(), depth + 1, 0);
    }
    return;
  }
  if (d == p.frame.get()) {
    finish_root(pid, *d);
    return;
  }
  Frame* parent = p.frame.get();
  while (parent->child.get() != d) parent = parent->child.get();
  emit_section(pid, Event::SECTION_LEAVE,
               d->method == Method::Try      ? Section::Try
               : d->method == Method::Exit   ? Section::Exit
                                             : Section::Recover,
               d, depth, d->ret);
  parent->child_ret = d->ret;
  parent->child.reset();
}

void Driver::crash(int pid) {
  ProcState& p = procs_.at(pid);
  if (p.phase == Phase::Idle)
    throw HarnessFault("crash: process " + std::to_string(pid) + " is idle");
  ++step_no_;
  if (obs_)
    obs_->on_passage_end(pid, p.rmr_cc_passage, p.rmr_dsm_passage, true);
  switch (p.phase) {
    case Phase::Try: p.expect_recover = Section::Try; break;
    case Phase::Cs:
      p.expect_recover = Section::Cs;
      p.cs_reentry_owed = true;
      break;
    case Phase::Exit: p.expect_recover = Section::Exit; break;
    default: break;  // crash inside Recover keeps the previous expectation
  }
  p.crashes_in_sp++;
  p.rmr_cc_passage = p.rmr_dsm_passage = 0;
  p.passage_id = next_passage_++;
  if (p.steps_since_abort >= 0) p.steps_since_abort = 0;
  p.steps_in_section = 0;
  Event e;
  e.kind = Event::CRASH;
  e.pid = pid;
  emit(std::move(e));
  p.phase = Phase::Recover;
  p.frame = std::make_unique<Frame>(lock_, Method::Recover, port_of_[pid]);
  emit_section(pid, Event::SECTION_ENTER, Section::Recover, p.frame.get(), 0, 0);
}

void Driver::signal_abort(int pid) {
  ProcState& p = procs_.at(pid);
  if (p.phase == Phase::Idle)
    throw HarnessFault("abort: process " + std::to_string(pid) + " is idle");
  if (p.abort_signalled) return;
  p.abort_signalled = true;
  p.steps_since_abort = 0;
  Event e;
  e.kind = Event::ABORT_SIGNAL;
  e.pid = pid;
  emit(std::move(e));
}

void Driver::apply(const Action& a) {
  switch (a.kind) {
    case Action::ARRIVE: arrive(a.pid); return;
    case Action::STEP: step(a.pid); return;
    case Action::CRASH: crash(a.pid); return;
    case Action::ABORT: signal_abort(a.pid); return;
  }
}

bool Driver::legal(const Action& a) const {
  if (a.pid < 0 || a.pid >= nprocs()) return false;
  const ProcState& p = procs_[a.pid];
  switch (a.kind) {
    case Action::ARRIVE: return p.phase == Phase::Idle;
    case Action::STEP: return p.phase != Phase::Idle;
    case Action::CRASH: return p.phase != Phase::Idle;
    case Action::ABORT: return p.phase != Phase::Idle && !p.abort_signalled;
  }
  return false;
}

Driver::Snapshot Driver::snapshot() const {
  Snapshot s;
  s.mem = mem_.snapshot();
  s.procs = procs_;
  s.step_no = step_no_;
  s.next_sp = next_sp_;
  s.next_passage = next_passage_;
  return s;
}

void Driver::restore(const Snapshot& s) {
  mem_.restore(s.mem);
  procs_ = s.procs;
  step_no_ = s.step_no;
  next_sp_ = s.next_sp;
  next_passage_ = s.next_passage;
}

uint64_t Driver::digest() const {
  uint64_t h = 0x51abc0deULL;
  // Safety-relevant state only: word values, homes, frames and protocol
  // flags. Cache validity and accumulated cost counters are measurement
  // state; merging across them loses no reachable configuration and no
  // safety verdict, only alternative cost profiles of explored states
  // (randomized schedules cover those when maxima are measured).
  mem_.hash_into(h, /*with_caches=*/false);
  for (const ProcState& p : procs_) {
    hash_combine(h, static_cast<uint64_t>(p.phase));
    hash_combine(h, (static_cast<uint64_t>(p.abort_signalled) << 3) |
                        (static_cast<uint64_t>(p.cs_reentry_owed) << 2) |
                        static_cast<uint64_t>(p.expect_recover));
    // The super-passage counter is excluded too: like the crash and abort
    // budgets, it only limits which driver actions remain available, and
    // the explorer accounts for that with spent-budget dominance.
    // Accumulated cost counters (RMRs, crash count per super-passage,
    // steps since an abort signal) are deliberately excluded: the
    // algorithms cannot read them, so they never influence reachability.
    hash_combine(h, static_cast<uint64_t>(p.steps_since_abort >= 0));
    if (p.frame) p.frame->hash_into(h);
  }
  return h;
}

}  // namespace rme
