#include "wellformed.hpp"

#include "lock.hpp"

namespace rme {

namespace {

std::string where(const Event& e) {
  return e.lock + " port " + std::to_string(e.port) + " pid " +
         std::to_string(e.pid);
}

}  // namespace

void WfStream::close(const std::string& lock, int pid, LpState& lp) {
  auto it = occupied_.find({lock, lp.port});
  if (it != occupied_.end() && it->second == pid) occupied_.erase(it);
  lp = LpState{};
}

std::optional<WfViolation> WfStream::feed(const Event& e, size_t index) {
  std::optional<WfViolation> out;
  auto fail = [&](const char* prop, std::string what) {
    if (!out) out = WfViolation{prop, std::move(what), index};
  };
  auto occupy = [&](const Event& ev) {
    auto key = std::make_pair(ev.lock, ev.port);
    auto it = occupied_.find(key);
    if (it != occupied_.end() && it->second != ev.pid)
      fail("no-concurrent-super-passages",
           where(ev) + " overlaps pid " + std::to_string(it->second));
    occupied_[key] = ev.pid;
  };

  if (e.kind == Event::CRASH) {
    for (auto& [key, lp] : lps_) {
      if (key.second != e.pid || !lp.open) continue;
      if (lp.in_try) lp.crashed_in = CI_TRY;
      else if (lp.in_exit) lp.crashed_in = CI_EXIT;
      else if (lp.holding) lp.crashed_in = CI_CS;
      lp.in_try = lp.in_exit = false;
      lp.need_recover = true;
    }
    return out;
  }
  if (e.kind != Event::SECTION_ENTER && e.kind != Event::SECTION_LEAVE)
    return out;
  LpState& lp = lps_[{e.lock, e.pid}];
  auto check_port = [&] {
    if (lp.open && lp.port != e.port)
      fail("constant-port-usage",
           where(e) + " previously used port " + std::to_string(lp.port));
  };

  if (e.kind == Event::SECTION_ENTER) {
    switch (e.section) {
      case Section::Recover:
        if (!lp.open) {
          lp.open = true;
          lp.port = e.port;
        }
        check_port();
        lp.need_recover = false;
        break;
      case Section::Try:
        if (lp.need_recover)
          fail("recover-invocation",
               where(e) + " ran Try before Recover after a crash");
        if (!lp.open) {
          lp.open = true;
          lp.port = e.port;
        }
        check_port();
        if (lp.tried && lp.crashed_in != CI_TRY)
          fail("try-invocation",
               where(e) + " re-invoked Try without an interrupting crash");
        lp.tried = true;
        lp.in_try = true;
        if (lp.crashed_in == CI_TRY) lp.crashed_in = CI_NONE;
        occupy(e);
        break;
      case Section::Cs:
        if (!lp.holding && lp.crashed_in != CI_CS)
          fail("cs-invocation",
               where(e) + " entered the CS without Try returning TRUE");
        lp.holding = true;
        break;
      case Section::Exit:
        if (e.aborted) break;  // abort-flow subroutine: still the Try section
        if (lp.need_recover)
          fail("recover-invocation",
               where(e) + " ran Exit before Recover after a crash");
        if (!lp.open) {
          lp.open = true;
          lp.port = e.port;
        }
        check_port();
        if (!lp.holding && lp.crashed_in != CI_EXIT)
          fail("exit-invocation", where(e) + " invoked Exit outside the CS");
        lp.in_exit = true;
        occupy(e);
        break;
    }
  } else {  // SECTION_LEAVE
    switch (e.section) {
      case Section::Recover:
        if (e.ret == RET_CS || e.ret == RET_EXIT) {
          if (e.ret == RET_CS) lp.holding = true;
          else lp.crashed_in = CI_EXIT;
          occupy(e);
        } else if (!lp.holding && !lp.in_try && !lp.in_exit &&
                   lp.crashed_in == CI_NONE && !lp.tried) {
          // Recover-only probe of a clean lock: not a super-passage.
          close(e.lock, e.pid, lp);
        }
        break;
      case Section::Try:
        lp.in_try = false;
        if (e.ret == RET_TRUE) lp.holding = true;
        else close(e.lock, e.pid, lp);  // honoured abort ends the SP
        break;
      case Section::Cs:
        break;
      case Section::Exit:
        if (e.aborted) break;
        close(e.lock, e.pid, lp);
        break;
    }
  }
  return out;
}

uint64_t WfStream::hash() const {
  uint64_t h = 0x57f0a11dULL;
  std::hash<std::string> hs;
  for (const auto& [key, lp] : lps_) {
    if (!lp.open) continue;
    hash_combine(h, hs(key.first));
    hash_combine(h, static_cast<uint64_t>(key.second));
    hash_combine(h, (static_cast<uint64_t>(lp.port + 1) << 16) |
                        (static_cast<uint64_t>(lp.tried) << 6) |
                        (static_cast<uint64_t>(lp.in_try) << 5) |
                        (static_cast<uint64_t>(lp.in_exit) << 4) |
                        (static_cast<uint64_t>(lp.holding) << 3) |
                        (static_cast<uint64_t>(lp.need_recover) << 2) |
                        lp.crashed_in);
  }
  for (const auto& [key, pid] : occupied_) {
    hash_combine(h, hs(key.first));
    hash_combine(h, (static_cast<uint64_t>(key.second) << 20) ^
                        static_cast<uint64_t>(pid));
  }
  return h;
}

WfVerdict check_wellformed(const Trace& trace) {
  WfVerdict v;
  WfStream wf;
  for (size_t i = 0; i < trace.size(); ++i) {
    if (auto viol = wf.feed(trace[i], i)) {
      v.ok = false;
      v.violations.push_back(std::move(*viol));
    }
  }
  return v;
}

}  // namespace rme
