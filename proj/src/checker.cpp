#include "checker.hpp"

#include <array>
#include <bit>
#include <random>
#include <unordered_map>

namespace rme {

namespace {

// Subscribes to driver milestones and evaluates every registered
// property/bound, recording failures with the adversary decision list
// that reached them. Bounded state (copyable) so DFS can roll it back.
class Monitor : public DriverObserver {
 public:
  struct State {
    WfStream wf;
    uint64_t insp = 0;  // bitmask of processes inside super-passages
    std::vector<int> k_sp, k_passage;
  };

  Monitor(Driver& d, const ExploreConfig& cfg, Report& rep,
          const std::vector<Action>* path)
      : d_(d), cfg_(cfg), rep_(rep), path_(path) {
    st_.k_sp.assign(d.nprocs(), 0);
    st_.k_passage.assign(d.nprocs(), 0);
  }

  const State& state() const { return st_; }
  void set_state(State s) { st_ = std::move(s); }

  uint64_t hash() const {
    // Measured point-contention (k_sp/k_passage) is cost-like state the
    // algorithms cannot observe; like RMR counters it stays out of the
    // dedup key and is evaluated on explored representatives.
    uint64_t h = st_.wf.hash();
    hash_combine(h, st_.insp);
    return h;
  }

  void on_violation(const std::string& prop, const std::string& what) override {
    fail(prop, what);
  }

  void on_recover_done(int pid, int ret, Section expected) override {
    int want = expected == Section::Cs    ? RET_CS
               : expected == Section::Exit ? RET_EXIT
                                           : RET_TRY;
    if (ret != want)
      fail("well-behaved-recover",
           "pid " + std::to_string(pid) + " Recover returned " +
               std::to_string(ret) + " but the last crash was in " +
               section_name(expected));
  }

  void on_passage_end(int pid, int64_t cc, int64_t dsm,
                      bool ended_by_crash) override {
    if (ended_by_crash) return;
    rep_.max_passage_cc = std::max(rep_.max_passage_cc, cc);
    rep_.max_passage_dsm = std::max(rep_.max_passage_dsm, dsm);
    int k = st_.k_passage[pid];
    rep_.max_k = std::max(rep_.max_k, k);
    auto& cur = rep_.max_passage_cc_by_k[k];
    cur = std::max(cur, cc);
    const Bounds& b = cfg_.bounds;
    if (b.passage_cc >= 0 && cc > b.passage_cc)
      fail("passage-rmr-cap", "pid " + std::to_string(pid) +
                                  " crash-free passage cost " +
                                  std::to_string(cc) + " RMRs (CC), cap " +
                                  std::to_string(b.passage_cc));
    if (b.passage_dsm >= 0 && dsm > b.passage_dsm)
      fail("passage-rmr-cap", "pid " + std::to_string(pid) +
                                  " crash-free passage cost " +
                                  std::to_string(dsm) + " RMRs (DSM), cap " +
                                  std::to_string(b.passage_dsm));
    if (b.adapt_c1 >= 0) {
      int64_t cap = b.adapt_c1 * std::min<int64_t>(std::max(k, 1),
                                                   b.adapt_ports) +
                    b.adapt_c0;
      if (cc > cap)
        fail("adaptivity",
             "pid " + std::to_string(pid) + " passage cost " +
                 std::to_string(cc) + " RMRs with K=" + std::to_string(k) +
                 ", cap " + std::to_string(cap));
    }
  }

  void on_sp_end(int pid, int crashes, int64_t cc, int64_t dsm, bool aborted,
                 int64_t steps) override {
    rep_.sps_completed++;
    auto& mc = rep_.max_sp_cc_by_f[crashes];
    mc = std::max(mc, cc);
    auto& md = rep_.max_sp_dsm_by_f[crashes];
    md = std::max(md, dsm);
    const Bounds& b = cfg_.bounds;
    if (b.sp_a >= 0) {
      int64_t cap = b.sp_a + b.sp_b * crashes;
      if (std::max(cc, dsm) > cap)
        fail("super-passage-rmr-cap",
             "pid " + std::to_string(pid) + " super-passage cost " +
                 std::to_string(std::max(cc, dsm)) + " RMRs with F=" +
                 std::to_string(crashes) + ", cap " + std::to_string(cap));
    }
    if (b.sp_steps >= 0 && !aborted && steps > b.sp_steps)
      fail("bounded-liveness",
           "pid " + std::to_string(pid) + " super-passage took " +
               std::to_string(steps) + " own steps, cap " +
               std::to_string(b.sp_steps));
  }

  void on_event(const Event& e) override {
    if (cfg_.check_wf) {
      if (auto viol = st_.wf.feed(e))
        fail(std::string("well-formedness/") + viol->property, viol->what);
    }
    switch (e.kind) {
      case Event::SP_START: {
        st_.insp |= 1ULL << e.pid;
        int cnt = std::popcount(st_.insp);
        st_.k_sp[e.pid] = 0;
        st_.k_passage[e.pid] = 0;
        for (int q = 0; q < d_.nprocs(); ++q)
          if (st_.insp >> q & 1) {
            st_.k_sp[q] = std::max(st_.k_sp[q], cnt);
            st_.k_passage[q] = std::max(st_.k_passage[q], cnt);
          }
        break;
      }
      case Event::SP_END:
        st_.insp &= ~(1ULL << e.pid);
        break;
      case Event::CRASH:
        st_.k_passage[e.pid] = std::popcount(st_.insp);
        break;
      case Event::MEMOP: {
        if (!cfg_.bounds.witness || e.mem.op != OpKind::Cas || e.mem.cas_ok)
          break;
        size_t pos = e.label.find(".K_OWNERS[");
        if (pos == std::string::npos) break;
        int slot = std::atoi(e.label.c_str() + pos + 10);
        if (st_.k_sp[e.pid] < slot + 1)
          fail("point-contention-witness",
               "pid " + std::to_string(e.pid) + " lost the CAS on capture slot " +
                   std::to_string(slot) + " but measured point contention is " +
                   std::to_string(st_.k_sp[e.pid]));
        break;
      }
      case Event::SECTION_LEAVE:
        if (e.section == Section::Try && e.depth == 0 &&
            cfg_.bounds.abort_steps >= 0) {
          int64_t s = d_.proc(e.pid).steps_since_abort;
          if (s > cfg_.bounds.abort_steps)
            fail("bounded-abort",
                 "pid " + std::to_string(e.pid) + " took " + std::to_string(s) +
                     " own steps from abort signal to Try return, cap " +
                     std::to_string(cfg_.bounds.abort_steps));
        }
        break;
      default:
        break;
    }
  }

 private:
  void fail(std::string prop, std::string what) {
    rep_.merge_failure(
        {std::move(prop), std::move(what), path_ ? *path_ : std::vector<Action>{}});
  }

  Driver& d_;
  const ExploreConfig& cfg_;
  Report& rep_;
  const std::vector<Action>* path_;
  State st_;
};

int arrivals_left(const Driver& d, const ExploreConfig& cfg, int pid) {
  const ProcState& p = d.proc(pid);
  int used = p.sp_completed + (p.phase != Phase::Idle ? 1 : 0);
  return cfg.max_sps_per_proc - used;
}

void run_terminal_check(Driver& d, const ExploreConfig& cfg, Report& rep,
                        const std::vector<Action>& path) {
  if (!cfg.terminal_check) return;
  std::string err = cfg.terminal_check(d.mem());
  if (!err.empty()) rep.merge_failure({"terminal-state", err, path});
}

}  // namespace

void Report::merge_failure(Failure f) {
  ok = false;
  // Keep the first counterexample per property; later ones add no signal.
  for (const Failure& g : failures)
    if (g.property == f.property) return;
  failures.push_back(std::move(f));
}

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["ok"] = ok;
  j["exhaustive"] = exhaustive;
  j["states"] = states;
  j["dedup_hits"] = dedup_hits;
  j["actions"] = actions;
  j["super_passages"] = sps_completed;
  j["max_passage_rmr"] = {{"cc", max_passage_cc}, {"dsm", max_passage_dsm}};
  nlohmann::json by_f = nlohmann::json::object();
  for (auto& [f, v] : max_sp_cc_by_f) {
    by_f[std::to_string(f)] = {{"cc", v}, {"dsm", max_sp_dsm_by_f.at(f)}};
  }
  j["max_sp_rmr_by_crashes"] = by_f;
  nlohmann::json by_k = nlohmann::json::object();
  for (auto& [k, v] : max_passage_cc_by_k) by_k[std::to_string(k)] = v;
  j["max_passage_cc_by_k"] = by_k;
  j["max_point_contention"] = max_k;
  j["failures"] = nlohmann::json::array();
  for (const Failure& f : failures)
    j["failures"].push_back({{"property", f.property},
                             {"what", f.what},
                             {"actions", actions_to_json(f.actions)}});
  return j;
}

Report explore(Driver& d, const ExploreConfig& cfg) {
  Report rep;
  std::vector<Action> path;
  Monitor mon(d, cfg, rep, &path);
  d.set_observer(&mon);

  auto gen_actions = [&](int crashes, int aborts) {
    std::vector<Action> as;
    for (int pid = 0; pid < d.nprocs(); ++pid) {
      const ProcState& p = d.proc(pid);
      if (p.phase == Phase::Idle) {
        if (arrivals_left(d, cfg, pid) > 0) as.push_back({Action::ARRIVE, pid});
      } else {
        as.push_back({Action::STEP, pid});
        if (crashes < cfg.max_crashes) as.push_back({Action::CRASH, pid});
        if (aborts < cfg.max_aborts && !p.abort_signalled)
          as.push_back({Action::ABORT, pid});
      }
    }
    return as;
  };
  auto key = [&]() {
    uint64_t h = d.digest();
    hash_combine(h, mon.hash());
    return h;
  };
  // Budget dominance: crash budget, abort budget and each process's
  // remaining arrivals only gate which driver actions stay available, and
  // every gate is monotone in the amount spent. If this machine/monitor
  // state was already explored having spent component-wise no more of
  // every budget, everything reachable now was reachable then, so
  // re-expanding cannot surface a new violation. Each visited digest
  // keeps the set of spent vectors seen, packed as a bitmask over
  // (crashes, aborts, arrivals per process); configurations whose spent
  // grid exceeds 256 cells fall back to exact spent-vector-in-key dedup.
  const int kMaskWords = 4;
  const int c_dim = cfg.max_crashes + 1;
  const int a_dim = cfg.max_aborts + 1;
  const int s_dim = cfg.max_sps_per_proc + 1;
  int64_t grid = int64_t{c_dim} * a_dim;
  for (int pid = 0; pid < d.nprocs() && grid <= kMaskWords * 64; ++pid)
    grid *= s_dim;
  const bool small_grid = grid <= kMaskWords * 64;
  auto spent_index = [&](int crashes, int aborts) {
    int64_t idx = int64_t{crashes} * a_dim + aborts;
    for (int pid = 0; pid < d.nprocs(); ++pid)
      idx = idx * s_dim + d.proc(pid).sp_completed;
    return idx;
  };
  // le_mask[i] = bitmask of all spent vectors component-wise <= vector i.
  std::vector<std::array<uint64_t, 4>> le_mask;
  if (small_grid) {
    auto decode = [&](int64_t idx, std::vector<int>& v) {
      for (int pid = d.nprocs(); pid-- > 0;) {
        v[2 + pid] = static_cast<int>(idx % s_dim);
        idx /= s_dim;
      }
      v[1] = static_cast<int>(idx % a_dim);
      v[0] = static_cast<int>(idx / a_dim);
    };
    le_mask.assign(grid, {});
    std::vector<int> u(2 + d.nprocs()), v(2 + d.nprocs());
    for (int64_t i = 0; i < grid; ++i) {
      decode(i, u);
      for (int64_t j = 0; j <= i; ++j) {
        decode(j, v);
        bool le = true;
        for (size_t k = 0; k < u.size(); ++k) le = le && v[k] <= u[k];
        if (le) le_mask[i][j >> 6] |= uint64_t{1} << (j & 63);
      }
    }
  }
  std::unordered_map<uint64_t, std::array<uint64_t, 4>> visited;
  auto mark = [&](int crashes, int aborts) {
    if (small_grid) {
      int64_t idx = spent_index(crashes, aborts);
      std::array<uint64_t, 4>& bits = visited[key()];
      const std::array<uint64_t, 4>& le = le_mask[idx];
      for (int w = 0; w < kMaskWords; ++w)
        if (bits[w] & le[w]) return false;
      bits[idx >> 6] |= uint64_t{1} << (idx & 63);
      return true;
    }
    uint64_t h = key();
    hash_combine(h, static_cast<uint64_t>(crashes) * 1315423911ULL +
                        static_cast<uint64_t>(aborts));
    for (int pid = 0; pid < d.nprocs(); ++pid)
      hash_combine(h, static_cast<uint64_t>(d.proc(pid).sp_completed));
    return visited.emplace(h, std::array<uint64_t, 4>{}).second;
  };

  struct Node {
    Driver::Snapshot snap;
    Monitor::State mon;
    int crashes, aborts;
    std::vector<Action> acts;
    size_t next = 0;
  };
  std::vector<Node> stack;
  mark(0, 0);
  {
    auto acts = gen_actions(0, 0);
    if (acts.empty()) {
      run_terminal_check(d, cfg, rep, path);
      rep.exhaustive = true;
      d.set_observer(nullptr);
      return rep;
    }
    stack.push_back({d.snapshot(), mon.state(), 0, 0, std::move(acts)});
  }
  bool capped = false;
  while (!stack.empty()) {
    Node& n = stack.back();
    if (n.next >= n.acts.size()) {
      stack.pop_back();
      continue;
    }
    Action a = n.acts[n.next++];
    d.restore(n.snap);
    mon.set_state(n.mon);
    int crashes = n.crashes + (a.kind == Action::CRASH);
    int aborts = n.aborts + (a.kind == Action::ABORT);
    path.resize(stack.size() - 1);
    path.push_back(a);
    d.apply(a);
    rep.actions++;
    if (!mark(crashes, aborts)) {
      rep.dedup_hits++;
      continue;
    }
    if (visited.size() > cfg.max_states) {
      capped = true;
      break;
    }
    auto acts = gen_actions(crashes, aborts);
    if (acts.empty()) {
      run_terminal_check(d, cfg, rep, path);
      continue;
    }
    if (static_cast<int64_t>(stack.size()) >= cfg.max_steps) {
      capped = true;
      continue;
    }
    stack.push_back({d.snapshot(), mon.state(), crashes, aborts, std::move(acts)});
  }
  rep.states = visited.size();
  rep.exhaustive = !capped;
  d.set_observer(nullptr);
  return rep;
}

Report random_run(Driver& d, const ExploreConfig& cfg, Trace* trace) {
  Report rep;
  std::vector<Action> path;
  Monitor mon(d, cfg, rep, &path);
  d.set_observer(&mon);
  if (trace) d.set_trace(trace);

  std::mt19937_64 rng(cfg.seed);
  int crashes = 0, aborts = 0;
  for (int64_t i = 0; i < cfg.max_steps; ++i) {
    std::vector<std::pair<Action, int>> cands;
    for (int pid = 0; pid < d.nprocs(); ++pid) {
      const ProcState& p = d.proc(pid);
      if (p.phase == Phase::Idle) {
        if (arrivals_left(d, cfg, pid) > 0)
          cands.push_back({{Action::ARRIVE, pid}, cfg.w_arrive});
      } else {
        cands.push_back({{Action::STEP, pid}, cfg.w_step});
        if (crashes < cfg.max_crashes)
          cands.push_back({{Action::CRASH, pid}, cfg.w_crash});
        if (aborts < cfg.max_aborts && !p.abort_signalled)
          cands.push_back({{Action::ABORT, pid}, cfg.w_abort});
      }
    }
    if (cands.empty()) break;
    int64_t total = 0;
    for (auto& [a, w] : cands) total += w;
    int64_t pick = static_cast<int64_t>(rng() % static_cast<uint64_t>(total));
    Action chosen = cands.back().first;
    for (auto& [a, w] : cands) {
      if (pick < w) {
        chosen = a;
        break;
      }
      pick -= w;
    }
    if (chosen.kind == Action::CRASH) crashes++;
    if (chosen.kind == Action::ABORT) aborts++;
    path.push_back(chosen);
    d.apply(chosen);
    rep.actions++;
  }

  if (cfg.drain_at_end) {
    // Crash/abort injection over; give every in-flight super-passage a
    // fair schedule to finish, then check the quiescent state.
    int64_t extra = 0;
    while (!d.all_idle() && extra <= cfg.max_steps) {
      for (int pid = 0; pid < d.nprocs(); ++pid)
        if (d.proc(pid).phase != Phase::Idle) {
          path.push_back({Action::STEP, pid});
          d.step(pid);
          rep.actions++;
          extra++;
        }
    }
    if (!d.all_idle())
      rep.merge_failure({"bounded-liveness",
                         "fair drain did not quiesce within " +
                             std::to_string(cfg.max_steps) + " steps",
                         path});
    else
      run_terminal_check(d, cfg, rep, path);
  }
  d.set_observer(nullptr);
  if (trace) d.set_trace(nullptr);
  return rep;
}

Report fair_run(Driver& d, const ExploreConfig& cfg, Trace* trace) {
  Report rep;
  std::vector<Action> path;
  Monitor mon(d, cfg, rep, &path);
  d.set_observer(&mon);
  if (trace) d.set_trace(trace);

  int64_t taken = 0;
  bool live = true;
  while (live) {
    live = false;
    for (int pid = 0; pid < d.nprocs(); ++pid)
      if (d.proc(pid).phase == Phase::Idle && arrivals_left(d, cfg, pid) > 0) {
        path.push_back({Action::ARRIVE, pid});
        d.arrive(pid);
        live = true;
      }
    for (int pid = 0; pid < d.nprocs(); ++pid) {
      if (d.proc(pid).phase == Phase::Idle) continue;
      path.push_back({Action::STEP, pid});
      d.step(pid);
      rep.actions++;
      live = true;
      if (++taken > cfg.max_steps) {
        rep.merge_failure({"bounded-liveness",
                           "round-robin schedule did not quiesce within " +
                               std::to_string(cfg.max_steps) + " steps",
                           path});
        d.set_observer(nullptr);
        if (trace) d.set_trace(nullptr);
        return rep;
      }
    }
  }
  run_terminal_check(d, cfg, rep, path);
  d.set_observer(nullptr);
  if (trace) d.set_trace(nullptr);
  return rep;
}

Report replay(Driver& d, const std::vector<Action>& actions,
              const ExploreConfig& cfg, Trace* trace) {
  Report rep;
  std::vector<Action> path;
  Monitor mon(d, cfg, rep, &path);
  d.set_observer(&mon);
  if (trace) d.set_trace(trace);
  for (const Action& a : actions) {
    if (!d.legal(a)) {
      rep.merge_failure({"replay",
                         std::string("illegal action ") +
                             action_kind_name(a.kind) + " pid " +
                             std::to_string(a.pid),
                         path});
      break;
    }
    path.push_back(a);
    d.apply(a);
    rep.actions++;
  }
  d.set_observer(nullptr);
  if (trace) d.set_trace(nullptr);
  return rep;
}

WfVerdict check_properties(const Trace& t) { return check_wellformed(t); }

}  // namespace rme
