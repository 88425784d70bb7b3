#include "bench.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "config.hpp"

namespace rme {
namespace {

struct Maxima {
  int64_t passage_cc = 0, passage_dsm = 0;
  std::map<int, int64_t> sp_cc_by_f;
  int64_t sps = 0;

  void absorb(const Report& r) {
    passage_cc = std::max(passage_cc, r.max_passage_cc);
    passage_dsm = std::max(passage_dsm, r.max_passage_dsm);
    for (auto& [f, v] : r.max_sp_cc_by_f) {
      auto& slot = sp_cc_by_f[f];
      slot = std::max(slot, v);
    }
    sps += r.sps_completed;
  }
};

// Runs `opt.runs` randomized schedules plus one fair schedule and keeps
// the observed maxima.
Maxima measure(const RunConfig& rc, const BenchOptions& opt) {
  Maxima m;
  for (int i = 0; i <= opt.runs; ++i) {
    Instance inst = build_instance(rc);
    auto drv = inst.make_driver();
    ExploreConfig ec = explore_config(rc);
    ec.seed = opt.seed + static_cast<uint64_t>(i) * 0x9e3779b97f4a7c15ULL;
    Report r = i == 0 ? fair_run(*drv, ec) : random_run(*drv, ec);
    m.absorb(r);
  }
  return m;
}

RunConfig base_config(const std::string& lock, int n, const BenchOptions& opt) {
  RunConfig rc;
  rc.lock = lock;
  rc.nprocs = n;
  rc.max_sps = opt.max_sps;
  rc.seed = opt.seed;
  return rc;
}

}  // namespace

std::string run_bench(const std::string& which, const BenchOptions& opt) {
  std::ostringstream out;
  if (which == "wport") {
    out << "lock,nprocs,ports,max_passage_cc,max_passage_dsm,sps\n";
    for (int d : {2, 4, 8}) {
      RunConfig rc = base_config("wport", d, opt);
      rc.ports = d;
      rc.word_bits = std::max(8, d);
      Maxima m = measure(rc, opt);
      out << "wport," << d << ',' << d << ',' << m.passage_cc << ','
          << m.passage_dsm << ',' << m.sps << '\n';
    }
  } else if (which == "tree") {
    out << "lock,nprocs,arity,levels,max_passage_cc,max_passage_dsm,sps\n";
    for (int n : {2, 4, 8, 16}) {
      RunConfig rc = base_config("tree", n, opt);
      rc.arity = 2;
      int levels = 0;
      for (int c = 1; c < n; c *= 2) ++levels;
      levels = std::max(levels, 1);
      Maxima m = measure(rc, opt);
      out << "tree," << n << ",2," << levels << ',' << m.passage_cc << ','
          << m.passage_dsm << ',' << m.sps << '\n';
    }
  } else if (which == "adaptive") {
    // Contention K is set structurally: K processes share the lock.
    out << "lock,contention,ports,max_passage_cc,max_passage_dsm,sps\n";
    for (int k = 1; k <= 8; ++k) {
      RunConfig rc = base_config("adaptive", k, opt);
      rc.ports = 4;
      Maxima m = measure(rc, opt);
      out << "adaptive," << k << ",4," << m.passage_cc << ','
          << m.passage_dsm << ',' << m.sps << '\n';
    }
  } else if (which == "crash") {
    out << "lock,nprocs,crashes,max_sp_cc,sps\n";
    for (int f = 0; f <= 3; ++f) {
      RunConfig rc = base_config("wport", 2, opt);
      rc.ports = 2;
      rc.max_crashes = f;
      Maxima m = measure(rc, opt);
      // Row per observed crash count up to the budget.
      for (auto& [crashes, cc] : m.sp_cc_by_f) {
        if (crashes != f) continue;
        out << "wport,2," << crashes << ',' << cc << ',' << m.sps << '\n';
      }
    }
  } else {
    throw ConfigError("unknown bench sweep: " + which);
  }
  return out.str();
}

}  // namespace rme
